use thiserror::Error;

use super::{axpy, dot, LinearMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("CG did not converge in {iterations} iterations (residual {residual:e}, target {target:e})")]
    NotConverged { iterations: usize, residual: f64, target: f64 },
    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("non-finite value encountered in CG")]
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final Euclidean residual norm.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once `||A x - b|| <= rel_tol ||b||` in the Euclidean norm.
pub fn pcg_solve(
    op: &impl LinearMap,
    diag: &[f64],
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome, SolverError> {
    let n = op.dim();
    debug_assert_eq!(rhs.len(), n);
    debug_assert_eq!(diag.len(), n);
    let inv_diag: Vec<f64> = diag.iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut x = vec![0.0; n];
    let b_norm = dot(rhs, rhs).sqrt();
    if !b_norm.is_finite() {
        return Err(SolverError::NonFinite);
    }
    let target = rel_tol * b_norm;
    if b_norm == 0.0 {
        return Ok(PcgOutcome { solution: x, iterations: 0, residual: 0.0 });
    }

    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = b_norm;

    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !curvature.is_finite() {
            return Err(SolverError::NonFinite);
        }
        if curvature <= 0.0 {
            return Err(SolverError::Indefinite { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok(PcgOutcome { solution: x, iterations: it, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged { iterations: max_iter, residual: res, target })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(Vec<Vec<f64>>);

    impl LinearMap for Dense {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            for (o, row) in out.iter_mut().zip(&self.0) {
                *o = dot(row, x);
            }
        }
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let id = Dense(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let out = pcg_solve(&id, &[1.0, 1.0], &[0.0, 0.0], 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.solution, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_in_one_iteration() {
        let id = Dense(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let b = [1.0, -2.0, 3.0];
        let out = pcg_solve(&id, &[1.0; 3], &b, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.solution, b.to_vec());
    }

    #[test]
    fn reports_indefiniteness() {
        let a = Dense(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        let err = pcg_solve(&a, &[1.0, 1.0], &[0.0, 1.0], 1e-12, 10).unwrap_err();
        assert!(matches!(err, SolverError::Indefinite { .. }));
    }

    #[test]
    fn reports_non_convergence() {
        let a = Dense(vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let err = pcg_solve(&a, &[1.0; 3], &[1.0, 2.0, 3.0], 1e-14, 1).unwrap_err();
        assert!(matches!(err, SolverError::NotConverged { iterations: 1, .. }));
    }
}
