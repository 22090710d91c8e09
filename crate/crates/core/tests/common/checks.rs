//! Derivative and duality measurements on small random instances.

use aniso_ac::anisotropy::Anisotropy2;
use aniso_ac::sensitivity::{Iterate, SensitivityConfig};
use aniso_ac::state::{ProblemSpec, Trajectory};

use super::{loglog_slope, random_trajectory, rel_err, rng, small_problem};

pub fn hexagon() -> Anisotropy2 {
    Anisotropy2::hexagon(0.01, 1e-7).unwrap()
}

fn j_at(p: &ProblemSpec, u: &Trajectory) -> f64 {
    p.cost(&p.forward_solve(u).unwrap(), u).j
}

/// Relative gap between the adjoint gradient and central differences of `j`
/// along `n_dirs` random directions.
pub fn gradient_fd_errors(n_dirs: usize, seed: u64) -> Vec<f64> {
    let p = small_problem(16, 5, hexagon());
    let mut r = rng(seed);
    let u = random_trajectory(&p, &mut r, 20.0);
    let g = Iterate::new(&p, u.clone(), SensitivityConfig::default()).unwrap().gradient();
    let h = 1e-5;
    (0..n_dirs)
        .map(|_| {
            let v = random_trajectory(&p, &mut r, 20.0);
            let mut up = u.clone();
            up.axpy(h, &v);
            let mut um = u.clone();
            um.axpy(-h, &v);
            let fd = (j_at(&p, &up) - j_at(&p, &um)) / (2.0 * h);
            rel_err(fd, p.control_inner(&g, &v))
        })
        .collect()
}

/// `(symmetry gap, gradient-difference gap)` of the Hessian action.
pub fn hessian_errors(seed: u64) -> (f64, f64) {
    let p = small_problem(16, 5, hexagon());
    let mut r = rng(seed);
    let u = random_trajectory(&p, &mut r, 20.0);
    let it = Iterate::new(&p, u.clone(), SensitivityConfig::default()).unwrap();
    let v = random_trajectory(&p, &mut r, 20.0);
    let w = random_trajectory(&p, &mut r, 20.0);
    let hv = it.hessian_apply(&v).unwrap();
    let hw = it.hessian_apply(&w).unwrap();
    let symmetry = rel_err(p.control_inner(&hv, &w), p.control_inner(&v, &hw));

    let h = 1e-4;
    let grad_at = |s: f64| {
        let mut us = u.clone();
        us.axpy(s, &v);
        Iterate::new(&p, us, SensitivityConfig::default()).unwrap().gradient()
    };
    let mut fd = grad_at(h);
    fd.axpy(-1.0, &grad_at(-h));
    let mut diff = fd.scaled(0.5 / h);
    diff.axpy(-1.0, &hv);
    (symmetry, p.control_norm(&diff) / p.control_norm(&hv))
}

/// Log-log slope of `||(S(u + h v) - S(u)) / h - S'(u) v||` against `h`.
pub fn linearized_state_slope(seed: u64) -> f64 {
    let p = small_problem(16, 5, hexagon());
    let mut r = rng(seed);
    let u = random_trajectory(&p, &mut r, 20.0);
    let it = Iterate::new(&p, u.clone(), SensitivityConfig::default()).unwrap();
    let v = random_trajectory(&p, &mut r, 20.0);
    let z = it.linearization().linearized_solve(&v).unwrap();
    let hs = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
    let errs: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let mut uh = u.clone();
            uh.axpy(h, &v);
            let mut q = p.forward_solve(&uh).unwrap();
            q.axpy(-1.0, it.state());
            let mut d = q.scaled(1.0 / h);
            d.axpy(-1.0, &z);
            p.control_norm(&d)
        })
        .collect();
    loglog_slope(&hs, &errs)
}

/// Relative gaps in `(y_N - y_target, z_N)_M = (1/eps) sum_j tau_j (p_j, v_j)_M`.
pub fn duality_errors(n_dirs: usize, seed: u64) -> Vec<f64> {
    let p = small_problem(16, 5, Anisotropy2::l1(0.01, 1e-7).unwrap());
    let mut r = rng(seed);
    let it = Iterate::new(&p, random_trajectory(&p, &mut r, 20.0), SensitivityConfig::default()).unwrap();
    let mismatch: Vec<f64> = it.state().last().iter().zip(p.target.iter()).map(|(a, b)| a - b).collect();
    (0..n_dirs)
        .map(|_| {
            let v = random_trajectory(&p, &mut r, 1.0);
            let z = it.linearization().linearized_solve(&v).unwrap();
            let lhs = p.space.mass().bilinear(&mismatch, z.last());
            rel_err(lhs, p.control_inner(it.adjoint(), &v) / p.eps)
        })
        .collect()
}
