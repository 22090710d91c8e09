//! Implicit time stepping of the anisotropic Allen-Cahn state equation.
//!
//! Each interval `I_j` solves the nonlinear elliptic problem
//!
//! ```text
//! (eps/tau_j) M (y_j - y_{j-1}) + eps N(y_j) + (1/eps) P(y_j) = M u_j
//! ```
//!
//! where `N` is the quasilinear anisotropy term and `P` the double-well load.
//! Under `tau_j < eps^2 / C_psi` the step functional is strongly convex and its
//! Hessian, the step operator, is symmetric positive definite.

use log::debug;
use thiserror::Error;

use crate::anisotropy::{Anisotropy2, AnisotropyError};
use crate::fem::{
    anisotropic_energy, apply_quasilinear_term, axpy, norm2, pcg_solve, potential_integral, potential_load,
    local_potential_matrix, local_stiffness, DoubleWell, FemError, FemSpace, NodalField, SolverError,
    SparseOperator,
};

/// Parameter defaults of the reference experiments.
pub mod defaults {
    /// Interface parameter `1 / (14 pi)`.
    pub const EPS: f64 = 1.0 / (14.0 * std::f64::consts::PI);
    pub const LAMBDA: f64 = 0.01;
    pub const DELTA: f64 = 1e-7;
    pub const PAPER_HORIZON: f64 = 1.625e-2;
    pub const PAPER_TAU: f64 = 1.625e-4;
    pub const PAPER_N_DIV: usize = 128;
    pub const DESK_HORIZON: f64 = 2e-3;
    pub const DESK_TAU: f64 = 1e-4;
    pub const DESK_N_DIV: usize = 64;
    /// Regularization used by the Newton Jacobian when the model itself is unregularized.
    pub const JACOBIAN_DELTA: f64 = 1e-12;
    pub const ANISO_EPS: f64 = 0.01;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("Newton line search stalled at residual {residual:e}")]
    Stalled { residual: f64 },
    #[error("Jacobian solve failed: {0}")]
    Linear(#[from] SolverError),
    #[error(transparent)]
    Anisotropy(#[from] AnisotropyError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("time step {tau:e} violates tau < eps^2 / C_psi = {limit:e}")]
    StepTooLarge { tau: f64, limit: f64 },
    #[error("time grid needs at least one positive step")]
    EmptyGrid,
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("a trajectory with {expected} steps was expected, got {got}")]
    StepCount { expected: usize, got: usize },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Anisotropy(#[from] AnisotropyError),
    #[error("time step {step}: {source}")]
    Step { step: usize, source: NewtonError },
}

/// Step sizes `tau_1..tau_N` and the induced times `t_0 = 0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    steps: Vec<f64>,
    times: Vec<f64>,
}

impl TimeGrid {
    /// Checks `max tau_j < eps^2 / C_psi`.
    pub fn new(steps: Vec<f64>, eps: f64) -> Result<Self, StateError> {
        if steps.is_empty() {
            return Err(StateError::EmptyGrid);
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(StateError::InvalidParameter { name: "eps", value: eps });
        }
        let limit = eps * eps / DoubleWell::SEMICONVEXITY;
        for &tau in &steps {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(StateError::InvalidParameter { name: "tau", value: tau });
            }
            if tau >= limit {
                return Err(StateError::StepTooLarge { tau, limit });
            }
        }
        let mut times = Vec::with_capacity(steps.len() + 1);
        times.push(0.0);
        let mut t = 0.0;
        for &tau in &steps {
            t += tau;
            times.push(t);
        }
        Ok(Self { steps, times })
    }

    pub fn uniform(tau: f64, n_steps: usize, eps: f64) -> Result<Self, StateError> {
        Self::new(vec![tau; n_steps], eps)
    }

    /// Uniform grid with step `tau` and `round(horizon / tau)` steps (at least one).
    pub fn from_horizon(horizon: f64, tau: f64, eps: f64) -> Result<Self, StateError> {
        if !(horizon > 0.0 && tau > 0.0) {
            return Err(StateError::EmptyGrid);
        }
        let n = ((horizon / tau).round() as usize).max(1);
        Self::uniform(tau, n, eps)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step size of interval `j` (zero based).
    pub fn tau(&self, j: usize) -> f64 {
        self.steps[j]
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Times `t_0..t_N`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn max_tau(&self) -> f64 {
        self.steps.iter().cloned().fold(0.0, f64::max)
    }
}

/// Piecewise constant in time sequence of nodal fields, one per interval,
/// stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n_nodes: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(n_steps: usize, n_nodes: usize) -> Self {
        Self { n_nodes, data: vec![0.0; n_steps * n_nodes] }
    }

    pub fn constant(n_steps: usize, n_nodes: usize, value: f64) -> Self {
        Self { n_nodes, data: vec![value; n_steps * n_nodes] }
    }

    pub fn from_flat(n_nodes: usize, data: Vec<f64>) -> Self {
        assert!(n_nodes > 0 && data.len() % n_nodes == 0, "flat data must hold whole fields");
        Self { n_nodes, data }
    }

    pub fn from_fields(fields: &[Vec<f64>]) -> Self {
        let n_nodes = fields.first().map(|f| f.len()).unwrap_or(0);
        assert!(fields.iter().all(|f| f.len() == n_nodes), "fields of unequal length");
        Self { n_nodes, data: fields.concat() }
    }

    pub fn n_steps(&self) -> usize {
        if self.n_nodes == 0 {
            0
        } else {
            self.data.len() / self.n_nodes
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn field(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    pub fn field_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    pub fn last(&self) -> &[f64] {
        self.field(self.n_steps() - 1)
    }

    pub fn fields(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_nodes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Trajectory) {
        assert_eq!(self.data.len(), other.data.len());
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn scaled(&self, alpha: f64) -> Trajectory {
        Trajectory { n_nodes: self.n_nodes, data: self.data.iter().map(|v| alpha * v).collect() }
    }
}

/// Damped Newton settings for one implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    /// Stop once `||F(y)|| <= tol (1 + ||M u_j||)`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Sufficient residual decrease factor of the backtracking.
    pub armijo: f64,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 30, max_halvings: 8, armijo: 1e-4, linear_tol: 1e-10, linear_max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Per-step forward diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
    pub energy: f64,
}

/// Tracking cost `j = j1 + j2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub j: f64,
    /// `||y_N - y_target||^2 / 2`
    pub j1: f64,
    /// `lambda / (2 eps) ||u||^2_{L2(Q)}`
    pub j2: f64,
}

/// Everything that defines one optimal control problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub eps: f64,
    pub lambda: f64,
    pub space: FemSpace,
    pub grid: TimeGrid,
    pub aniso: Anisotropy2,
    /// Anisotropy used for Newton Jacobians: `aniso` itself when `delta > 0`,
    /// otherwise a copy with a tiny shift.
    jacobian_aniso: Anisotropy2,
    pub y0: NodalField,
    pub target: NodalField,
    pub newton: NewtonConfig,
}

impl ProblemSpec {
    pub fn new(
        eps: f64,
        lambda: f64,
        space: FemSpace,
        grid: TimeGrid,
        aniso: Anisotropy2,
        y0: NodalField,
        target: NodalField,
    ) -> Result<Self, StateError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(StateError::InvalidParameter { name: "eps", value: eps });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(StateError::InvalidParameter { name: "lambda", value: lambda });
        }
        let limit = eps * eps / DoubleWell::SEMICONVEXITY;
        if grid.max_tau() >= limit {
            return Err(StateError::StepTooLarge { tau: grid.max_tau(), limit });
        }
        space.check_field(&y0)?;
        space.check_field(&target)?;
        let jacobian_aniso = if aniso.delta() > 0.0 { aniso.clone() } else { aniso.with_delta(defaults::JACOBIAN_DELTA)? };
        Ok(Self { eps, lambda, space, grid, aniso, jacobian_aniso, y0, target, newton: NewtonConfig::default() })
    }

    pub fn with_newton(mut self, newton: NewtonConfig) -> Self {
        self.newton = newton;
        self
    }

    pub fn jacobian_anisotropy(&self) -> &Anisotropy2 {
        &self.jacobian_aniso
    }

    pub fn n_nodes(&self) -> usize {
        self.space.n_nodes()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.len()
    }

    pub fn zero_control(&self) -> Trajectory {
        Trajectory::zeros(self.n_steps(), self.n_nodes())
    }

    /// `F(y) = (eps/tau) M (y - y_prev) + eps N(y) + (1/eps) P(y) - M u`.
    pub fn residual(&self, y: &[f64], y_prev: &[f64], u: &[f64], tau: f64) -> Vec<f64> {
        let mesh = self.space.mesh();
        let diff: Vec<f64> = y.iter().zip(y_prev).map(|(a, b)| a - b).collect();
        let mut r = self.space.mass().matvec(&diff);
        r.iter_mut().for_each(|v| *v *= self.eps / tau);
        axpy(self.eps, &apply_quasilinear_term(mesh, &self.aniso, y), &mut r);
        axpy(1.0 / self.eps, &potential_load(mesh, y), &mut r);
        axpy(-1.0, &self.space.mass().matvec(u), &mut r);
        r
    }

    /// Step functional whose gradient is [`ProblemSpec::residual`].
    pub fn step_functional(&self, y: &[f64], y_prev: &[f64], u: &[f64], tau: f64) -> f64 {
        let diff: Vec<f64> = y.iter().zip(y_prev).map(|(a, b)| a - b).collect();
        0.5 * self.eps / tau * self.space.mass().bilinear(&diff, &diff) + self.energy(y)
            - self.space.mass().bilinear(u, y)
    }

    /// `L = eps K_{A''(grad y)} + (1/eps) M_{psi''(y)} + (eps/tau) M`.
    ///
    /// The same assembly serves the Newton Jacobian, the linearized state, the
    /// adjoint and the additional adjoint.
    pub fn step_operator(&self, y: &[f64], tau: f64) -> Result<SparseOperator, AnisotropyError> {
        step_operator(&self.space, &self.jacobian_aniso, self.eps, y, tau)
    }

    /// Solves one implicit step by damped Newton from the initial guess `y_prev`.
    pub fn newton_step_solve(
        &self,
        y_prev: &[f64],
        u: &[f64],
        tau: f64,
    ) -> Result<(Vec<f64>, NewtonStats), NewtonError> {
        let cfg = &self.newton;
        let target = cfg.tol * (1.0 + norm2(&self.space.mass().matvec(u)));
        let mut y = y_prev.to_vec();
        let mut r = self.residual(&y, y_prev, u, tau);
        let mut res = norm2(&r);
        for it in 0..cfg.max_iter {
            if res <= target {
                return Ok((y, NewtonStats { iterations: it, residual: res }));
            }
            let jac = self.step_operator(&y, tau)?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let dy = pcg_solve(&jac, &jac.diagonal(), &neg, cfg.linear_tol, cfg.linear_max_iter)?.solution;

            let mut t = 1.0;
            let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
            let mut accepted = false;
            for _ in 0..=cfg.max_halvings {
                let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, d)| a + t * d).collect();
                let r_trial = self.residual(&trial, y_prev, u, tau);
                let res_trial = norm2(&r_trial);
                if res_trial <= (1.0 - cfg.armijo * t) * res {
                    y = trial;
                    r = r_trial;
                    res = res_trial;
                    accepted = true;
                    break;
                }
                if best.as_ref().map_or(true, |b| res_trial < b.0) {
                    best = Some((res_trial, trial, r_trial));
                }
                t *= 0.5;
            }
            if !accepted {
                match best {
                    Some((res_best, trial, r_best)) if res_best < res => {
                        debug!("Newton backtracking exhausted, taking best trial ({res_best:e} < {res:e})");
                        y = trial;
                        r = r_best;
                        res = res_best;
                    }
                    _ => return Err(NewtonError::Stalled { residual: res }),
                }
            }
        }
        if res <= target {
            return Ok((y, NewtonStats { iterations: cfg.max_iter, residual: res }));
        }
        Err(NewtonError::MaxIterations { iterations: cfg.max_iter, residual: res })
    }

    fn check_control(&self, u: &Trajectory) -> Result<(), StateError> {
        if u.n_steps() != self.n_steps() {
            return Err(StateError::StepCount { expected: self.n_steps(), got: u.n_steps() });
        }
        if u.n_nodes() != self.n_nodes() {
            return Err(FemError::FieldLength { expected: self.n_nodes(), got: u.n_nodes() }.into());
        }
        Ok(())
    }

    /// `y_j = S(u_j, y_{j-1})` for `j = 1..N`; returns all states.
    pub fn forward_solve(&self, u: &Trajectory) -> Result<Trajectory, StateError> {
        self.forward_impl(u, false).map(|(y, _)| y)
    }

    pub fn forward_solve_with_diagnostics(
        &self,
        u: &Trajectory,
    ) -> Result<(Trajectory, Vec<StepDiagnostics>), StateError> {
        self.forward_impl(u, true)
    }

    fn forward_impl(&self, u: &Trajectory, diagnostics: bool) -> Result<(Trajectory, Vec<StepDiagnostics>), StateError> {
        self.check_control(u)?;
        let mut y = Trajectory::zeros(self.n_steps(), self.n_nodes());
        let mut diag = Vec::new();
        let mut prev = self.y0.0.clone();
        for j in 0..self.n_steps() {
            let tau = self.grid.tau(j);
            let (next, stats) =
                self.newton_step_solve(&prev, u.field(j), tau).map_err(|source| StateError::Step { step: j + 1, source })?;
            if diagnostics {
                diag.push(StepDiagnostics {
                    step: j + 1,
                    t: self.grid.times()[j + 1],
                    newton_iters: stats.iterations,
                    residual: stats.residual,
                    energy: self.energy(&next),
                });
            }
            y.field_mut(j).copy_from_slice(&next);
            prev = next;
        }
        Ok((y, diag))
    }

    /// Ginzburg-Landau energy `eps sum_e area A(grad y) + (1/eps) int psi(y)`.
    pub fn energy(&self, y: &[f64]) -> f64 {
        let mesh = self.space.mesh();
        self.eps * anisotropic_energy(mesh, &self.aniso, y) + potential_integral(mesh, y) / self.eps
    }

    /// Discrete `L2(Q)` pairing `sum_j tau_j (a_j, b_j)`.
    pub fn control_inner(&self, a: &Trajectory, b: &Trajectory) -> f64 {
        a.fields().zip(b.fields()).enumerate().map(|(j, (fa, fb))| self.grid.tau(j) * self.space.mass().bilinear(fa, fb)).sum()
    }

    /// `sum_j tau_j ||u_j||^2`.
    pub fn control_norm_sq(&self, u: &Trajectory) -> f64 {
        self.control_inner(u, u)
    }

    /// `||u||_{L2(Q)}`.
    pub fn control_norm(&self, u: &Trajectory) -> f64 {
        self.control_norm_sq(u).max(0.0).sqrt()
    }

    pub fn cost(&self, y: &Trajectory, u: &Trajectory) -> CostBreakdown {
        let diff: Vec<f64> = y.last().iter().zip(self.target.iter()).map(|(a, b)| a - b).collect();
        let j1 = 0.5 * self.space.mass().bilinear(&diff, &diff);
        let j2 = 0.5 * self.lambda / self.eps * self.control_norm_sq(u);
        CostBreakdown { j: j1 + j2, j1, j2 }
    }
}

/// Assembles the step operator at `y` in one element pass.
pub fn step_operator(
    space: &FemSpace,
    aniso: &Anisotropy2,
    eps: f64,
    y: &[f64],
    tau: f64,
) -> Result<SparseOperator, AnisotropyError> {
    let mesh = space.mesh();
    let mut op = space.mass().clone();
    op.scale(eps / tau);
    for (e, tri) in mesh.elements().iter().enumerate() {
        let stiff = local_stiffness(mesh, e, &aniso.a_hess(&mesh.element_gradient(e, y))?);
        let pot = local_potential_matrix(mesh, e, tri, y);
        let mut local = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                local[a][b] = eps * stiff[a][b] + pot[a][b] / eps;
            }
        }
        op.add_element(e, &local);
    }
    Ok(op)
}
