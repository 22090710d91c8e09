//! Linearized state, adjoint and additional adjoint sweeps.
//!
//! Every sweep uses the frozen step operators
//! `L_j = eps K_{A''(grad y_j)} + (1/eps) M_{psi''(y_j)} + (eps/tau_j) M`,
//! assembled once per state trajectory. Gradients and Hessian actions are
//! returned as representatives for the pairing `sum_j tau_j (v_j, w_j)`.

use thiserror::Error;

use crate::anisotropy::AnisotropyError;
use crate::fem::{axpy, pcg_solve, potential_third_load, quasilinear_third_load, SolverError, SparseOperator};
use crate::state::{CostBreakdown, ProblemSpec, StateError, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("linear solve at time step {step}: {source}")]
    Linear { step: usize, source: SolverError },
    #[error(transparent)]
    Anisotropy(#[from] AnisotropyError),
    #[error("second derivatives need a regularized anisotropy (delta > 0)")]
    Unregularized,
    #[error("trajectory has {got} steps, expected {expected}")]
    StepCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter: 20_000 }
    }
}

/// Step operator frozen at one state field.
#[derive(Debug, Clone)]
pub struct LinearStepOperator {
    op: SparseOperator,
    diag: Vec<f64>,
    tau: f64,
}

impl LinearStepOperator {
    pub fn assemble(problem: &ProblemSpec, y: &[f64], tau: f64) -> Result<Self, AnisotropyError> {
        let op = problem.step_operator(y, tau)?;
        let diag = op.diagonal();
        Ok(Self { op, diag, tau })
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn solve(&self, rhs: &[f64], cfg: &SensitivityConfig) -> Result<Vec<f64>, SolverError> {
        pcg_solve(&self.op, &self.diag, rhs, cfg.rel_tol, cfg.max_iter).map(|o| o.solution)
    }
}

/// Frozen operators along one state trajectory.
#[derive(Debug, Clone)]
pub struct Linearization<'a> {
    problem: &'a ProblemSpec,
    state: Trajectory,
    operators: Vec<LinearStepOperator>,
    config: SensitivityConfig,
}

impl<'a> Linearization<'a> {
    pub fn new(problem: &'a ProblemSpec, state: Trajectory, config: SensitivityConfig) -> Result<Self, SensitivityError> {
        check_steps(problem, &state)?;
        let operators = state
            .fields()
            .enumerate()
            .map(|(j, y)| LinearStepOperator::assemble(problem, y, problem.grid.tau(j)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { problem, state, operators, config })
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.problem
    }

    pub fn state(&self) -> &Trajectory {
        &self.state
    }

    pub fn operators(&self) -> &[LinearStepOperator] {
        &self.operators
    }

    fn solve(&self, j: usize, rhs: &[f64]) -> Result<Vec<f64>, SensitivityError> {
        self.operators[j].solve(rhs, &self.config).map_err(|source| SensitivityError::Linear { step: j + 1, source })
    }

    /// `L_j z_j = M v_j + (eps/tau_j) M z_{j-1}`, `z_0 = 0`.
    pub fn linearized_solve(&self, v: &Trajectory) -> Result<Trajectory, SensitivityError> {
        check_steps(self.problem, v)?;
        let mass = self.problem.space.mass();
        let eps = self.problem.eps;
        let mut z = Trajectory::zeros(self.problem.n_steps(), self.problem.n_nodes());
        let mut prev = vec![0.0; self.problem.n_nodes()];
        for j in 0..self.problem.n_steps() {
            let mut src = v.field(j).to_vec();
            axpy(eps / self.operators[j].tau, &prev, &mut src);
            let zj = self.solve(j, &mass.matvec(&src))?;
            z.field_mut(j).copy_from_slice(&zj);
            prev = zj;
        }
        Ok(z)
    }

    /// Backward sweep `L_j p_j = (eps/tau_j) M p_{j+1} - s_j` with `p_{N+1} = terminal`
    /// and optional sources `s_j`.
    fn backward(
        &self,
        terminal: Vec<f64>,
        mut source: impl FnMut(usize) -> Result<Option<Vec<f64>>, SensitivityError>,
    ) -> Result<Trajectory, SensitivityError> {
        let mass = self.problem.space.mass();
        let eps = self.problem.eps;
        let mut p = Trajectory::zeros(self.problem.n_steps(), self.problem.n_nodes());
        let mut next = terminal;
        for j in (0..self.problem.n_steps()).rev() {
            let mut rhs = mass.matvec(&next);
            rhs.iter_mut().for_each(|v| *v *= eps / self.operators[j].tau);
            if let Some(s) = source(j)? {
                axpy(-1.0, &s, &mut rhs);
            }
            let pj = self.solve(j, &rhs)?;
            p.field_mut(j).copy_from_slice(&pj);
            next = pj;
        }
        Ok(p)
    }

    /// Adjoint with terminal datum `y_N - target`.
    pub fn adjoint_solve(&self, target: &[f64]) -> Result<Trajectory, SensitivityError> {
        let terminal: Vec<f64> = self.state.last().iter().zip(target).map(|(a, b)| a - b).collect();
        self.backward(terminal, |_| Ok(None))
    }

    /// Additional adjoint with terminal datum `dy_n` and the third-derivative
    /// sources `eps (A'''(grad y_j)[grad phi, grad z_j], grad p_j) + (1/eps) (psi'''(y_j) phi z_j, p_j)`.
    pub fn additional_adjoint_solve(
        &self,
        p: &Trajectory,
        z: &Trajectory,
        dy_n: &[f64],
    ) -> Result<Trajectory, SensitivityError> {
        if self.problem.aniso.delta() <= 0.0 {
            return Err(SensitivityError::Unregularized);
        }
        check_steps(self.problem, p)?;
        check_steps(self.problem, z)?;
        let mesh = self.problem.space.mesh();
        let eps = self.problem.eps;
        self.backward(dy_n.to_vec(), |j| {
            let (yj, zj, pj) = (self.state.field(j), z.field(j), p.field(j));
            let mut s = quasilinear_third_load(mesh, &self.problem.aniso, yj, zj, pj)?;
            s.iter_mut().for_each(|v| *v *= eps);
            axpy(1.0 / eps, &potential_third_load(mesh, yj, zj, pj), &mut s);
            Ok(Some(s))
        })
    }
}

fn check_steps(problem: &ProblemSpec, t: &Trajectory) -> Result<(), SensitivityError> {
    if t.n_steps() != problem.n_steps() || t.n_nodes() != problem.n_nodes() {
        return Err(SensitivityError::StepCount { expected: problem.n_steps(), got: t.n_steps() });
    }
    Ok(())
}

/// `(lambda a + b) / eps`
fn combine(problem: &ProblemSpec, a: &Trajectory, b: &Trajectory) -> Trajectory {
    let mut g = a.scaled(problem.lambda / problem.eps);
    g.axpy(1.0 / problem.eps, b);
    g
}

/// Control, state, adjoint and frozen operators at one outer iterate.
#[derive(Debug, Clone)]
pub struct Iterate<'a> {
    control: Trajectory,
    linearization: Linearization<'a>,
    adjoint: Trajectory,
    cost: CostBreakdown,
}

impl<'a> Iterate<'a> {
    /// Forward solve, operator assembly and adjoint solve at `control`.
    pub fn new(problem: &'a ProblemSpec, control: Trajectory, config: SensitivityConfig) -> Result<Self, SensitivityError> {
        let state = problem.forward_solve(&control)?;
        Self::from_state(problem, control, state, config)
    }

    /// Same as [`Iterate::new`] with an already computed state.
    pub fn from_state(
        problem: &'a ProblemSpec,
        control: Trajectory,
        state: Trajectory,
        config: SensitivityConfig,
    ) -> Result<Self, SensitivityError> {
        check_steps(problem, &control)?;
        let cost = problem.cost(&state, &control);
        let linearization = Linearization::new(problem, state, config)?;
        let adjoint = linearization.adjoint_solve(&problem.target)?;
        Ok(Self { control, linearization, adjoint, cost })
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.linearization.problem
    }

    pub fn control(&self) -> &Trajectory {
        &self.control
    }

    pub fn into_control(self) -> Trajectory {
        self.control
    }

    pub fn state(&self) -> &Trajectory {
        self.linearization.state()
    }

    pub fn adjoint(&self) -> &Trajectory {
        &self.adjoint
    }

    pub fn linearization(&self) -> &Linearization<'a> {
        &self.linearization
    }

    pub fn cost(&self) -> CostBreakdown {
        self.cost
    }

    /// `(lambda u + p) / eps`.
    pub fn gradient(&self) -> Trajectory {
        combine(self.problem(), &self.control, &self.adjoint)
    }

    /// `(lambda du + dp) / eps`.
    pub fn hessian_apply(&self, du: &Trajectory) -> Result<Trajectory, SensitivityError> {
        let z = self.linearization.linearized_solve(du)?;
        let dp = self.linearization.additional_adjoint_solve(&self.adjoint, &z, z.last())?;
        Ok(combine(self.problem(), du, &dp))
    }
}

/// Cost and gradient at `u`.
pub fn reduced_gradient(problem: &ProblemSpec, u: &Trajectory) -> Result<(CostBreakdown, Trajectory), SensitivityError> {
    let it = Iterate::new(problem, u.clone(), SensitivityConfig::default())?;
    Ok((it.cost(), it.gradient()))
}

/// Hessian action at `u` along `du`.
pub fn hessian_apply(problem: &ProblemSpec, u: &Trajectory, du: &Trajectory) -> Result<Trajectory, SensitivityError> {
    Iterate::new(problem, u.clone(), SensitivityConfig::default())?.hessian_apply(du)
}
