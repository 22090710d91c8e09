//! Trust-region Newton with Steihaug-CG on the reduced cost functional.
//!
//! The outer loop is written against [`Objective`], so it runs unchanged on
//! analytic test functions and on the control problem, where
//! [`ReducedObjective`] caches state, adjoint and frozen operators of the
//! incumbent and only reassembles after an accepted step.

use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, info};
use thiserror::Error;

use crate::sensitivity::{Iterate, SensitivityConfig, SensitivityError};
use crate::state::{CostBreakdown, ProblemSpec, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Residual reduced by the relative tolerance inside the region.
    Interior,
    /// A CG iterate left the region.
    Boundary,
    /// Nonpositive curvature direction followed to the boundary.
    NegativeCurvature,
    MaxIter,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Interior => "interior",
            StepKind::Boundary => "boundary",
            StepKind::NegativeCurvature => "neg_curvature",
            StepKind::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteihaugResult {
    pub step: Vec<f64>,
    pub iterations: usize,
    pub kind: StepKind,
    /// Model decrease `-(g.s + s.Hs / 2)`.
    pub predicted: f64,
    pub step_norm: f64,
}

#[derive(Debug, Error)]
pub enum SteihaugError<E: std::error::Error + 'static> {
    #[error("Hessian application failed: {0}")]
    Hessian(#[source] E),
    #[error("non-finite curvature or residual at CG iteration {0}")]
    NonFinite(usize),
}

/// Positive root `t` of `||s + t d|| = delta`.
fn boundary_root(ss: f64, sd: f64, dd: f64, delta: f64) -> f64 {
    let disc = (sd * sd + dd * (delta * delta - ss)).max(0.0);
    (-sd + disc.sqrt()) / dd
}

/// Steihaug-CG for `min g.s + s.Hs/2` subject to `||s|| <= delta`, all pairings
/// taken in `inner`.
pub fn steihaug_solve<E, H, I>(
    grad: &[f64],
    mut hess: H,
    inner: I,
    delta: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<SteihaugResult, SteihaugError<E>>
where
    E: std::error::Error + 'static,
    H: FnMut(&[f64]) -> Result<Vec<f64>, E>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let n = grad.len();
    let mut s = vec![0.0; n];
    let mut hs = vec![0.0; n];
    let mut r = grad.to_vec();
    let mut d: Vec<f64> = r.iter().map(|v| -v).collect();
    let mut rr = inner(&r, &r);
    let g_norm = rr.max(0.0).sqrt();
    let target = rel_tol * g_norm;
    let finish = |s: Vec<f64>, hs: &[f64], iterations, kind| {
        let predicted = -(inner(grad, &s) + 0.5 * inner(&s, hs));
        let step_norm = inner(&s, &s).max(0.0).sqrt();
        SteihaugResult { step: s, iterations, kind, predicted, step_norm }
    };
    if g_norm == 0.0 {
        return Ok(finish(s, &hs, 0, StepKind::Interior));
    }
    let mut ss = 0.0;
    for it in 1..=max_iter {
        let hd = hess(&d).map_err(SteihaugError::Hessian)?;
        let kappa = inner(&d, &hd);
        if !kappa.is_finite() {
            return Err(SteihaugError::NonFinite(it));
        }
        let sd = inner(&s, &d);
        let dd = inner(&d, &d);
        if kappa <= 0.0 {
            let t = boundary_root(ss, sd, dd, delta);
            axpy_into(t, &d, &mut s);
            axpy_into(t, &hd, &mut hs);
            return Ok(finish(s, &hs, it, StepKind::NegativeCurvature));
        }
        let alpha = rr / kappa;
        let ss_next = ss + 2.0 * alpha * sd + alpha * alpha * dd;
        if ss_next.sqrt() >= delta {
            let t = boundary_root(ss, sd, dd, delta);
            axpy_into(t, &d, &mut s);
            axpy_into(t, &hd, &mut hs);
            return Ok(finish(s, &hs, it, StepKind::Boundary));
        }
        axpy_into(alpha, &d, &mut s);
        axpy_into(alpha, &hd, &mut hs);
        axpy_into(alpha, &hd, &mut r);
        ss = inner(&s, &s);
        let rr_next = inner(&r, &r);
        if !rr_next.is_finite() {
            return Err(SteihaugError::NonFinite(it));
        }
        if rr_next.sqrt() <= target {
            return Ok(finish(s, &hs, it, StepKind::Interior));
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = -ri + beta * *di;
        }
    }
    Ok(finish(s, &hs, max_iter, StepKind::MaxIter))
}

fn axpy_into(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// A twice differentiable functional on a Hilbert space of flat coefficient vectors.
pub trait Objective {
    type Error: std::error::Error + 'static;

    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
    fn current(&self) -> &[f64];
    fn cost(&self) -> CostBreakdown;
    /// Riesz representative of the derivative at the current point.
    fn gradient(&self) -> &[f64];
    fn hess_apply(&self, v: &[f64]) -> Result<Vec<f64>, Self::Error>;
    /// Evaluates a trial point and keeps it for a later [`Objective::accept_trial`].
    fn try_point(&mut self, x: Vec<f64>) -> Result<CostBreakdown, Self::Error>;
    fn accept_trial(&mut self) -> Result<(), Self::Error>;
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRegionConfig {
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Radius below which the iteration stops.
    pub min_radius: f64,
    pub eta_accept: f64,
    pub eta_expand: f64,
    pub shrink: f64,
    pub expand: f64,
    /// Absolute gradient tolerance in the weighted norm.
    pub gtol_abs: f64,
    /// Gradient tolerance relative to the initial gradient norm.
    pub gtol_rel: f64,
    pub max_iter: usize,
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
    /// Consecutive failed trial evaluations tolerated before aborting.
    pub max_failures: usize,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            initial_radius: 1.0,
            max_radius: 1e3,
            min_radius: 1e-12,
            eta_accept: 0.1,
            eta_expand: 0.75,
            shrink: 0.25,
            expand: 2.0,
            gtol_abs: 1e-13,
            gtol_rel: 1e-8,
            max_iter: 100,
            cg_rel_tol: 1e-6,
            cg_max_iter: 400,
            max_failures: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("trust-region thresholds must satisfy 0 < eta_accept < eta_expand < 1")]
    Thresholds,
    #[error("shrink factor must lie in (0, 1) and expand factor exceed 1")]
    Factors,
    #[error("radii must satisfy 0 < min_radius <= initial_radius <= max_radius")]
    Radii,
    #[error("tolerances must be non-negative and finite")]
    Tolerances,
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0 < self.eta_accept && self.eta_accept < self.eta_expand && self.eta_expand < 1.0) {
            return Err(ConfigError::Thresholds);
        }
        if !(0.0 < self.shrink && self.shrink < 1.0 && self.expand > 1.0) {
            return Err(ConfigError::Factors);
        }
        if !(0.0 < self.min_radius && self.min_radius <= self.initial_radius && self.initial_radius <= self.max_radius) {
            return Err(ConfigError::Radii);
        }
        let tols = [self.gtol_abs, self.gtol_rel, self.cg_rel_tol];
        if tols.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(ConfigError::Tolerances);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    RadiusCollapse,
    /// Predicted decrease fell below the rounding level of the cost.
    Stalled,
    TrialFailures,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::MaxIterations => "max_iterations",
            Termination::RadiusCollapse => "radius_collapse",
            Termination::Stalled => "stalled",
            Termination::TrialFailures => "trial_failures",
        }
    }
}

/// One outer iteration, measured at the incumbent before the step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: CostBreakdown,
    pub gnorm: f64,
    pub delta: f64,
    pub cg_iters: usize,
    pub kind: StepKind,
    pub step_norm: f64,
    pub rho: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionReport {
    pub records: Vec<IterationRecord>,
    pub initial_cost: CostBreakdown,
    pub final_cost: CostBreakdown,
    pub initial_gnorm: f64,
    pub final_gnorm: f64,
    pub termination: Termination,
    pub wall_time: f64,
}

impl TrustRegionReport {
    pub fn tr_steps(&self) -> usize {
        self.records.len()
    }

    pub fn max_cg(&self) -> usize {
        self.records.iter().map(|r| r.cg_iters).max().unwrap_or(0)
    }

    /// Mean CG count over iterations whose subproblem ended in the interior.
    pub fn mean_cg(&self) -> f64 {
        let interior: Vec<usize> =
            self.records.iter().filter(|r| r.kind == StepKind::Interior).map(|r| r.cg_iters).collect();
        if interior.is_empty() {
            0.0
        } else {
            interior.iter().sum::<usize>() as f64 / interior.len() as f64
        }
    }

    pub fn to_csv(&self) -> String {
        use crate::fem::io::fmt_f64;
        let mut s = String::from("iter,j,j1,j2,gnorm,delta,cg_iters,accepted\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.iter,
                fmt_f64(r.cost.j),
                fmt_f64(r.cost.j1),
                fmt_f64(r.cost.j2),
                fmt_f64(r.gnorm),
                fmt_f64(r.delta),
                r.cg_iters,
                r.accepted
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        use crate::fem::io::fmt_f64;
        let mut s = String::new();
        let _ = writeln!(s, "max_cg={}", self.max_cg());
        let _ = writeln!(s, "mean_cg={:.3}", self.mean_cg());
        let _ = writeln!(s, "tr_steps={}", self.tr_steps());
        let _ = writeln!(s, "time_s={:.3}", self.wall_time);
        let _ = writeln!(s, "termination={}", self.termination.as_str());
        let _ = writeln!(s, "j={}", fmt_f64(self.final_cost.j));
        let _ = writeln!(s, "j1={}", fmt_f64(self.final_cost.j1));
        let _ = writeln!(s, "j2={}", fmt_f64(self.final_cost.j2));
        let _ = writeln!(s, "gnorm={}", fmt_f64(self.final_gnorm));
        s
    }
}

#[derive(Debug, Error)]
pub enum OptimizerError<E: std::error::Error + 'static> {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("subproblem solve failed in iteration {iteration}: {source}")]
    Subproblem { iteration: usize, source: SteihaugError<E> },
    #[error("accepting iteration {iteration} failed: {source}")]
    Accept { iteration: usize, source: E },
    #[error("{} consecutive trial evaluations failed, last: {source}", report.records.len())]
    TrialFailures { report: Box<TrustRegionReport>, source: E },
}

/// Runs the trust-region iteration from the objective's current point.
pub fn trust_region<O: Objective>(
    obj: &mut O,
    cfg: &TrustRegionConfig,
) -> Result<TrustRegionReport, OptimizerError<O::Error>> {
    cfg.validate()?;
    let start = Instant::now();
    let initial_cost = obj.cost();
    let gnorm0 = obj.inner(obj.gradient(), obj.gradient()).max(0.0).sqrt();
    let gtol = cfg.gtol_abs.max(cfg.gtol_rel * gnorm0);
    let mut delta = cfg.initial_radius;
    let mut records = Vec::new();
    let mut failures = 0usize;
    let mut gnorm;

    let termination = loop {
        gnorm = obj.inner(obj.gradient(), obj.gradient()).max(0.0).sqrt();
        if gnorm <= gtol {
            break Termination::GradientTolerance;
        }
        if records.len() >= cfg.max_iter {
            break Termination::MaxIterations;
        }
        if delta < cfg.min_radius {
            break Termination::RadiusCollapse;
        }
        let iter = records.len() + 1;
        let cost = obj.cost();
        let sub = {
            let o: &O = obj;
            steihaug_solve(o.gradient(), |v| o.hess_apply(v), |a, b| o.inner(a, b), delta, cfg.cg_rel_tol, cfg.cg_max_iter)
                .map_err(|source| OptimizerError::Subproblem { iteration: iter, source })?
        };
        let mut record = IterationRecord {
            iter,
            cost,
            gnorm,
            delta,
            cg_iters: sub.iterations,
            kind: sub.kind,
            step_norm: sub.step_norm,
            rho: f64::NAN,
            accepted: false,
        };
        if !(sub.predicted > f64::EPSILON * cost.j.abs()) {
            records.push(record);
            break Termination::Stalled;
        }
        let mut trial = obj.current().to_vec();
        axpy_into(1.0, &sub.step, &mut trial);
        match obj.try_point(trial) {
            Ok(trial_cost) => {
                failures = 0;
                let rho = (cost.j - trial_cost.j) / sub.predicted;
                record.rho = rho;
                if rho >= cfg.eta_accept {
                    obj.accept_trial().map_err(|source| OptimizerError::Accept { iteration: iter, source })?;
                    record.accepted = true;
                }
                if rho < cfg.eta_accept {
                    delta = cfg.shrink * sub.step_norm.min(delta);
                } else if rho > cfg.eta_expand && sub.step_norm >= 0.99 * delta {
                    delta = (cfg.expand * delta).min(cfg.max_radius);
                }
            }
            Err(e) => {
                failures += 1;
                debug!("trial evaluation failed in iteration {iter}: {e}");
                delta *= cfg.shrink;
                if failures > cfg.max_failures {
                    records.push(record);
                    let report = TrustRegionReport {
                        records,
                        initial_cost,
                        final_cost: obj.cost(),
                        initial_gnorm: gnorm0,
                        final_gnorm: gnorm,
                        termination: Termination::TrialFailures,
                        wall_time: start.elapsed().as_secs_f64(),
                    };
                    return Err(OptimizerError::TrialFailures { report: Box::new(report), source: e });
                }
            }
        }
        info!(
            "tr {iter:3}: j={:.6e} |g|={:.3e} delta={:.3e} cg={} ({}) rho={:.3} {}",
            record.cost.j,
            gnorm,
            record.delta,
            record.cg_iters,
            record.kind.as_str(),
            record.rho,
            if record.accepted { "accepted" } else { "rejected" }
        );
        records.push(record);
    };

    Ok(TrustRegionReport {
        records,
        initial_cost,
        final_cost: obj.cost(),
        initial_gnorm: gnorm0,
        final_gnorm: gnorm,
        termination,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// The reduced cost `u -> j(S(u), u)` of a control problem.
pub struct ReducedObjective<'a> {
    problem: &'a ProblemSpec,
    config: SensitivityConfig,
    current: Iterate<'a>,
    gradient: Trajectory,
    trial: Option<(Trajectory, Trajectory)>,
}

impl<'a> ReducedObjective<'a> {
    pub fn new(problem: &'a ProblemSpec, u0: Trajectory, config: SensitivityConfig) -> Result<Self, SensitivityError> {
        let current = Iterate::new(problem, u0, config)?;
        let gradient = current.gradient();
        Ok(Self { problem, config, current, gradient, trial: None })
    }

    pub fn iterate(&self) -> &Iterate<'a> {
        &self.current
    }

    pub fn into_iterate(self) -> Iterate<'a> {
        self.current
    }
}

impl Objective for ReducedObjective<'_> {
    type Error = SensitivityError;

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.problem.n_nodes();
        let mass = self.problem.space.mass();
        a.chunks(n).zip(b.chunks(n)).enumerate().map(|(j, (x, y))| self.problem.grid.tau(j) * mass.bilinear(x, y)).sum()
    }

    fn current(&self) -> &[f64] {
        self.current.control().as_slice()
    }

    fn cost(&self) -> CostBreakdown {
        self.current.cost()
    }

    fn gradient(&self) -> &[f64] {
        self.gradient.as_slice()
    }

    fn hess_apply(&self, v: &[f64]) -> Result<Vec<f64>, SensitivityError> {
        let v = Trajectory::from_flat(self.problem.n_nodes(), v.to_vec());
        Ok(self.current.hessian_apply(&v)?.into_flat())
    }

    fn try_point(&mut self, x: Vec<f64>) -> Result<CostBreakdown, SensitivityError> {
        self.trial = None;
        let u = Trajectory::from_flat(self.problem.n_nodes(), x);
        let y = self.problem.forward_solve(&u)?;
        let cost = self.problem.cost(&y, &u);
        self.trial = Some((u, y));
        Ok(cost)
    }

    fn accept_trial(&mut self) -> Result<(), SensitivityError> {
        let (u, y) = self.trial.take().expect("accept_trial follows a successful try_point");
        self.current = Iterate::from_state(self.problem, u, y, self.config)?;
        self.gradient = self.current.gradient();
        Ok(())
    }
}

/// Minimizes the reduced cost from `u0`.
pub fn minimize(
    problem: &ProblemSpec,
    u0: Trajectory,
    cfg: &TrustRegionConfig,
) -> Result<(Trajectory, TrustRegionReport), OptimizerError<SensitivityError>> {
    let mut obj = ReducedObjective::new(problem, u0, SensitivityConfig::default())
        .map_err(|source| OptimizerError::Accept { iteration: 0, source })?;
    let report = trust_region(&mut obj, cfg)?;
    Ok((obj.into_iterate().into_control(), report))
}
