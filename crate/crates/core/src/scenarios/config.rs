//! TOML scenario configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::shapes::{make_field, ShapeSpec};
use super::ScenarioError;
use crate::anisotropy::{Anisotropy2, Mat};
use crate::fem::FemSpace;
use crate::optimizer::TrustRegionConfig;
use crate::state::{defaults, NewtonConfig, ProblemSpec, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnisotropyKind {
    Isotropic,
    L1,
    Hexagon,
    /// Explicit BGN matrices, divided by their number on construction.
    Matrices,
}

fn default_eps_aniso() -> f64 {
    defaults::ANISO_EPS
}

fn default_delta() -> f64 {
    defaults::DELTA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropyConfig {
    pub kind: AnisotropyKind,
    #[serde(default = "default_eps_aniso")]
    pub eps_aniso: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Mat<2>>>,
}

impl AnisotropyConfig {
    pub fn named(kind: AnisotropyKind) -> Self {
        Self { kind, eps_aniso: defaults::ANISO_EPS, delta: defaults::DELTA, matrices: None }
    }

    pub fn build(&self) -> Result<Anisotropy2, ScenarioError> {
        self.build_with_delta(self.delta)
    }

    pub fn build_with_delta(&self, delta: f64) -> Result<Anisotropy2, ScenarioError> {
        let a = match self.kind {
            AnisotropyKind::Isotropic => Anisotropy2::isotropic(delta),
            AnisotropyKind::L1 => Anisotropy2::l1(self.eps_aniso, delta),
            AnisotropyKind::Hexagon => Anisotropy2::hexagon(self.eps_aniso, delta),
            AnisotropyKind::Matrices => {
                let m = self
                    .matrices
                    .clone()
                    .ok_or_else(|| ScenarioError::Config("anisotropy kind \"matrices\" needs a matrices list".into()))?;
                Anisotropy2::from_bgn_matrices(m, delta)
            }
        };
        a.map_err(|e| ScenarioError::Config(format!("anisotropy: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub armijo: f64,
    pub linear_tol: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        let n = NewtonConfig::default();
        Self { tol: n.tol, max_iter: n.max_iter, max_halvings: n.max_halvings, armijo: n.armijo, linear_tol: n.linear_tol }
    }
}

fn default_eps() -> f64 {
    defaults::EPS
}
fn default_lambda() -> f64 {
    defaults::LAMBDA
}
fn default_horizon() -> f64 {
    defaults::DESK_HORIZON
}
fn default_tau() -> f64 {
    defaults::DESK_TAU
}
fn default_n_div() -> usize {
    defaults::DESK_N_DIV
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

/// Everything needed to set up and run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Overrides `horizon / tau` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default = "default_n_div")]
    pub n_div: usize,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Also export snapshots as legacy VTK.
    #[serde(default)]
    pub vtk: bool,
    pub anisotropy: AnisotropyConfig,
    pub initial: ShapeSpec,
    pub target: ShapeSpec,
    #[serde(default)]
    pub newton: NewtonSettings,
    #[serde(default)]
    pub optimizer: TrustRegionConfig,
}

impl ScenarioConfig {
    pub fn new(name: &str, anisotropy: AnisotropyConfig, initial: ShapeSpec, target: ShapeSpec) -> Self {
        Self {
            name: name.to_string(),
            eps: defaults::EPS,
            lambda: defaults::LAMBDA,
            horizon: defaults::DESK_HORIZON,
            tau: defaults::DESK_TAU,
            n_steps: None,
            n_div: defaults::DESK_N_DIV,
            deterministic: true,
            output_dir: default_output(),
            vtk: false,
            anisotropy,
            initial,
            target,
            newton: NewtonSettings::default(),
            optimizer: TrustRegionConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Serializes with every default materialized.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// Full resolution and long horizon (n_div 128, T = 1.625e-2, tau = 1.625e-4).
    pub fn paper_scale(mut self) -> Self {
        self.n_div = defaults::PAPER_N_DIV;
        self.horizon = defaults::PAPER_HORIZON;
        self.tau = defaults::PAPER_TAU;
        self.n_steps = None;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("eps", self.eps)?;
        positive("lambda", self.lambda)?;
        positive("tau", self.tau)?;
        positive("horizon", self.horizon)?;
        if self.n_div < 2 {
            return Err(ScenarioError::Config(format!("n_div must be at least 2, got {}", self.n_div)));
        }
        if self.n_steps == Some(0) {
            return Err(ScenarioError::Config("n_steps must be positive".into()));
        }
        let limit = self.eps * self.eps;
        if self.tau >= limit {
            return Err(ScenarioError::Config(format!("tau = {} violates tau < eps^2 = {limit}", self.tau)));
        }
        self.anisotropy.build()?;
        self.initial.validate(3.0 * self.eps).map_err(|e| ScenarioError::Config(format!("initial shape: {e}")))?;
        self.target.validate(3.0 * self.eps).map_err(|e| ScenarioError::Config(format!("target shape: {e}")))?;
        self.optimizer.validate().map_err(|e| ScenarioError::Config(format!("optimizer: {e}")))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid, ScenarioError> {
        let g = match self.n_steps {
            Some(n) => TimeGrid::uniform(self.tau, n, self.eps),
            None => TimeGrid::from_horizon(self.horizon, self.tau, self.eps),
        };
        g.map_err(|e| ScenarioError::Config(e.to_string()))
    }

    pub fn newton_config(&self) -> NewtonConfig {
        NewtonConfig {
            tol: self.newton.tol,
            max_iter: self.newton.max_iter,
            max_halvings: self.newton.max_halvings,
            armijo: self.newton.armijo,
            linear_tol: self.newton.linear_tol,
            ..NewtonConfig::default()
        }
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, ScenarioError> {
        self.build_problem_with(self.anisotropy.build()?)
    }

    pub fn build_problem_with(&self, aniso: Anisotropy2) -> Result<ProblemSpec, ScenarioError> {
        self.validate()?;
        let space = FemSpace::new(self.n_div).map_err(|e| ScenarioError::Config(e.to_string()))?;
        let y0 = make_field(&self.initial, space.mesh(), self.eps).map_err(|e| ScenarioError::Config(e.to_string()))?;
        let target = make_field(&self.target, space.mesh(), self.eps).map_err(|e| ScenarioError::Config(e.to_string()))?;
        let grid = self.grid()?;
        let p = ProblemSpec::new(self.eps, self.lambda, space, grid, aniso, y0, target)
            .map_err(|e| ScenarioError::Config(e.to_string()))?;
        Ok(p.with_newton(self.newton_config()))
    }
}
