//! Experiment setup, runners and file output.

pub mod config;
pub mod shapes;
pub mod studies;
pub mod wulff;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{AnisotropyConfig, AnisotropyKind, ScenarioConfig};
pub use shapes::{level_set_points, make_field, mean_level_set_radius, ShapeError, ShapeSpec};
pub use studies::{delta_study, granularity_study, DeltaStudy, GranularityAxis, GranularityStudy};
pub use wulff::{wulff_csv, wulff_shape};

use crate::fem::io::{fmt_f64, format_vtk, write_atomic, write_snapshot};
use crate::optimizer::{minimize, OptimizerError, TrustRegionReport};
use crate::sensitivity::SensitivityError;
use crate::state::{CostBreakdown, ProblemSpec, StateError, Trajectory};

/// Number of snapshot frames written per run.
pub const FRAMES: usize = 8;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("state solver failed: {0}")]
    State(#[from] StateError),
    #[error("optimizer failed: {0}")]
    Optimizer(#[from] OptimizerError<SensitivityError>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ScenarioError {
    pub fn is_config(&self) -> bool {
        matches!(self, ScenarioError::Config(_))
    }
}

/// The built-in experiments.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    use AnisotropyKind::*;
    let circle = |c: [f64; 2], r: f64| ShapeSpec::circle(c, r);
    let hexagon = |c: [f64; 2], r: f64| ShapeSpec::Hexagon { center: c, radius: r, rotation: 0.0 };
    let two_hexagons = ShapeSpec::Union { shapes: vec![hexagon([0.0, 0.42], 0.35), hexagon([0.0, -0.42], 0.35)] };
    let star = |petals: u32| ShapeSpec::Star { center: [0.0, 0.0], petals, r_inner: 0.35, r_outer: 0.65, rotation: 0.0 };
    let aniso = AnisotropyConfig::named;
    let cfg = match name {
        "growing-circle" => ScenarioConfig::new(name, aniso(Isotropic), circle([0.0, 0.0], 0.5), circle([0.0, 0.0], 0.55)),
        "keep-square" => {
            let sq = ShapeSpec::Square { center: [0.0, 0.0], half_width: 0.5 };
            ScenarioConfig::new(name, aniso(L1), sq.clone(), sq)
        }
        "circle-to-star4" => ScenarioConfig::new(name, aniso(L1), circle([0.0, 0.0], 0.5), star(4)),
        "circle-to-star6" => ScenarioConfig::new(name, aniso(Hexagon), circle([0.0, 0.0], 0.5), star(6)),
        "split-hexagon" => ScenarioConfig::new(name, aniso(Hexagon), hexagon([0.0, 0.0], 0.5), two_hexagons),
        "merge-hexagon" => ScenarioConfig::new(name, aniso(Hexagon), two_hexagons, hexagon([0.0, 0.0], 0.5)),
        "merge-circles" => {
            let two = ShapeSpec::Union { shapes: vec![circle([-0.4, 0.0], 0.3), circle([0.4, 0.0], 0.3)] };
            ScenarioConfig::new(name, aniso(Isotropic), two, circle([0.0, 0.0], 0.42))
        }
        "trivial" => ScenarioConfig::new(name, aniso(Isotropic), ShapeSpec::FullDomain, ShapeSpec::FullDomain),
        _ => return None,
    };
    Some(cfg)
}

pub const PRESETS: [&str; 8] = [
    "growing-circle",
    "keep-square",
    "circle-to-star4",
    "circle-to-star6",
    "split-hexagon",
    "merge-hexagon",
    "merge-circles",
    "trivial",
];

/// Result of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: TrustRegionReport,
    pub control: Trajectory,
    pub state: Trajectory,
    pub cost: CostBreakdown,
    /// `(t_j, ||u_j||)` per interval.
    pub u_norms: Vec<(f64, f64)>,
    pub artifacts: Vec<PathBuf>,
}

/// Interval index (zero based) whose closure contains `t`.
fn interval_at(problem: &ProblemSpec, t: f64) -> usize {
    let times = problem.grid.times();
    let tol = 1e-12 * problem.grid.horizon();
    (1..times.len()).find(|&j| times[j] >= t - tol).map_or(times.len() - 2, |j| j - 1)
}

/// Frame times `k T / (FRAMES - 1)`.
pub fn frame_times(horizon: f64) -> Vec<f64> {
    (0..FRAMES).map(|k| horizon * k as f64 / (FRAMES - 1) as f64).collect()
}

pub fn u_norm_series(problem: &ProblemSpec, u: &Trajectory) -> Vec<(f64, f64)> {
    u.fields().enumerate().map(|(j, f)| (problem.grid.times()[j + 1], problem.space.l2_norm(f))).collect()
}

pub fn u_norm_csv(series: &[(f64, f64)]) -> String {
    let mut s = String::from("step,t,u_norm\n");
    for (j, (t, n)) in series.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", j + 1, fmt_f64(*t), fmt_f64(*n));
    }
    s
}

pub fn cost_csv(c: &CostBreakdown) -> String {
    format!("j,j1,j2\n{},{},{}\n", fmt_f64(c.j), fmt_f64(c.j1), fmt_f64(c.j2))
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    fn text(&mut self, name: &str, contents: &str) -> io::Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn snapshot(&mut self, name: &str, n_div: usize, t: f64, values: &[f64]) -> io::Result<()> {
        let path = self.dir.join(name);
        write_snapshot(&path, n_div, t, values)?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn write_report(w: &mut Writer, name: &str, report: &TrustRegionReport) -> io::Result<()> {
    w.text("report.csv", &report.to_csv())?;
    w.text("summary.txt", &format!("scenario={name}\n{}", report.summary()))
}

/// Optimizes the scenario from `u = 0` and writes all artifacts into `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioOutcome, ScenarioError> {
    let problem = config.build_problem()?;
    let mut w = Writer::new(out_dir)?;
    w.text("config.toml", &config.to_toml())?;
    let (control, report) = match minimize(&problem, problem.zero_control(), &config.optimizer) {
        Ok(r) => r,
        Err(e) => {
            if let OptimizerError::TrialFailures { report, .. } = &e {
                write_report(&mut w, &config.name, report)?;
            }
            return Err(e.into());
        }
    };
    write_report(&mut w, &config.name, &report)?;

    let (state, diagnostics) = problem.forward_solve_with_diagnostics(&control)?;
    let cost = problem.cost(&state, &control);
    w.text("cost.csv", &cost_csv(&cost))?;
    let mut forward = String::from("step,t,newton_iters,residual,energy\n");
    for d in &diagnostics {
        let _ = writeln!(forward, "{},{},{},{},{}", d.step, fmt_f64(d.t), d.newton_iters, fmt_f64(d.residual), fmt_f64(d.energy));
    }
    w.text("forward.csv", &forward)?;
    let u_norms = u_norm_series(&problem, &control);
    w.text("u_norm.csv", &u_norm_csv(&u_norms))?;

    let n_div = config.n_div;
    for (k, t) in frame_times(problem.grid.horizon()).into_iter().enumerate() {
        let j = interval_at(&problem, t);
        let y: &[f64] = if k == 0 { &problem.y0 } else { state.field(j) };
        w.snapshot(&format!("state_{k}.txt"), n_div, t, y)?;
        w.snapshot(&format!("control_{k}.txt"), n_div, t, control.field(j))?;
        if config.vtk {
            w.text(&format!("state_{k}.vtk"), &format_vtk(n_div, "state", y))?;
            w.text(&format!("control_{k}.vtk"), &format_vtk(n_div, "control", control.field(j)))?;
        }
    }
    Ok(ScenarioOutcome { report, control, state, cost, u_norms, artifacts: w.artifacts })
}
