//! Parameter sweeps: regularization shift and mesh/time-step granularity.

use std::fmt::Write as _;
use std::time::Instant;

use log::{info, warn};

use super::config::ScenarioConfig;
use super::ScenarioError;
use crate::fem::io::fmt_f64;
use crate::optimizer::minimize;

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub delta: f64,
    pub l2_error: f64,
    pub h1_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaStudy {
    pub reference_delta: f64,
    pub rows: Vec<DeltaRow>,
    /// Least-squares log-log slopes over rows with positive shift and error.
    pub slope_l2: f64,
    pub slope_h1: f64,
}

impl DeltaStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,l2_error,h1_error\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", fmt_f64(r.delta), fmt_f64(r.l2_error), fmt_f64(r.h1_error));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "reference_delta={}\nslope_l2={:.6}\nslope_h1={:.6}\n",
            fmt_f64(self.reference_delta),
            self.slope_l2,
            self.slope_h1
        )
    }
}

/// Least-squares slope of `ln y` over `ln x`; NaN with fewer than two points.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Uncontrolled terminal states for every shift compared with the reference shift.
pub fn delta_study(config: &ScenarioConfig, deltas: &[f64], reference_delta: f64) -> Result<DeltaStudy, ScenarioError> {
    let terminal = |delta: f64| -> Result<(Vec<f64>, crate::state::ProblemSpec), ScenarioError> {
        let problem = config.build_problem_with(config.anisotropy.build_with_delta(delta)?)?;
        let y = problem.forward_solve(&problem.zero_control())?;
        Ok((y.last().to_vec(), problem))
    };
    let (reference, problem) = terminal(reference_delta)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (y, _) = terminal(delta)?;
        let diff: Vec<f64> = y.iter().zip(&reference).map(|(a, b)| a - b).collect();
        let row = DeltaRow { delta, l2_error: problem.space.l2_norm(&diff), h1_error: problem.space.h1_norm(&diff) };
        info!("delta {:.1e}: L2 {:.3e}, H1 {:.3e}", delta, row.l2_error, row.h1_error);
        rows.push(row);
    }
    let slope_l2 = loglog_slope(&rows.iter().map(|r| (r.delta, r.l2_error)).collect::<Vec<_>>());
    let slope_h1 = loglog_slope(&rows.iter().map(|r| (r.delta, r.h1_error)).collect::<Vec<_>>());
    Ok(DeltaStudy { reference_delta, rows, slope_l2, slope_h1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GranularityAxis {
    /// Divisions per axis.
    Mesh,
    /// Time step; the horizon stays fixed.
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub max_cg: usize,
    pub mean_cg: f64,
    pub tr_steps: usize,
    pub time_s: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranularityStudy {
    pub axis: GranularityAxis,
    pub values: Vec<f64>,
    /// One entry per value; failures keep their message.
    pub cells: Vec<Result<CellMetrics, String>>,
}

impl GranularityStudy {
    /// Rows `max_cg`, `mean_cg`, `tr_steps`, `time_s`, one column per value.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric");
        for v in &self.values {
            let _ = write!(s, ",{}", fmt_value(self.axis, *v));
        }
        s.push('\n');
        let rows: [(&str, fn(&CellMetrics) -> String); 5] = [
            ("max_cg", |c| c.max_cg.to_string()),
            ("mean_cg", |c| format!("{:.3}", c.mean_cg)),
            ("tr_steps", |c| c.tr_steps.to_string()),
            ("time_s", |c| format!("{:.3}", c.time_s)),
            ("j", |c| fmt_f64(c.j)),
        ];
        for (name, f) in rows {
            s.push_str(name);
            for cell in &self.cells {
                match cell {
                    Ok(c) => {
                        let _ = write!(s, ",{}", f(c));
                    }
                    Err(_) => s.push_str(",failed"),
                }
            }
            s.push('\n');
        }
        s
    }
}

fn fmt_value(axis: GranularityAxis, v: f64) -> String {
    match axis {
        GranularityAxis::Mesh => format!("{}", v as usize),
        GranularityAxis::Tau => fmt_f64(v),
    }
}

/// Runs the optimizer once per granularity value with everything else fixed.
pub fn granularity_study(config: &ScenarioConfig, axis: GranularityAxis, values: &[f64]) -> GranularityStudy {
    let cells = values
        .iter()
        .map(|&v| {
            let mut cfg = config.clone();
            match axis {
                GranularityAxis::Mesh => cfg.n_div = v.round() as usize,
                GranularityAxis::Tau => {
                    cfg.tau = v;
                    cfg.n_steps = None;
                }
            }
            let start = Instant::now();
            let run = || -> Result<CellMetrics, ScenarioError> {
                let problem = cfg.build_problem()?;
                let (_, report) = minimize(&problem, problem.zero_control(), &cfg.optimizer)?;
                Ok(CellMetrics {
                    max_cg: report.max_cg(),
                    mean_cg: report.mean_cg(),
                    tr_steps: report.tr_steps(),
                    time_s: start.elapsed().as_secs_f64(),
                    j: report.final_cost.j,
                })
            };
            let cell = run().map_err(|e| e.to_string());
            match &cell {
                Ok(c) => info!("{:?} {}: tr_steps {} mean_cg {:.1} max_cg {}", axis, v, c.tr_steps, c.mean_cg, c.max_cg),
                Err(e) => warn!("{:?} {}: {e}", axis, v),
            }
            cell
        })
        .collect();
    GranularityStudy { axis, values: values.to_vec(), cells }
}
