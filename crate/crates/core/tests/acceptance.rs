//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 3 8`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use aniso_ac::anisotropy::Anisotropy2;
use aniso_ac::optimizer::{minimize, TrustRegionReport};
use aniso_ac::scenarios::{delta_study, preset, u_norm_series, AnisotropyConfig, AnisotropyKind, ScenarioConfig, PRESETS};
use aniso_ac::state::defaults;
use common::checks::{duality_errors, gradient_fd_errors, hessian_errors, linearized_state_slope};
use common::flows::{radius_law_deviation, worst_dissipation_excess};
use common::lemma::{hessian_eigen_ranges, hessian_upper_bound, holder_errors, monotone_lipschitz};
use common::loglog_slope;

const DELTA_SLOPE: (f64, f64) = (0.4, 0.6);
const DELTAS: [f64; 6] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

const LEMMA_PAIRS: usize = 10_000;
const LEMMA_SPREAD: f64 = 1.1;
const HOLDER_EXPONENT: (f64, f64) = (0.45, 0.55);
const HOLDER_DELTAS: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];
const ORIGIN_HESSIAN_ULPS: f64 = 4.0;

const GRADIENT_FD: f64 = 1e-5;
const HESSIAN_SYMMETRY: f64 = 1e-8;
const HESSIAN_FD: f64 = 1e-3;
const LINEARIZED_SLOPE: f64 = 0.9;

const DISSIPATION_SLACK: f64 = 10.0;

const RADIUS_N_DIV: usize = 128;
const RADIUS_R0: f64 = 0.5;
const RADIUS_HORIZON: f64 = defaults::PAPER_HORIZON;
const RADIUS_TAU: f64 = defaults::DESK_TAU;
const RADIUS_TOL_EPS: f64 = 3.0;

const GRANULARITY_N: [usize; 3] = [32, 64, 128];
const GRANULARITY_TAU_EXP: [f64; 2] = [-4.0, -4.5];
const GRANULARITY_FACTOR: f64 = 2.0;

const SPLIT_MERGE_RATIO: f64 = 1.2;

const DUALITY_DIRS: usize = 10;
const DUALITY_TOL: f64 = 1e-8;

type Check = Result<String, String>;

fn verdict(pass: bool, detail: String) -> Check {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fold_min(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn fold_max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn delta_convergence() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in [AnisotropyKind::L1, AnisotropyKind::Hexagon] {
        let mut cfg = preset("growing-circle").unwrap();
        cfg.anisotropy = AnisotropyConfig::named(kind);
        let study = delta_study(&cfg, &DELTAS, 0.0).map_err(|e| e.to_string())?;
        let ok = (DELTA_SLOPE.0..=DELTA_SLOPE.1).contains(&study.slope_l2);
        pass &= ok;
        parts.push(format!("{kind:?} L2 slope {:.3} (H1 {:.3})", study.slope_l2, study.slope_h1));
    }
    verdict(pass, parts.join(", "))
}

fn lemma_suite() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    let named = [
        ("iso", Anisotropy2::isotropic(0.0).unwrap()),
        ("l1", Anisotropy2::l1(0.01, 0.0).unwrap()),
        ("hex", Anisotropy2::hexagon(0.01, 0.0).unwrap()),
    ];
    for (name, a) in &named {
        let rows = monotone_lipschitz(a, LEMMA_PAIRS, 7);
        let (c0_lo, c0_hi) = (fold_min(rows.iter().map(|r| r.1)), fold_max(rows.iter().map(|r| r.1)));
        let (c1_lo, c1_hi) = (fold_min(rows.iter().map(|r| r.2)), fold_max(rows.iter().map(|r| r.2)));
        let eig = hessian_eigen_ranges(a, LEMMA_PAIRS, 5);
        let (e_lo, e_lo_hi) = (fold_min(eig.iter().map(|r| r.1)), fold_max(eig.iter().map(|r| r.1)));
        let e_hi = fold_max(eig.iter().map(|r| r.2));
        let bound = hessian_upper_bound(a);

        let l = a.len() as f64;
        let mut origin_ok = true;
        for delta in [1e-10, 1e-7, 1e-2] {
            let h = a.with_delta(delta).unwrap().a_hess(&[0.0, 0.0]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let expected: f64 = a.matrices().iter().map(|m| l * m[i][j]).sum();
                    let tol = ORIGIN_HESSIAN_ULPS * f64::EPSILON * expected.abs().max(1.0);
                    origin_ok &= (h[i][j] - expected).abs() <= tol;
                }
            }
        }
        let ok = c0_lo > 0.0
            && c0_hi / c0_lo < LEMMA_SPREAD
            && c1_hi / c1_lo < LEMMA_SPREAD
            && e_lo > 0.0
            && e_lo_hi / e_lo < LEMMA_SPREAD
            && e_hi <= bound
            && origin_ok;
        pass &= ok;
        parts.push(format!("{name}: c0 {c0_lo:.3e} C {c1_hi:.3e} eig [{e_lo:.3e}, {e_hi:.3e}]"));
        if *name != "iso" {
            let err = holder_errors(a, &HOLDER_DELTAS, 20_000, 11);
            let slope = loglog_slope(&HOLDER_DELTAS, &err);
            pass &= (HOLDER_EXPONENT.0..=HOLDER_EXPONENT.1).contains(&slope);
            parts.push(format!("{name} Hoelder exponent {slope:.3}"));
        }
    }
    verdict(pass, parts.join("; "))
}

fn derivative_suite() -> Check {
    let g = fold_max(gradient_fd_errors(5, 1));
    let (sym, hfd) = hessian_errors(3);
    let slope = linearized_state_slope(5);
    let pass = g <= GRADIENT_FD && sym <= HESSIAN_SYMMETRY && hfd <= HESSIAN_FD && slope >= LINEARIZED_SLOPE;
    verdict(pass, format!("gradient {g:.2e}, Hessian symmetry {sym:.2e}, Hessian FD {hfd:.2e}, linearized slope {slope:.3}"))
}

fn energy_dissipation() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in PRESETS {
        let p = preset(name).unwrap().build_problem().map_err(|e| e.to_string())?;
        let excess = worst_dissipation_excess(&p);
        pass &= excess <= DISSIPATION_SLACK * p.newton.tol;
        parts.push(format!("{name} {excess:.2e}"));
    }
    verdict(pass, format!("largest per-step excess: {}", parts.join(", ")))
}

fn radius_law() -> Check {
    let (dev, series) = radius_law_deviation(RADIUS_N_DIV, RADIUS_R0, RADIUS_HORIZON, RADIUS_TAU);
    let tol = RADIUS_TOL_EPS * defaults::EPS;
    let last = series.last().unwrap();
    verdict(dev <= tol, format!("max deviation {dev:.3e} (limit {tol:.3e}), r({:.3e}) = {:.4}", last.0, last.1))
}

fn run_report(cfg: &ScenarioConfig) -> Result<TrustRegionReport, String> {
    let p = cfg.build_problem().map_err(|e| e.to_string())?;
    minimize(&p, p.zero_control(), &cfg.optimizer).map(|r| r.1).map_err(|e| e.to_string())
}

fn granularity() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["growing-circle", "keep-square"] {
        let base = preset(name).unwrap();
        let mut cells = Vec::new();
        for n in GRANULARITY_N {
            let mut cfg = base.clone();
            cfg.n_div = n;
            cells.push((format!("N{n}"), run_report(&cfg)?));
        }
        for e in GRANULARITY_TAU_EXP.iter().skip(1) {
            let mut cfg = base.clone();
            cfg.tau = 10f64.powf(*e);
            cells.push((format!("tau1e{e}"), run_report(&cfg)?));
        }
        let steps: Vec<f64> = cells.iter().map(|c| c.1.tr_steps() as f64).collect();
        let cg: Vec<f64> = cells.iter().map(|c| c.1.mean_cg()).collect();
        let spread = |v: &[f64]| fold_max(v.iter().copied()) / fold_min(v.iter().copied());
        let ok = fold_min(steps.iter().copied()) > 0.0
            && spread(&steps) < GRANULARITY_FACTOR
            && fold_min(cg.iter().copied()) > 0.0
            && spread(&cg) < GRANULARITY_FACTOR;
        pass &= ok;
        let table: Vec<String> =
            cells.iter().map(|(k, r)| format!("{k}: {} steps, mean CG {:.1}", r.tr_steps(), r.mean_cg())).collect();
        parts.push(format!("{name} [{}]", table.join(", ")));
    }
    verdict(pass, parts.join("; "))
}

fn control_structure() -> Check {
    let cfg = preset("circle-to-star4").unwrap();
    let p = cfg.build_problem().map_err(|e| e.to_string())?;
    let (u, _) = minimize(&p, p.zero_control(), &cfg.optimizer).map_err(|e| e.to_string())?;
    let series = u_norm_series(&p, &u);
    let t_end = p.grid.horizon();
    let mean = |lo: f64, hi: f64| {
        let v: Vec<f64> = series.iter().filter(|(t, _)| *t >= lo - 1e-12 && *t <= hi + 1e-12).map(|s| s.1).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (first, last) = (mean(0.0, 0.5 * t_end), mean(0.75 * t_end, t_end));

    let j2 = |name: &str| -> Result<f64, String> {
        let cfg = preset(name).unwrap();
        let p = cfg.build_problem().map_err(|e| e.to_string())?;
        let (u, _) = minimize(&p, p.zero_control(), &cfg.optimizer).map_err(|e| e.to_string())?;
        Ok(p.cost(&p.forward_solve(&u).map_err(|e| e.to_string())?, &u).j2)
    };
    let (split, merge) = (j2("split-hexagon")?, j2("merge-hexagon")?);
    let ratio = split / merge;
    verdict(
        first < last && ratio > SPLIT_MERGE_RATIO,
        format!(
            "star4 mean |u| first half {first:.3e}, last quarter {last:.3e}; j2 split {split:.4e} / merge {merge:.4e} = {ratio:.3}"
        ),
    )
}

fn duality() -> Check {
    let errs = duality_errors(DUALITY_DIRS, 2);
    let worst = fold_max(errs.iter().copied());
    verdict(worst <= DUALITY_TOL, format!("worst relative gap {worst:.2e} over {DUALITY_DIRS} directions"))
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Check); 8] = [
        (1, "delta convergence rate", delta_convergence),
        (2, "anisotropy property suite", lemma_suite),
        (3, "derivative consistency", derivative_suite),
        (4, "energy dissipation", energy_dissipation),
        (5, "sharp-interface radius", radius_law),
        (6, "mesh and step independence", granularity),
        (7, "control structure", control_structure),
        (8, "duality identity", duality),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id} ({name}): PASS [{secs:.1} s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL [{secs:.1} s] {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion checks failed");
        ExitCode::FAILURE
    }
}
