#![allow(dead_code)]

pub mod checks;
pub mod flows;
pub mod lemma;

use aniso_ac::anisotropy::Anisotropy2;
use aniso_ac::fem::{FemSpace, NodalField};
use aniso_ac::state::{defaults, NewtonConfig, ProblemSpec, TimeGrid, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tanh_circle(space: &FemSpace, center: [f64; 2], r: f64, eps: f64) -> NodalField {
    let s = std::f64::consts::SQRT_2 * eps;
    NodalField::from(space.mesh().interpolate(|x| {
        let d = r - ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
        (d / s).tanh()
    }))
}

/// Small instance with a nontrivial state: circle initial data, shifted circle target.
pub fn small_problem(n_div: usize, n_steps: usize, aniso: Anisotropy2) -> ProblemSpec {
    let eps = defaults::EPS;
    let space = FemSpace::new(n_div).unwrap();
    let y0 = tanh_circle(&space, [0.0, 0.0], 0.5, eps);
    let target = tanh_circle(&space, [0.1, 0.0], 0.55, eps);
    let grid = TimeGrid::uniform(1e-4, n_steps, eps).unwrap();
    ProblemSpec::new(eps, defaults::LAMBDA, space, grid, aniso, y0, target)
        .unwrap()
        .with_newton(NewtonConfig { tol: 1e-14, linear_tol: 1e-13, ..NewtonConfig::default() })
}

pub fn random_trajectory(p: &ProblemSpec, rng: &mut ChaCha8Rng, scale: f64) -> Trajectory {
    let data = (0..p.n_steps() * p.n_nodes()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    Trajectory::from_flat(p.n_nodes(), data)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
