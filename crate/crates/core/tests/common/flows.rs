//! Uncontrolled-flow measurements shared by the state and acceptance suites.

use aniso_ac::anisotropy::Anisotropy2;
use aniso_ac::fem::FemSpace;
use aniso_ac::scenarios::mean_level_set_radius;
use aniso_ac::state::{defaults, NewtonConfig, ProblemSpec, TimeGrid, Trajectory};

use super::tanh_circle;

/// Largest value of `E(y_j) + eps/(2 tau_j) ||y_j - y_{j-1}||^2 - E(y_{j-1})` along the
/// uncontrolled trajectory.
pub fn worst_dissipation_excess(problem: &ProblemSpec) -> f64 {
    let y = problem.forward_solve(&problem.zero_control()).unwrap();
    let mut prev: &[f64] = &problem.y0;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..problem.n_steps() {
        let cur = y.field(j);
        let diff: Vec<f64> = cur.iter().zip(prev).map(|(a, b)| a - b).collect();
        let jump = problem.eps / (2.0 * problem.grid.tau(j)) * problem.space.l2_norm(&diff).powi(2);
        worst = worst.max(problem.energy(cur) + jump - problem.energy(prev));
        prev = cur;
    }
    worst
}

/// Isotropic uncontrolled circle of radius `r0` and the maximal deviation of its
/// zero level set from `sqrt(r0^2 - 2t)` over `t <= horizon / 2`.
pub fn radius_law_deviation(n_div: usize, r0: f64, horizon: f64, tau: f64) -> (f64, Vec<(f64, f64)>) {
    let eps = defaults::EPS;
    let space = FemSpace::new(n_div).unwrap();
    let y0 = tanh_circle(&space, [0.0, 0.0], r0, eps);
    let grid = TimeGrid::from_horizon(horizon / 2.0, tau, eps).unwrap();
    let target = y0.clone();
    let problem = ProblemSpec::new(eps, defaults::LAMBDA, space, grid, Anisotropy2::isotropic(defaults::DELTA).unwrap(), y0, target)
        .unwrap()
        .with_newton(NewtonConfig::default());
    let y: Trajectory = problem.forward_solve(&problem.zero_control()).unwrap();
    let mesh = problem.space.mesh();
    let times = problem.grid.times();
    let mut series = vec![(0.0, mean_level_set_radius(mesh, &problem.y0, [0.0, 0.0]).unwrap())];
    for j in 0..problem.n_steps() {
        series.push((times[j + 1], mean_level_set_radius(mesh, y.field(j), [0.0, 0.0]).unwrap()));
    }
    let dev = series.iter().map(|(t, r)| (r - (r0 * r0 - 2.0 * t).sqrt()).abs()).fold(0.0, f64::max);
    (dev, series)
}
