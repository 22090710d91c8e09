//! Wulff shapes `{q : sup_p p.q / gamma(p) <= 1}` of the unregularized density.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::anisotropy::Anisotropy2;
use crate::fem::io::fmt_f64;

/// Golden-section refinements after the grid search.
const REFINE_STEPS: usize = 60;

fn ratio(gamma0: &Anisotropy2, q: [f64; 2], phi: f64) -> f64 {
    let p = [phi.cos(), phi.sin()];
    (p[0] * q[0] + p[1] * q[1]) / gamma0.gamma(&p)
}

/// Dual norm `gamma*(q)`, maximized over `n_grid` directions and refined locally.
pub fn dual_norm(gamma0: &Anisotropy2, q: [f64; 2], n_grid: usize) -> f64 {
    let h = 2.0 * PI / n_grid as f64;
    let (mut best_k, mut best) = (0, f64::NEG_INFINITY);
    for k in 0..n_grid {
        let v = ratio(gamma0, q, k as f64 * h);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_k as f64 - 1.0) * h, (best_k as f64 + 1.0) * h);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (ratio(gamma0, q, c), ratio(gamma0, q, d));
    for _ in 0..REFINE_STEPS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = ratio(gamma0, q, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = ratio(gamma0, q, d);
        }
    }
    best.max(fc).max(fd)
}

/// Boundary points `e_theta / gamma*(e_theta)` for `n_angles` equally spaced `theta`.
pub fn wulff_shape(aniso: &Anisotropy2, n_angles: usize) -> Vec<[f64; 2]> {
    let gamma0 = aniso.with_delta(0.0).expect("zero shift is valid");
    let n_grid = (16 * n_angles).max(8192);
    (0..n_angles)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n_angles as f64;
            let e = [theta.cos(), theta.sin()];
            let s = dual_norm(&gamma0, e, n_grid);
            [e[0] / s, e[1] / s]
        })
        .collect()
}

/// `theta,x,y` polyline.
pub fn wulff_csv(points: &[[f64; 2]]) -> String {
    let mut s = String::from("theta,x,y\n");
    let n = points.len();
    for (k, p) in points.iter().enumerate() {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let _ = writeln!(s, "{},{},{}", fmt_f64(theta), fmt_f64(p[0]), fmt_f64(p[1]));
    }
    s
}

/// True if consecutive edges of the closed polyline never turn clockwise
/// beyond `tol` (relative to the edge lengths).
pub fn is_convex(points: &[[f64; 2]], tol: f64) -> bool {
    let n = points.len();
    (0..n).all(|i| {
        let (a, b, c) = (points[i], points[(i + 1) % n], points[(i + 2) % n]);
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - b[0], c[1] - b[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        cross >= -tol * (u[0].hypot(u[1]) * v[0].hypot(v[1]))
    })
}
