//! Sampled constants of the regularized anisotropy.

use aniso_ac::anisotropy::Anisotropy2;
use rand::Rng;

use super::rng;

pub const DELTAS: [f64; 10] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Point with log-uniform radius in `[1e-6, 1e2]` and uniform angle.
pub fn sample_point(r: &mut impl Rng) -> [f64; 2] {
    let rad = 10f64.powf(r.gen_range(-6.0..2.0));
    let phi = r.gen_range(0.0..std::f64::consts::TAU);
    [rad * phi.cos(), rad * phi.sin()]
}

/// Per-shift minimum monotonicity quotient and maximum Lipschitz quotient
/// over `pairs` random pairs (the same pairs for every shift).
pub fn monotone_lipschitz(base: &Anisotropy2, pairs: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut r = rng(seed);
    let samples: Vec<([f64; 2], [f64; 2])> = (0..pairs)
        .map(|k| loop {
            let s = 10f64.powf(r.gen_range(-4.0..2.0));
            let p = [s * r.gen_range(-1.0..1.0), s * r.gen_range(-1.0..1.0)];
            // Every other pair is local, so the infimum of the Hessian is resolved.
            let q = if k % 2 == 0 {
                [s * r.gen_range(-1.0..1.0), s * r.gen_range(-1.0..1.0)]
            } else {
                let phi = r.gen_range(0.0..std::f64::consts::TAU);
                let h = 1e-3 * norm(p);
                [p[0] + h * phi.cos(), p[1] + h * phi.sin()]
            };
            if norm(sub(p, q)) > 1e-8 {
                break (p, q);
            }
        })
        .collect();
    DELTAS
        .iter()
        .map(|&delta| {
            let a = base.with_delta(delta).unwrap();
            let (mut c0, mut c1) = (f64::INFINITY, 0.0_f64);
            for &(p, q) in &samples {
                let d = sub(p, q);
                let g = sub(a.a_grad(&p), a.a_grad(&q));
                let dd = d[0] * d[0] + d[1] * d[1];
                c0 = c0.min((g[0] * d[0] + g[1] * d[1]) / dd);
                c1 = c1.max(norm(g) / dd.sqrt());
            }
            (delta, c0, c1)
        })
        .collect()
}

/// `sup_p |A'_delta(p) - A'(p)|` over `n` sampled points, for each `delta`.
pub fn holder_errors(base: &Anisotropy2, deltas: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| sample_point(&mut r)).collect();
    let a0 = base.with_delta(0.0).unwrap();
    deltas
        .iter()
        .map(|&delta| {
            let a = base.with_delta(delta).unwrap();
            pts.iter().map(|p| norm(sub(a.a_grad(p), a0.a_grad(p)))).fold(0.0, f64::max)
        })
        .collect()
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym_eigs(m: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let disc = ((m[0][0] - m[1][1]).powi(2) / 4.0 + m[0][1] * m[1][0]).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}

/// Per-shift extreme Hessian eigenvalues over `n` sampled points plus `p = 0`.
pub fn hessian_eigen_ranges(base: &Anisotropy2, n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut r = rng(seed);
    let mut pts: Vec<[f64; 2]> = (0..n).map(|_| sample_point(&mut r)).collect();
    pts.push([0.0, 0.0]);
    DELTAS[1..]
        .iter()
        .map(|&delta| {
            let a = base.with_delta(delta).unwrap();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
            for p in &pts {
                let h = a.a_hess(p).unwrap();
                assert!((h[0][1] - h[1][0]).abs() <= 1e-12 * (h[0][0].abs() + h[1][1].abs()));
                let (e0, e1) = sym_eigs(h);
                lo = lo.min(e0);
                hi = hi.max(e1);
            }
            (delta, lo, hi)
        })
        .collect()
}

/// A priori upper bound on the Hessian eigenvalues:
/// `|gamma'|^2 + sum_{l,m} max(1, sqrt(lmax_m / lmin_l)) lmax_l`.
pub fn hessian_upper_bound(base: &Anisotropy2) -> f64 {
    let eig: Vec<(f64, f64)> = base.matrices().iter().map(|m| sym_eigs(*m)).collect();
    let grad: f64 = eig.iter().map(|e| e.1.sqrt()).sum();
    let mut curv = 0.0;
    for l in &eig {
        for m in &eig {
            curv += (m.1 / l.0).sqrt().max(1.0) * l.1;
        }
    }
    grad * grad + curv
}
