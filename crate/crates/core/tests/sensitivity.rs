mod common;

use common::checks::{duality_errors, gradient_fd_errors, hessian_errors, hexagon, linearized_state_slope};
use common::{random_trajectory, rng, small_problem};
use aniso_ac::sensitivity::{Iterate, SensitivityConfig};

#[test]
fn gradient_matches_central_differences() {
    let errs = gradient_fd_errors(5, 1);
    assert!(errs.iter().all(|e| *e <= 1e-5), "{errs:?}");
}

#[test]
fn duality_identity() {
    let errs = duality_errors(3, 2);
    assert!(errs.iter().all(|e| *e <= 1e-8), "{errs:?}");
}

#[test]
fn hessian_symmetric_and_consistent() {
    let (symmetry, fd) = hessian_errors(3);
    assert!(symmetry <= 1e-8, "{symmetry}");
    assert!(fd <= 1e-3, "relative Hessian mismatch {fd}");
}

#[test]
fn linearized_state_is_first_order_accurate() {
    let slope = linearized_state_slope(5);
    println!("remainder slope {slope:.4}");
    assert!(slope >= 0.9, "{slope}");
}

#[test]
fn linearized_state_is_linear() {
    let p = small_problem(8, 3, hexagon());
    let mut r = rng(4);
    let it = Iterate::new(&p, random_trajectory(&p, &mut r, 10.0), SensitivityConfig::default()).unwrap();
    let v1 = random_trajectory(&p, &mut r, 1.0);
    let v2 = random_trajectory(&p, &mut r, 1.0);
    let mut comb = v1.scaled(2.0);
    comb.axpy(-3.0, &v2);
    let z = it.linearization().linearized_solve(&comb).unwrap();
    let mut expect = it.linearization().linearized_solve(&v1).unwrap().scaled(2.0);
    expect.axpy(-3.0, &it.linearization().linearized_solve(&v2).unwrap());
    let scale = expect.as_slice().iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (a, b) in z.as_slice().iter().zip(expect.as_slice()) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
}
