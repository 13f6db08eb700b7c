mod common;

use common::{truth_problem, truth_targets, TRUTH_A, TRUTH_COEFFS, TRUTH_H};
use slgate_core::inverse::*;

#[test]
fn recovers_cosine_truth_from_ten_eigenvalues() {
    let problem = truth_problem(truth_targets(10));
    let r = reconstruct(&problem).unwrap();
    assert!(r.converged);
    assert!(relative_l2_error(&r.coefficients, &TRUTH_COEFFS, TRUTH_A) <= 1e-3, "{:?}", r.coefficients);
    assert!((r.h - TRUTH_H).abs() <= 1e-3);
    assert!(r.misfit_history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(r.history_csv().lines().count(), r.misfit_history.len() + 1);
}

#[test]
fn three_targets_leave_the_hessian_nearly_singular() {
    let targets = truth_targets(10);
    let full = hessian_spectrum(&truth_problem(targets.clone()), &TRUTH_COEFFS, TRUTH_H).unwrap();
    let few = hessian_spectrum(&truth_problem(targets[..3].to_vec()), &TRUTH_COEFFS, TRUTH_H).unwrap();
    let rel = |ev: &[f64]| ev[0].abs() / ev[ev.len() - 1];
    assert!(rel(&full) >= 1e3 * rel(&few), "{full:?} vs {few:?}");
}

#[test]
fn forward_map_reproduces_the_data() {
    let targets = truth_targets(6);
    let problem = truth_problem(targets.clone());
    let lam = forward_map(&TRUTH_COEFFS, TRUTH_H, &problem).unwrap();
    for ((_, t), l) in targets.iter().zip(&lam) {
        assert!((t - l).abs() <= 1e-5 * t.abs().max(1.0));
    }
}
