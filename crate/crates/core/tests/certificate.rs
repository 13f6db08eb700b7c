mod common;

use common::{generic_pair, generic_q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slgate_core::certificate::*;
use slgate_core::counting::SubSpectrum;
use slgate_core::potentials::SampledFunction;
use slgate_core::sturm::{compute_spectrum, OperatorSpec, RobinBC};

fn seeded_z(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0.1..=60.0)).collect()
}

#[test]
fn lagrange_identity_over_seeded_probes() {
    for seed in [7, 2024] {
        let z = seeded_z(seed, 50);
        let rep = lagrange_sweep(&generic_pair(4001), &z).unwrap();
        assert!(rep.max_deviation <= 1e-7 * rep.scale, "{}", rep.max_deviation);
    }
}

#[test]
fn lagrange_deviation_is_second_order() {
    // the potential grid stays fixed while the trace grid doubles
    let z = seeded_z(7, 50);
    let pp = generic_pair(20001);
    let coarse = lagrange_sweep(&pp.clone().with_trace_n(20001).unwrap(), &z).unwrap();
    let fine = lagrange_sweep(&pp.with_trace_n(40001).unwrap(), &z).unwrap();
    let ratio = coarse.max_deviation / fine.max_deviation;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn identity_links_f_to_the_wronskian() {
    let pp = generic_pair(4001);
    let rep = certify(&pp, &seeded_z(11, 12)).unwrap();
    assert!(rep.tail_matches);
    assert!(rep.max_identity_gap <= 1e-6 * rep.scale, "{}", rep.max_identity_gap);
    assert!(rep.max_middle_gap <= 1e-6 * rep.scale, "{}", rep.max_middle_gap);
}

#[test]
fn identical_pair_vanishes_at_its_eigenvalues() {
    let q = SampledFunction::from_fn(0.0, 1.0, 4001, generic_q).unwrap();
    let pp = PairProblem::new(q.clone(), 1.0, q.clone(), 1.0, 2.0, 0.5).unwrap();
    let spec = OperatorSpec::new(q.clone(), RobinBC::new(1.0, 2.0).unwrap()).unwrap();
    let sigma = compute_spectrum(&spec, 20).unwrap();
    let l1: f64 = q.map(f64::abs).unwrap().integral();
    for &l in &sigma.eigenvalues {
        assert!(f_eval_lambda(&pp, l).unwrap().abs() <= 1e-6 * (1.0 + l1));
    }
    let s = SubSpectrum::new(sigma.clone(), (0..=20).collect()).unwrap();
    let common = vanish_on_common(&pp, &s, &sigma).unwrap();
    assert_eq!(common.len(), 21);
    assert!(common.iter().all(|c| c.deviation <= 1e-6));
}

#[test]
fn swapping_the_pair_negates_f() {
    let pp = generic_pair(2001);
    let sw = pp.swapped();
    assert_eq!(pp.kappa(), -sw.kappa());
    for z in [0.5, 3.0, 17.0] {
        let a = f_eval(&pp, z).unwrap();
        let b = f_eval(&sw, z).unwrap();
        assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn csv_lists_every_probe() {
    let pp = generic_pair(2001);
    let z = seeded_z(3, 5);
    let csv = certify(&pp, &z).unwrap().to_csv();
    assert_eq!(csv.lines().count(), 6);
}
