//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are printed unbuffered.
//! A criterion listed in `DOCUMENTED` may print FAIL without failing the
//! process; any other failure exits with status 1.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slgate_core::certificate::{f_eval_lambda, lagrange_sweep, PairProblem};
use slgate_core::counting::*;
use slgate_core::inverse::*;
use slgate_core::kernelops::*;
use slgate_core::potentials::{materialize, PotentialSpec, SampledFunction};
use slgate_core::sturm::*;

/// Criteria whose stated form is known not to hold; see the README.
const DOCUMENTED: &[&str] = &["10"];

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn operator(q: SampledFunction, h: f64, big_h: f64) -> OperatorSpec {
    OperatorSpec::new(q, RobinBC::new(h, big_h).unwrap()).unwrap()
}

fn zero(grid_n: usize) -> SampledFunction {
    SampledFunction::new(0.0, 1.0, vec![0.0; grid_n]).unwrap()
}

fn generic(grid_n: usize) -> SampledFunction {
    SampledFunction::from_fn(0.0, 1.0, grid_n, generic_q).unwrap()
}

fn c01_neumann() -> Outcome {
    let start = Instant::now();
    let sp = compute_spectrum(&operator(zero(2001), 0.0, 0.0), 30).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = sp
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let e = (j * j) as f64 * PI * PI;
            (l - e).abs() / e.max(1.0)
        })
        .fold(0.0, f64::max);
    Outcome {
        id: "1",
        name: "Neumann exactness",
        pass: worst <= 1e-8 && elapsed < 10.0,
        detail: format!("max rel err {worst:.2e}, {elapsed:.2}s"),
    }
}

fn c02_shift() -> Outcome {
    let mut worst: f64 = 0.0;
    for grid_n in [2001, 4001] {
        let spec = operator(generic(grid_n), 1.0, 2.0);
        let base = compute_spectrum(&spec, 20).unwrap();
        for c in [-3.0, 2.5] {
            let sh = compute_spectrum(&spec.shifted(c).unwrap(), 20).unwrap();
            for (a, b) in base.eigenvalues.iter().zip(&sh.eigenvalues) {
                worst = worst.max((b - a - c).abs());
            }
        }
    }
    Outcome {
        id: "2",
        name: "Shift covariance",
        pass: worst <= 1e-7,
        detail: format!("max |dλ - c| {worst:.2e} (grids 2001, 4001)"),
    }
}

fn c03_asymptotics() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for grid_n in [2001, 4001] {
        let sine = PotentialSpec::Sine {
            amplitude: 2.0,
            frequency: 3.0,
            phase: 0.0,
        };
        let q = materialize(&sine, (0.0, 1.0), grid_n).unwrap();
        let sp = compute_spectrum(&operator(q, 1.0, 2.0), 40).unwrap();
        let r = asymptotic_residuals(&sp);
        let tail = r[20..=40].iter().map(|v| v.abs()).fold(0.0, f64::max);
        pass &= r[40].abs() < r[10].abs() && tail <= 0.05;
        detail.push(format!("{grid_n}: |r10| {:.2e} |r40| {:.2e} max|r20..40| {tail:.2e}", r[10].abs(), r[40].abs()));
    }
    Outcome {
        id: "3",
        name: "Asymptotic expansion",
        pass,
        detail: detail.join("; "),
    }
}

fn c04_oracle() -> Outcome {
    let ks: Vec<usize> = (0..=10).collect();
    let oracle = fd_richardson(generic_q, 1.0, 2.0, 2000, &ks);
    let mut worst: f64 = 0.0;
    for grid_n in [2001, 4001] {
        let sp = compute_spectrum(&operator(generic(grid_n), 1.0, 2.0), 10).unwrap();
        for (l, o) in sp.eigenvalues.iter().zip(&oracle) {
            worst = worst.max((l - o).abs() / o.abs().max(1.0));
        }
    }
    Outcome {
        id: "4",
        name: "Finite-difference oracle",
        pass: worst <= 1e-6,
        detail: format!("max rel diff {worst:.2e} over λ_0..λ_10 (grids 2001, 4001)"),
    }
}

fn c05_lagrange() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51a7e);
    let z: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..=60.0)).collect();
    let rep = lagrange_sweep(&generic_pair(4001), &z).unwrap();
    let pp = generic_pair(20001);
    let coarse = lagrange_sweep(&pp.clone().with_trace_n(20001).unwrap(), &z).unwrap();
    let fine = lagrange_sweep(&pp.with_trace_n(40001).unwrap(), &z).unwrap();
    let ratio = coarse.max_deviation / fine.max_deviation;
    Outcome {
        id: "5",
        name: "Lagrange identity",
        pass: rep.max_deviation <= 1e-7 * rep.scale && (3.5..=4.5).contains(&ratio),
        detail: format!(
            "max dev {:.2e} <= {:.2e}; 20001 -> 40001 shrink x{ratio:.2}",
            rep.max_deviation,
            1e-7 * rep.scale
        ),
    }
}

fn c06_degenerate() -> Outcome {
    let q = generic(4001);
    let l1 = q.map(f64::abs).unwrap().integral();
    let pp = PairProblem::new(q.clone(), 1.0, q.clone(), 1.0, 2.0, 0.5).unwrap();
    let sp = compute_spectrum(&operator(q, 1.0, 2.0), 20).unwrap();
    let worst = sp
        .eigenvalues
        .iter()
        .map(|&l| f_eval_lambda(&pp, l).unwrap().abs())
        .fold(0.0, f64::max);
    Outcome {
        id: "6",
        name: "Certificate vanishing (identical pair)",
        pass: worst <= 1e-6 * (1.0 + l1),
        detail: format!("max |f| {worst:.2e}"),
    }
}

struct Generic {
    pp: PairProblem,
    k: KernelGrid,
}

fn generic_kernel() -> Generic {
    let pp = generic_pair(4001);
    let k = build_s(&pp, &KernelOptions::default()).unwrap();
    Generic { pp, k }
}

fn c07_support(g: &Generic) -> Outcome {
    let v = g.k.support_violation(SUPPORT_OFFSET_NODES);
    Outcome {
        id: "7",
        name: "Kernel support",
        pass: v <= 1e-3,
        detail: format!("max outside cone / max|s| = {v:.2e}, tail {:.2e}", g.k.tail_estimate),
    }
}

fn c08_box() -> Outcome {
    let z = zero(101);
    let pp = PairProblem::new(z.clone(), 1.0, z, 0.0, 0.0, 0.5).unwrap();
    let k = build_s(&pp, &KernelOptions::default()).unwrap();
    let n = k.n();
    let m = (n - 1) / 2;
    let mut expected = vec![0.0; n * n];
    let mut mask = vec![false; n * n];
    for i in 0..n {
        for c in 0..n {
            let (di, dc) = (i.abs_diff(m), c.abs_diff(m));
            expected[i * n + c] = if di < dc { 0.25 } else { 0.0 };
            mask[i * n + c] = di.abs_diff(dc) > 1;
        }
    }
    let err = masked_rel_l2(&k.values, &expected, &mask);
    Outcome {
        id: "8",
        name: "Closed-form box kernel",
        pass: err <= 1e-2,
        detail: format!("relative L2 error {err:.2e}"),
    }
}

fn c09_fourier(g: &Generic) -> Outcome {
    let gf = g_compute(&g.pp, &g.k, 1.0).unwrap();
    let z: Vec<f64> = (0..20).map(|i| 0.5 + 2.5 * i as f64).collect();
    let rep = fourier_consistency(&g.pp, &g.k, &gf, &z).unwrap();
    Outcome {
        id: "9",
        name: "Fourier consistency",
        pass: rep.relative <= 1e-3,
        detail: format!("max dev / (1 + max|f|) = {:.2e}", rep.relative),
    }
}

fn c10_holder(g: &Generic) -> Vec<Outcome> {
    let reports: Vec<HolderReport> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&p| holder_bound_check(&g.pp, &g.k, p).unwrap())
        .collect();
    let fmt = |f: &dyn Fn(&HolderReport) -> f64| {
        reports
            .iter()
            .map(|r| format!("p={}: {:.3e} vs {:.3e}", r.p, r.lhs, f(r)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    vec![
        Outcome {
            id: "10",
            name: "Hölder bound, stated constant 2^(p+1)",
            pass: reports.iter().all(|r| r.slack > 0.0),
            detail: fmt(&|r| r.rhs),
        },
        Outcome {
            id: "10b",
            name: "Hölder bound, derived constant 2^(2p+1)",
            pass: reports.iter().all(|r| r.rhs_chain > r.lhs),
            detail: fmt(&|r| r.rhs_chain),
        },
    ]
}

fn c11_contraction(g: &Generic) -> Outcome {
    let ed = extended_difference(&g.pp, &g.k);
    let rep = contraction_check(&g.k, 5, &[ed]).unwrap();
    let gf = g_compute(&g.pp, &g.k, 1.0).unwrap();
    let fp = fixed_point_check(&g.pp, &g.k, &gf).unwrap();
    let norms: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("{:.2e}<={:.2e}", r.norm, r.bound))
        .collect();
    Outcome {
        id: "11",
        name: "Contraction and fixed point",
        pass: rep.holds && fp.rel_error <= 1e-4,
        detail: format!(
            "norms {}; fixed point rel err {:.2e}, cond {:.2}",
            norms.join(" "),
            fp.rel_error,
            fp.condition_number
        ),
    }
}

fn generic_spectrum(j_max: usize) -> Spectrum {
    compute_spectrum(&operator(generic(2001), 1.0, 2.0), j_max).unwrap()
}

fn neumann_spectrum(j_max: usize) -> Spectrum {
    compute_spectrum(&operator(zero(101), 0.0, 0.0), j_max).unwrap()
}

fn c12_corollary(sigma: &Spectrum) -> Outcome {
    let mut pass = true;
    for (kind, c) in [(Scenario::Even, 0.5), (Scenario::Odd, 0.0)] {
        let s = subspectrum_scenarios(sigma, kind).unwrap();
        for p in [1.0, 1.5, 2.0, 5.0, 100.0] {
            let cfg = HypothesisConfig::new(0.25, p).unwrap();
            let r = check_h1(&s, sigma, &cfg, DEFAULT_J0).unwrap();
            pass &= r.passed && r.warnings.is_empty();
            pass &= r.rows.iter().all(|row| row.excess == c);
            pass &= r.c_min == c;
        }
    }
    Outcome {
        id: "12",
        name: "Corollary counting",
        pass,
        detail: format!("n_S - 2a n_σ exactly 1/2 (even) and 0 (odd) for j <= {}", sigma.len() / 2),
    }
}

fn c13_closed_form(generic: &Spectrum, neumann: &Spectrum) -> Outcome {
    let mut worst: f64 = 0.0;
    for sigma in [generic, neumann] {
        for kind in [Scenario::Even, Scenario::Odd, Scenario::EveryK(3)] {
            let s = subspectrum_scenarios(sigma, kind).unwrap();
            let root = s.sqrt_values();
            let sym = symmetrize(&root);
            for j in 1..root.len() {
                let closed = big_n_closed(&root, j).unwrap();
                let quad = n_over_t_quadrature(&sym, root[j]);
                worst = worst.max((closed - quad).abs() / closed.abs());
            }
        }
    }
    Outcome {
        id: "13",
        name: "N closed form vs quadrature",
        pass: worst <= 1e-6,
        detail: format!("max rel diff {worst:.2e}"),
    }
}

fn c14_h2_hl(neumann: &Spectrum) -> Outcome {
    let cfg = HypothesisConfig::new(0.25, 1.0).unwrap();
    let s = subspectrum_scenarios(neumann, Scenario::Even).unwrap();
    let h2 = check_h2(&s, &cfg).unwrap();
    let hl = check_hl(&s, &cfg).unwrap();
    let min_slack = h2.upper_slack.iter().cloned().fold(f64::INFINITY, f64::min);
    Outcome {
        id: "14",
        name: "(H2)/(H_L) consistency",
        pass: h2.d_fitted.abs() <= 1e-6 && min_slack >= PI / 2.0 - 1e-9 && hl.min_v.is_finite() && hl.consistent,
        detail: format!(
            "D {:.1e}, min slack {min_slack:.6}, min v {:.4} over j <= {}",
            h2.d_fitted,
            hl.min_v,
            s.len() - 1
        ),
    }
}

fn c15_reconstruction() -> Outcome {
    let start = Instant::now();
    let targets = truth_targets(10);
    let problem = truth_problem(targets.clone());
    let r = reconstruct(&problem).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let err = relative_l2_error(&r.coefficients, &TRUTH_COEFFS, TRUTH_A);
    let dh = (r.h - TRUTH_H).abs();
    let full = hessian_spectrum(&problem, &TRUTH_COEFFS, TRUTH_H).unwrap();
    let few = hessian_spectrum(&truth_problem(targets[..3].to_vec()), &TRUTH_COEFFS, TRUTH_H).unwrap();
    let rel = |ev: &[f64]| ev[0].abs() / ev[ev.len() - 1];
    let drop = rel(&full) / rel(&few).max(f64::MIN_POSITIVE);
    Outcome {
        id: "15",
        name: "Reconstruction",
        pass: err <= 1e-3 && dh <= 1e-3 && elapsed < 120.0 && drop >= 1e3,
        detail: format!(
            "L2 err {err:.2e}, |dh| {dh:.2e}, {} iterations, {elapsed:.1}s; Hessian min drop {drop:.1e}",
            r.iterations
        ),
    }
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut report = |o: Outcome| {
        let status = match (o.pass, DOCUMENTED.contains(&o.id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>3} {status:<17} {}: {}", o.id, o.name, o.detail);
        outcomes.push(o);
    };
    report(c01_neumann());
    report(c02_shift());
    report(c03_asymptotics());
    report(c04_oracle());
    report(c05_lagrange());
    report(c06_degenerate());
    let g = generic_kernel();
    report(c07_support(&g));
    report(c08_box());
    report(c09_fourier(&g));
    for o in c10_holder(&g) {
        report(o);
    }
    report(c11_contraction(&g));
    let generic = generic_spectrum(40);
    let neumann = neumann_spectrum(80);
    report(c12_corollary(&generic));
    report(c13_closed_form(&generic, &neumann));
    report(c14_h2_hl(&neumann));
    report(c15_reconstruction());

    let unexpected: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass && !DOCUMENTED.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} passed", outcomes.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
