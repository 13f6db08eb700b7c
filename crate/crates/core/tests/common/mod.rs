//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use slgate_core::certificate::PairProblem;
use slgate_core::counting::n_count;
use slgate_core::inverse::{assemble, ReconstructionProblem};
use slgate_core::potentials::SampledFunction;
use slgate_core::sturm::{compute_spectrum, OperatorSpec, RobinBC};

/// Generic smooth potential used across tests.
pub fn generic_q(x: f64) -> f64 {
    2.0 * (3.0 * x).sin() + 1.0
}

/// Difference supported on `[0, 1/2]` for the generic pair.
pub fn generic_bump(x: f64) -> f64 {
    if x < 0.5 {
        (1.0 - 2.0 * x).powi(2) * (0.8 + 0.5 * (5.0 * x).cos())
    } else {
        0.0
    }
}

/// `(q_1, h_1) = (generic_q, 1)`, `(q_2, h_2) = (generic_q + bump, 0.3)`,
/// `H = 2`, `a = 1/2`.
pub fn generic_pair(grid_n: usize) -> PairProblem {
    let q1 = SampledFunction::from_fn(0.0, 1.0, grid_n, generic_q).unwrap();
    let q2 = SampledFunction::from_fn(0.0, 1.0, grid_n, |x| generic_q(x) + generic_bump(x)).unwrap();
    PairProblem::new(q1, 1.0, q2, 0.3, 2.0, 0.5).unwrap()
}

/// Eigenvalues of the symmetric tridiagonal matrix (`diag`, `off`) by
/// Sturm-sequence bisection; returns the `k`-th smallest for each `k` in `ks`.
fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64], ks: &[usize]) -> Vec<f64> {
    let n = diag.len();
    let radius = (0..n)
        .map(|i| {
            let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let r = if i + 1 < n { off[i].abs() } else { 0.0 };
            diag[i].abs() + l + r
        })
        .fold(0.0, f64::max);
    let count_below = |x: f64| {
        let mut count = 0usize;
        let mut d = 1.0f64;
        for i in 0..n {
            let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    ks.iter()
        .map(|&k| {
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Ghost-point finite differences for `-u'' + q u` with
/// `u'(0) + h u(0) = 0`, `u'(1) + H u(1) = 0` on `n` intervals, symmetrised
/// by scaling the end rows.
pub fn fd_eigenvalues(q: impl Fn(f64) -> f64, h: f64, big_h: f64, n: usize, ks: &[usize]) -> Vec<f64> {
    let d = 1.0 / n as f64;
    let d2 = d * d;
    let diag: Vec<f64> = (0..=n)
        .map(|i| {
            let x = i as f64 * d;
            let base = 2.0 / d2 + q(x);
            if i == 0 {
                base - 2.0 * h / d
            } else if i == n {
                base + 2.0 * big_h / d
            } else {
                base
            }
        })
        .collect();
    let off: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                -(2f64.sqrt()) / d2
            } else {
                -1.0 / d2
            }
        })
        .collect();
    tridiagonal_eigenvalues(&diag, &off, ks)
}

/// Richardson extrapolation of two finite-difference levels, `n` and `2n`.
pub fn fd_richardson(q: impl Fn(f64) -> f64 + Copy, h: f64, big_h: f64, n: usize, ks: &[usize]) -> Vec<f64> {
    let coarse = fd_eigenvalues(q, h, big_h, n, ks);
    let fine = fd_eigenvalues(q, h, big_h, 2 * n, ks);
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect()
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// `∫_0^R n_α(t)/t dt` by composite Gauss-Legendre quadrature, with the
/// integrand evaluated through the counting function. Pieces between jump
/// points are split geometrically so that each panel spans a ratio <= 1.05.
pub fn n_over_t_quadrature(alpha: &[f64], r: f64) -> f64 {
    let mut breaks: Vec<f64> = alpha.iter().map(|a| a.abs()).filter(|&a| a > 0.0 && a < r).collect();
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    breaks.push(r);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let panels = ((hi / lo).ln() / 1.05f64.ln()).ceil().max(1.0) as usize;
        let ratio = (hi / lo).powf(1.0 / panels as f64);
        let mut a = lo;
        for _ in 0..panels {
            let b = a * ratio;
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                let t = mid + half * x;
                total += wt * half * n_count(alpha, t) as f64 / t;
            }
            a = b;
        }
    }
    total
}

/// Relative L² error between two matrices restricted to a mask.
pub fn masked_rel_l2(values: &[f64], expected: &[f64], mask: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((v, e), &m) in values.iter().zip(expected).zip(mask) {
        if m {
            num += (v - e).powi(2);
            den += e * e;
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Reconstruction truth: cosine coefficients on `[0, a]`, `h`, `H`, `a`.
pub const TRUTH_COEFFS: [f64; 4] = [0.8, -0.5, 0.3, 0.1];
pub const TRUTH_H: f64 = 0.7;
pub const TRUTH_BIG_H: f64 = 2.0;
pub const TRUTH_A: f64 = 0.5;

/// Known part `x + 1` on `[a, 1]`, continuous with the truth at `a`.
pub fn truth_known(grid_n: usize) -> SampledFunction {
    SampledFunction::from_fn(TRUTH_A, 1.0, grid_n, |x| x + 1.0).unwrap()
}

/// Eigenvalues `λ_0..λ_{count-1}` of the truth, generated on grids twice as
/// fine as the inversion grids.
pub fn truth_targets(count: usize) -> Vec<(usize, f64)> {
    let q = assemble(&TRUTH_COEFFS, TRUTH_A, &truth_known(2001), 4001).unwrap();
    let spec = OperatorSpec::new(q, RobinBC::new(TRUTH_H, TRUTH_BIG_H).unwrap()).unwrap();
    let sp = compute_spectrum(&spec, count - 1).unwrap();
    sp.eigenvalues.into_iter().enumerate().collect()
}

pub fn truth_problem(targets: Vec<(usize, f64)>) -> ReconstructionProblem {
    ReconstructionProblem::new(truth_known(1001), TRUTH_A, TRUTH_BIG_H, targets, TRUTH_COEFFS.len(), 2001).unwrap()
}
