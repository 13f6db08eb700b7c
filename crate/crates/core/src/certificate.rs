//! The uniqueness certificate
//! `f(z) = 4 ∫_0^a (-1 + 2 psi_1 psi_2)(q_1 - q_2) dx` and the Lagrange
//! identity behind it.
//!
//! For every real `lambda = z^2`,
//! `∫_0^1 (q_1 - q_2) psi_1 psi_2 = [psi_2 psi_1' - psi_1 psi_2']_0^1 = W(1) + h_1 - h_2`.
//! When `q_1 = q_2` on `[a, 1]` this gives
//! `f(z) = 4 kappa + 8 W(1)` with `kappa = 2(h_1 - h_2) + ∫_0^1 (q_2 - q_1)`,
//! and `W(1) = 0` at every eigenvalue shared by the two operators (same `H`),
//! so `f = 4 kappa` there.
//!
//! Genuinely distinct pairs sharing infinitely many eigenvalues are hard to
//! construct, so the checks rest on the identity at arbitrary real `z` and on
//! the identical-pair case.

use rayon::prelude::*;
use serde::Serialize;

use crate::counting::{SubSpectrum, MATCH_REL_TOL};
use crate::error::{Error, Result};
use crate::potentials::{max_abs_diff_on, trapezoid_weights, SampledFunction};
use crate::sturm::{self, Spectrum};

/// Default number of trace nodes on `[0, 1]`.
pub const DEFAULT_TRACE_N: usize = 4001;

/// Relative tolerance for `q_1 = q_2` on `[a, 1]`.
pub const TAIL_MATCH_TOL: f64 = 1e-10;

/// Two left data sets `(q_i, h_i)` sharing `H` and agreeing on `[a, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairProblem {
    pub q1: SampledFunction,
    pub h1: f64,
    pub q2: SampledFunction,
    pub h2: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub a: f64,
    pub trace_n: usize,
    /// `max |q_1 - q_2|` over `[a, 1]`.
    pub tail_mismatch: f64,
}

impl PairProblem {
    pub fn new(q1: SampledFunction, h1: f64, q2: SampledFunction, h2: f64, big_h: f64, a: f64) -> Result<Self> {
        for q in [&q1, &q2] {
            if q.interval() != (0.0, 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "pair potentials must live on [0, 1], got [{}, {}]",
                    q.x_lo(),
                    q.x_hi()
                )));
            }
        }
        if !(a > 0.0 && a <= 0.5) {
            return Err(Error::InvalidParameter(format!("a must lie in (0, 1/2], got {a}")));
        }
        if ![h1, h2, big_h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("Robin constants must be finite".into()));
        }
        let tail_mismatch = max_abs_diff_on(&q1, &q2, (a, 1.0))?;
        Ok(Self {
            q1,
            h1,
            q2,
            h2,
            big_h,
            a,
            trace_n: DEFAULT_TRACE_N,
            tail_mismatch,
        })
    }

    pub fn with_trace_n(mut self, trace_n: usize) -> Result<Self> {
        if trace_n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 trace nodes, got {trace_n}")));
        }
        self.trace_n = trace_n;
        Ok(self)
    }

    /// Data with the roles of the two operators exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            q1: self.q2.clone(),
            h1: self.h2,
            q2: self.q1.clone(),
            h2: self.h1,
            ..self.clone()
        }
    }

    /// False when `q_1` and `q_2` differ on `[a, 1]`; `f` stays well defined
    /// but the identity `f = 4 kappa + 8 W(1)` no longer applies.
    pub fn tail_matches(&self) -> bool {
        let scale = 1.0 + self.q1.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.tail_mismatch <= TAIL_MATCH_TOL * scale
    }

    /// `kappa = 2(h_1 - h_2) + ∫_0^1 (q_2 - q_1)`.
    pub fn kappa(&self) -> f64 {
        2.0 * (self.h1 - self.h2) - (self.q1.integral() - self.q2.integral())
    }

    /// Nodes on `[0, a]` matching the spacing of the `[0, 1]` trace grid.
    pub(crate) fn left_nodes(&self) -> usize {
        (self.a * (self.trace_n - 1) as f64).ceil() as usize + 1
    }

    /// `q_1 - q_2` at `x` (linear interpolation of both).
    pub(crate) fn diff_at(&self, x: f64) -> f64 {
        self.q1.eval_clamped(x) - self.q2.eval_clamped(x)
    }

    /// `psi_1 psi_2` at `n` uniform nodes of `[0, x_end]`, unguarded.
    pub(crate) fn product_trace(&self, lambda: f64, x_end: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t1 = sturm::trace(&self.q1, self.h1, lambda, x_end, n);
        let t2 = sturm::trace(&self.q2, self.h2, lambda, x_end, n);
        let prod = t1.psi.iter().zip(&t2.psi).map(|(a, b)| a * b).collect();
        (t1.nodes, prod)
    }

    fn guard(&self, lambda: f64, x_end: f64, n: usize) -> Result<()> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
        }
        sturm::check_resolution(&self.q1, lambda, x_end, n)?;
        sturm::check_resolution(&self.q2, lambda, x_end, n)
    }
}

/// `f` as a function of `lambda = z^2`.
pub fn f_eval_lambda(pp: &PairProblem, lambda: f64) -> Result<f64> {
    let n = pp.left_nodes();
    pp.guard(lambda, pp.a, n)?;
    let (nodes, prod) = pp.product_trace(lambda, pp.a, n);
    let w = trapezoid_weights(n, pp.a / (n - 1) as f64);
    let sum: f64 = nodes
        .iter()
        .zip(&prod)
        .zip(&w)
        .map(|((&x, p), w)| w * (2.0 * p - 1.0) * pp.diff_at(x))
        .sum();
    Ok(4.0 * sum)
}

pub fn f_eval(pp: &PairProblem, z: f64) -> Result<f64> {
    f_eval_lambda(pp, z * z)
}

/// `4 ∫_0^a (cos 2zx - 2 r(z, x))(q_1 - q_2) dx`, computed through `r`.
pub fn f_middle(pp: &PairProblem, z: f64) -> Result<f64> {
    let n = pp.left_nodes();
    pp.guard(z * z, pp.a, n)?;
    let (nodes, r) = r_trace(pp, z, pp.a, n);
    let w = trapezoid_weights(n, pp.a / (n - 1) as f64);
    let sum: f64 = nodes
        .iter()
        .zip(&r)
        .zip(&w)
        .map(|((&x, r), w)| w * ((2.0 * z * x).cos() - 2.0 * r) * pp.diff_at(x))
        .sum();
    Ok(4.0 * sum)
}

/// `r(z, x) = -psi_1 psi_2 + (1 + cos 2zx)/2` at `n` uniform nodes of `[0, x_end]`.
pub(crate) fn r_trace(pp: &PairProblem, z: f64, x_end: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (nodes, prod) = pp.product_trace(z * z, x_end, n);
    let r = nodes
        .iter()
        .zip(&prod)
        .map(|(&x, p)| 0.5 * (1.0 + (2.0 * z * x).cos()) - p)
        .collect();
    (nodes, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagrangeEntry {
    pub z: f64,
    /// `∫_0^1 (q_1 - q_2) psi_1 psi_2`
    pub left: f64,
    /// `[psi_2 psi_1' - psi_1 psi_2'](1) + h_1 - h_2`
    pub right: f64,
    /// `[psi_2 psi_1' - psi_1 psi_2'](1)`
    pub wronskian_at_1: f64,
    pub deviation: f64,
}

/// Both sides of the Lagrange identity at `lambda = z^2`, computed
/// independently on the `[0, 1]` trace grid.
pub fn lagrange_check(pp: &PairProblem, z: f64) -> Result<LagrangeEntry> {
    let lambda = z * z;
    let n = pp.trace_n;
    let t1 = sturm::solve_psi(&pp.q1, pp.h1, lambda, n)?;
    let t2 = sturm::solve_psi(&pp.q2, pp.h2, lambda, n)?;
    let w = trapezoid_weights(n, t1.step());
    let left: f64 = (0..n)
        .map(|i| w[i] * pp.diff_at(t1.nodes[i]) * t1.psi[i] * t2.psi[i])
        .sum();
    let e = n - 1;
    let wronskian_at_1 = t2.psi[e] * t1.dpsi[e] - t1.psi[e] * t2.dpsi[e];
    let right = wronskian_at_1 + pp.h1 - pp.h2;
    Ok(LagrangeEntry {
        z,
        left,
        right,
        wronskian_at_1,
        deviation: (left - right).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangeReport {
    pub trace_n: usize,
    /// `1 + ‖q_1 - q_2‖_1 + |h_1 - h_2|`
    pub scale: f64,
    pub entries: Vec<LagrangeEntry>,
    pub max_deviation: f64,
}

pub fn lagrange_sweep(pp: &PairProblem, z_list: &[f64]) -> Result<LagrangeReport> {
    let entries = z_list
        .par_iter()
        .map(|&z| lagrange_check(pp, z))
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = entries.iter().map(|e| e.deviation).fold(0.0, f64::max);
    Ok(LagrangeReport {
        trace_n: pp.trace_n,
        scale: pair_scale(pp),
        entries,
        max_deviation,
    })
}

/// `1 + ‖q_1 - q_2‖_{L^1(0,1)} + |h_1 - h_2|` on the trace grid.
pub fn pair_scale(pp: &PairProblem) -> f64 {
    let n = pp.trace_n;
    let w = trapezoid_weights(n, 1.0 / (n - 1) as f64);
    let l1: f64 = (0..n)
        .map(|i| w[i] * pp.diff_at(i as f64 / (n - 1) as f64).abs())
        .sum();
    1.0 + l1 + (pp.h1 - pp.h2).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateEntry {
    pub z: f64,
    pub f: f64,
    pub f_middle: f64,
    pub lagrange: LagrangeEntry,
    /// `f - 4 kappa - 8 W(1)`; zero up to discretization when `q_1 = q_2` on `[a, 1]`.
    pub identity_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonEntry {
    pub position: usize,
    pub lambda: f64,
    pub other_lambda: f64,
    pub f: f64,
    /// `|f - 4 kappa|`
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub a: f64,
    pub kappa: f64,
    /// Value `4 kappa` taken by `f` at shared eigenvalues.
    pub value_at_common: f64,
    pub tail_matches: bool,
    pub tail_mismatch: f64,
    pub scale: f64,
    pub entries: Vec<CertificateEntry>,
    pub max_lagrange_deviation: f64,
    pub max_identity_gap: f64,
    pub max_middle_gap: f64,
    pub common: Vec<CommonEntry>,
    pub max_common_deviation: Option<f64>,
    pub note: String,
}

const NOTE: &str = "shared-eigenvalue checks use the Lagrange identity at arbitrary real z \
and the identical-pair case; kappa = 0 for an infinite shared set is an input assumption";

/// Certificate values, the middle form and the Lagrange identity at each `z`.
pub fn certify(pp: &PairProblem, z_list: &[f64]) -> Result<CertificateReport> {
    let kappa = pp.kappa();
    let entries = z_list
        .par_iter()
        .map(|&z| {
            let f = f_eval(pp, z)?;
            let f_middle = f_middle(pp, z)?;
            let lagrange = lagrange_check(pp, z)?;
            Ok(CertificateEntry {
                z,
                f,
                f_middle,
                lagrange,
                identity_gap: f - 4.0 * kappa - 8.0 * lagrange.wronskian_at_1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_of = |g: &dyn Fn(&CertificateEntry) -> f64| entries.iter().map(g).fold(0.0, f64::max);
    Ok(CertificateReport {
        a: pp.a,
        kappa,
        value_at_common: 4.0 * kappa,
        tail_matches: pp.tail_matches(),
        tail_mismatch: pp.tail_mismatch,
        scale: pair_scale(pp),
        max_lagrange_deviation: max_of(&|e| e.lagrange.deviation),
        max_identity_gap: max_of(&|e| e.identity_gap.abs()),
        max_middle_gap: max_of(&|e| (e.f - e.f_middle).abs()),
        entries,
        common: Vec::new(),
        max_common_deviation: None,
        note: NOTE.to_string(),
    })
}

/// `|f(√s_j) - 4 kappa|` over a sub-spectrum of the first operator whose
/// values must also appear in `other`, the spectrum of the second.
pub fn vanish_on_common(pp: &PairProblem, s: &SubSpectrum, other: &Spectrum) -> Result<Vec<CommonEntry>> {
    let kappa = pp.kappa();
    s.values
        .par_iter()
        .enumerate()
        .map(|(position, &lambda)| {
            let nearest = other
                .eigenvalues
                .iter()
                .cloned()
                .min_by(|x, y| (x - lambda).abs().total_cmp(&(y - lambda).abs()))
                .unwrap_or(f64::NAN);
            if !((nearest - lambda).abs() <= MATCH_REL_TOL * lambda.abs().max(1.0)) {
                return Err(Error::EigenvalueMismatch {
                    position,
                    left: lambda,
                    right: nearest,
                });
            }
            let f = f_eval_lambda(pp, lambda)?;
            Ok(CommonEntry {
                position,
                lambda,
                other_lambda: nearest,
                f,
                deviation: (f - 4.0 * kappa).abs(),
            })
        })
        .collect()
}

impl CertificateReport {
    pub fn with_common(mut self, common: Vec<CommonEntry>) -> Self {
        self.max_common_deviation = common.iter().map(|c| c.deviation).reduce(f64::max);
        self.common = common;
        self
    }

    /// `z,f,f_middle,lagrange_left,lagrange_right,deviation`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,f,f_middle,lagrange_left,lagrange_right,deviation\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.z, e.f, e.f_middle, e.lagrange.left, e.lagrange.right, e.lagrange.deviation
            ));
        }
        out
    }
}
