//! Counting functions of sub-spectra and the hypotheses built on them.
//!
//! `n_α(t)` counts the elements with `|α_j| <= t` and
//! `N_α(R) = ∫_0^R n_α(t)/t dt`. A sub-spectrum `S = (s_j)` is checked
//! against
//!
//! * (H1): `2a n_σ(t) + C >= n_S(t) >= 2a n_σ(t) + 1/(2p) - 2a` at `t = s_j`,
//! * (H2): `π j/(2a) + D <= √s_j <= π/(2a) (j + 1 - 1/(2p)) + O(1/j)`,
//! * (H_L): `N_{S^{1/2}}(R) - (4a/π) R + (1/q) ln R` bounded below, with
//!   `1/p + 1/q = 1` and `S^{1/2} = {±√s_j}`.
//!
//! Every check runs on a finite prefix, so reports can only say whether the
//! computed range is consistent with the asymptotic statement.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit;
use crate::sturm::Spectrum;

/// Relative tolerance for deciding that two eigenvalues coincide.
pub const MATCH_REL_TOL: f64 = 1e-7;

/// Default index below which (H1) violations are only warnings.
pub const DEFAULT_J0: usize = 5;

/// Slack allowed on the `O(1/j)`-corrected (H2) upper bound.
pub const H2_TOL: f64 = 1e-6;

/// Most negative `d v_j / d ln j` still reported as consistent with (H_L).
pub const HL_SLOPE_TOL: f64 = 0.1;

/// `♯{j : |α_j| <= t}` for `alpha` sorted by absolute value.
pub fn n_count(alpha: &[f64], t: f64) -> usize {
    alpha.partition_point(|a| a.abs() <= t)
}

/// `N_α(t) = Σ_{|α_k| <= t} ln(t / |α_k|)`, which is the integral of `n_α(s)/s`
/// over `(0, t]`. A zero element below `t` makes the integral diverge.
pub fn big_n(alpha: &[f64], t: f64) -> Result<f64> {
    let mut acc = 0.0;
    for &a in alpha.iter().take(n_count(alpha, t)) {
        if a == 0.0 {
            return Err(Error::InvalidParameter(
                "N diverges: the sequence contains 0".into(),
            ));
        }
        acc += (t / a.abs()).ln();
    }
    Ok(acc)
}

/// `N_{S^{1/2}}(√s_j) = 2 (j ln √s_j - Σ_{k<j} ln √s_k)` for increasing
/// positive `sqrt_s`.
pub fn big_n_closed(sqrt_s: &[f64], j: usize) -> Result<f64> {
    if j >= sqrt_s.len() {
        return Err(Error::InvalidParameter(format!(
            "index {j} beyond {} values",
            sqrt_s.len()
        )));
    }
    if let Some(k) = sqrt_s[..=j].iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "sqrt(s_{k}) = {} is not positive",
            sqrt_s[k]
        )));
    }
    let head: f64 = sqrt_s[..j].iter().map(|v| v.ln()).sum();
    Ok(2.0 * (j as f64 * sqrt_s[j].ln() - head))
}

/// `{±v}` ordered by absolute value.
pub fn symmetrize(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = values.iter().flat_map(|&v| [-v, v]).collect();
    out.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisConfig {
    pub a: f64,
    pub p: f64,
}

impl HypothesisConfig {
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 0.5) {
            return Err(Error::InvalidParameter(format!("a must lie in (0, 1/2], got {a}")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must lie in [1, inf), got {p}")));
        }
        Ok(Self { a, p })
    }

    /// Conjugate exponent `q` with `1/p + 1/q = 1`; infinite for `p = 1`.
    pub fn q_conj(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else {
            self.p / (self.p - 1.0)
        }
    }

    /// `1/q = 1 - 1/p`, finite in every case.
    pub fn inv_q_conj(&self) -> f64 {
        1.0 - 1.0 / self.p
    }
}

/// Positivity shift for a spectrum: 0 when `lambda_0 > 0`, else `1 - lambda_0`.
pub fn positivity_shift(eigenvalues: &[f64]) -> f64 {
    match eigenvalues.first() {
        Some(&l0) if l0 <= 0.0 => 1.0 - l0,
        _ => 0.0,
    }
}

/// An indexed selection `s_j = lambda_{m_j}` of a parent spectrum.
///
/// Adding a constant to the potential translates the spectrum, so counting
/// is done on `s_j + shift` with the smallest shift making every value
/// positive. The shift is recorded in all reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubSpectrum {
    pub parent: Spectrum,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub shift: f64,
}

impl SubSpectrum {
    pub fn new(parent: Spectrum, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "sub-spectrum indices must be strictly increasing".into(),
            ));
        }
        if let Some(&m) = indices.iter().find(|&&m| m >= parent.len()) {
            return Err(Error::InvalidParameter(format!(
                "index {m} beyond the {} computed eigenvalues",
                parent.len()
            )));
        }
        let values = indices.iter().map(|&m| parent.eigenvalues[m]).collect();
        let shift = positivity_shift(&parent.eigenvalues);
        Ok(Self {
            parent,
            indices,
            values,
            shift,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn positive_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v + self.shift).collect()
    }

    /// `√(s_j + shift)`.
    pub fn sqrt_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v + self.shift).sqrt()).collect()
    }
}

fn matches(x: f64, y: f64) -> bool {
    (x - y).abs() <= MATCH_REL_TOL * x.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Row {
    pub j: usize,
    pub m_j: usize,
    pub s_j: f64,
    pub n_s: usize,
    pub n_sigma: usize,
    /// `n_S - 2a n_σ`
    pub excess: f64,
    /// `n_S - 2a n_σ - (1/(2p) - 2a)`; the lower bound holds iff this is `>= 0`.
    pub lower_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Report {
    pub config: HypothesisConfig,
    pub shift: f64,
    pub j0: usize,
    pub rows: Vec<H1Row>,
    /// Smallest admissible `C`, i.e. `max_j (n_S - 2a n_σ)`.
    pub c_min: f64,
    /// Indices `j < j0` violating the lower bound.
    pub warnings: Vec<usize>,
    /// Indices `j >= j0` violating the lower bound.
    pub violations: Vec<usize>,
    pub passed: bool,
}

/// Evaluates (H1) at `t = s_j` against the full spectrum `sigma`.
pub fn check_h1(s: &SubSpectrum, sigma: &Spectrum, cfg: &HypothesisConfig, j0: usize) -> Result<H1Report> {
    let top = *s.values.last().expect("non-empty sub-spectrum");
    match sigma.eigenvalues.last() {
        Some(&last) if last >= top || matches(last, top) => {}
        _ => {
            return Err(Error::InvalidParameter(format!(
                "reference spectrum ends below s_max = {top}; compute more eigenvalues"
            )))
        }
    }
    for (pos, &v) in s.values.iter().enumerate() {
        let i = sigma.eigenvalues.partition_point(|&l| l < v - MATCH_REL_TOL * v.abs().max(1.0));
        let hit = sigma.eigenvalues.get(i).is_some_and(|&l| matches(l, v));
        if !hit {
            return Err(Error::NotSubset { position: pos, value: v });
        }
    }

    let shift = s.shift.max(positivity_shift(&sigma.eigenvalues));
    let s_pos: Vec<f64> = s.values.iter().map(|v| v + shift).collect();
    let sigma_pos: Vec<f64> = sigma.eigenvalues.iter().map(|v| v + shift).collect();
    let two_a = 2.0 * cfg.a;
    let floor = 1.0 / (2.0 * cfg.p) - two_a;

    let mut rows = Vec::with_capacity(s_pos.len());
    for (j, &t) in s_pos.iter().enumerate() {
        // counts at an element of the set include the element itself
        let t_eval = t + MATCH_REL_TOL * t.abs().max(1.0) * 0.5;
        let n_s = n_count(&s_pos, t_eval);
        let n_sigma = n_count(&sigma_pos, t_eval);
        let excess = n_s as f64 - two_a * n_sigma as f64;
        rows.push(H1Row {
            j,
            m_j: s.indices[j],
            s_j: t,
            n_s,
            n_sigma,
            excess,
            lower_margin: excess - floor,
        });
    }
    let c_min = rows.iter().map(|r| r.excess).fold(f64::NEG_INFINITY, f64::max);
    let (warnings, violations): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .filter(|r| r.lower_margin < 0.0)
        .map(|r| r.j)
        .partition(|&j| j < j0);
    Ok(H1Report {
        config: *cfg,
        shift,
        j0,
        passed: violations.is_empty(),
        rows,
        c_min,
        warnings,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Report {
    pub config: HypothesisConfig,
    /// Shift applied before taking square roots (0 when the raw values are
    /// already nonnegative).
    pub shift: f64,
    pub sqrt_s: Vec<f64>,
    /// `min_j (√s_j - π j/(2a))`
    pub d_fitted: f64,
    /// `u_j = π/(2a) (j + 1 - 1/(2p)) - √s_j`
    pub upper_slack: Vec<f64>,
    /// Fit `√s_j - π j/(2a) ≈ alpha + c/j` over the upper half of indices.
    pub alpha: f64,
    pub c_fit: f64,
    /// `u_j + c/j` for `j >= 1`.
    pub corrected_slack: Vec<f64>,
    pub passed: bool,
}

/// Raw values at or above this are treated as nonnegative for (H2).
const H2_NEG_TOL: f64 = -1e-6;

pub fn check_h2(s: &SubSpectrum, cfg: &HypothesisConfig) -> Result<H2Report> {
    if s.len() < 10 {
        return Err(Error::TooFewPoints {
            needed: 10,
            got: s.len(),
        });
    }
    let raw_ok = s.values.iter().all(|&v| v >= H2_NEG_TOL);
    let shift = if raw_ok { 0.0 } else { s.shift };
    let sqrt_s: Vec<f64> = s.values.iter().map(|v| (v + shift).max(0.0).sqrt()).collect();
    let slope = PI / (2.0 * cfg.a);
    let lead: Vec<f64> = sqrt_s
        .iter()
        .enumerate()
        .map(|(j, r)| r - slope * j as f64)
        .collect();
    let d_fitted = lead.iter().cloned().fold(f64::INFINITY, f64::min);
    let tail_shift = 1.0 - 1.0 / (2.0 * cfg.p);
    let upper_slack: Vec<f64> = sqrt_s
        .iter()
        .enumerate()
        .map(|(j, r)| slope * (j as f64 + tail_shift) - r)
        .collect();

    let range = fit::top_half(s.len());
    let range = range.start.max(1)..range.end;
    let js: Vec<f64> = range.clone().map(|j| j as f64).collect();
    let (alpha, c_fit) = fit::const_plus_inverse(&js, &lead[range]);
    let corrected_slack: Vec<f64> = (1..s.len())
        .map(|j| upper_slack[j] + c_fit / j as f64)
        .collect();
    let passed = d_fitted.is_finite() && corrected_slack.iter().all(|&u| u >= -H2_TOL);
    Ok(H2Report {
        config: *cfg,
        shift,
        sqrt_s,
        d_fitted,
        upper_slack,
        alpha,
        c_fit,
        corrected_slack,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HLRow {
    pub j: usize,
    pub sqrt_s: f64,
    pub big_n: f64,
    /// `N(√s_j) - (4a/π)√s_j + (1/q) ln √s_j`
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HLReport {
    pub config: HypothesisConfig,
    pub inv_q_conj: f64,
    pub shift: f64,
    pub rows: Vec<HLRow>,
    pub min_v: f64,
    /// Slope of `v_j` against `ln j` over the upper half of indices.
    pub trend_slope: f64,
    /// Fitted `O(1)` constant in `N >= (1/p - 1) ln √s_j + (4a/π) √s_j + O(1)`,
    /// taken as the minimum over the upper half.
    pub chain_constant: f64,
    pub consistent: bool,
    pub verdict: String,
}

pub fn check_hl(s: &SubSpectrum, cfg: &HypothesisConfig) -> Result<HLReport> {
    let sqrt_s = s.sqrt_values();
    let inv_q = cfg.inv_q_conj();
    let mut rows = Vec::with_capacity(sqrt_s.len());
    for j in 0..sqrt_s.len() {
        let n = big_n_closed(&sqrt_s, j)?;
        let r = sqrt_s[j];
        let v = n - 4.0 * cfg.a / PI * r + inv_q * r.ln();
        rows.push(HLRow {
            j,
            sqrt_s: r,
            big_n: n,
            v,
        });
    }
    let min_v = rows.iter().map(|r| r.v).fold(f64::INFINITY, f64::min);
    let range = fit::top_half(rows.len());
    let range = range.start.max(1)..range.end;
    let chain_constant = rows[range.clone()]
        .iter()
        .map(|r| N_chain(r, cfg))
        .fold(f64::INFINITY, f64::min);
    let ln_j: Vec<f64> = range.clone().map(|j| (j as f64).ln()).collect();
    let vs: Vec<f64> = rows[range].iter().map(|r| r.v).collect();
    let trend_slope = if vs.len() >= 2 { fit::line(&ln_j, &vs).1 } else { 0.0 };
    let consistent = min_v.is_finite() && chain_constant.is_finite() && trend_slope >= -HL_SLOPE_TOL;
    let verdict = if consistent {
        "consistent over computed range"
    } else {
        "inconsistent over computed range"
    };
    Ok(HLReport {
        config: *cfg,
        inv_q_conj: inv_q,
        shift: s.shift,
        rows,
        min_v,
        trend_slope,
        chain_constant,
        consistent,
        verdict: verdict.to_string(),
    })
}

#[allow(non_snake_case)]
fn N_chain(row: &HLRow, cfg: &HypothesisConfig) -> f64 {
    row.big_n - (1.0 / cfg.p - 1.0) * row.sqrt_s.ln() - 4.0 * cfg.a / PI * row.sqrt_s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1ToH2Row {
    pub j: usize,
    pub sqrt_s: f64,
    /// `j + 1 - [2a(√s_j/π + 1 + c/j) + 1/(2p) - 2a]`
    pub lower_slack: f64,
    /// `2a(√s_j/π + 1 + c/j) + C - (j + 1)`
    pub upper_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1ToH2Report {
    pub config: HypothesisConfig,
    pub c_upper: f64,
    /// Fitted `c` in `n_σ(s_j) = √s_j/π + 1 + c/j`.
    pub c_inverse: f64,
    pub rows: Vec<H1ToH2Row>,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Numerical form of the (H1) ⇒ (H2) step: both inequalities with the
/// counting function of the parent replaced by `√s_j/π + 1 + c/j`.
pub fn check_h1_to_h2(s: &SubSpectrum, cfg: &HypothesisConfig, c_upper: f64) -> Result<H1ToH2Report> {
    let sqrt_s = s.sqrt_values();
    let range = fit::top_half(s.len());
    let range = range.start.max(1)..range.end;
    // n_σ(s_j) = m_j + 1 exactly; fit its deviation from √s_j/π + 1
    let js: Vec<f64> = range.clone().map(|j| j as f64).collect();
    let dev: Vec<f64> = range
        .map(|j| s.indices[j] as f64 - sqrt_s[j] / PI)
        .collect();
    let c_inverse = fit::inverse_only(&js, &dev);
    let two_a = 2.0 * cfg.a;
    let floor = 1.0 / (2.0 * cfg.p) - two_a;
    let rows: Vec<H1ToH2Row> = sqrt_s
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let corr = if j == 0 { 0.0 } else { c_inverse / j as f64 };
            let count = two_a * (r / PI + 1.0 + corr);
            H1ToH2Row {
                j,
                sqrt_s: r,
                lower_slack: (j + 1) as f64 - (count + floor),
                upper_slack: count + c_upper - (j + 1) as f64,
            }
        })
        .collect();
    let tail = fit::top_half(rows.len());
    let lower_holds = rows[tail.clone()].iter().all(|r| r.lower_slack >= -H2_TOL);
    let upper_holds = rows[tail].iter().all(|r| r.upper_slack >= -H2_TOL);
    Ok(H1ToH2Report {
        config: *cfg,
        c_upper,
        c_inverse,
        rows,
        lower_holds,
        upper_holds,
    })
}

/// All counting checks for one sub-spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingReport {
    pub shift: f64,
    pub h1: H1Report,
    pub h2: Option<H2Report>,
    pub hl: HLReport,
    pub h1_to_h2: H1ToH2Report,
}

impl CountingReport {
    pub fn build(s: &SubSpectrum, sigma: &Spectrum, cfg: &HypothesisConfig, j0: usize) -> Result<Self> {
        let h1 = check_h1(s, sigma, cfg, j0)?;
        let h2 = match check_h2(s, cfg) {
            Ok(r) => Some(r),
            Err(Error::TooFewPoints { .. }) => None,
            Err(e) => return Err(e),
        };
        let hl = check_hl(s, cfg)?;
        let h1_to_h2 = check_h1_to_h2(s, cfg, h1.c_min)?;
        Ok(Self {
            shift: h1.shift,
            h1,
            h2,
            hl,
            h1_to_h2,
        })
    }

    /// One row per `j`: `j,s_j,n_S,n_sigma,h1_margin,h2_upper_slack,v_j`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,s_j,n_S,n_sigma,h1_margin,h2_upper_slack,v_j\n");
        for (i, row) in self.h1.rows.iter().enumerate() {
            let slack = self
                .h2
                .as_ref()
                .map(|h| h.upper_slack[i].to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.j, row.s_j, row.n_s, row.n_sigma, row.lower_margin, slack, self.hl.rows[i].v
            ));
        }
        out
    }
}
