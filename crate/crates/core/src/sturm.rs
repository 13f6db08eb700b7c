//! Direct problem for `-u'' + q u = lambda u` on `[0, 1]` with
//! `u'(0) + h u(0) = 0` and `u'(1) + H u(1) = 0`.
//!
//! Eigenvalues are found by shooting: `psi` solves the equation with
//! `psi(0) = 1, psi'(0) = -h`, and the boundary characteristic
//! `W(lambda) = psi'(1) + H psi(1)` vanishes exactly on the spectrum.
//! The continuous Prüfer angle of `psi` at `x = 1` is strictly increasing in
//! `lambda` and equals `atan2(1, -H) + j pi` at the `j`-th eigenvalue, which is
//! what keeps the index bookkeeping honest when a bracket drifts.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Options};
use crate::potentials::SampledFunction;

/// A trace must resolve every wavelength of `psi` with this many nodes.
pub const MIN_TRACE_POINTS_PER_WAVELENGTH: f64 = 8.0;

/// Bisection stops once the bracket is narrower than this times `max(1, |lambda|)`.
pub const ROOT_REL_WIDTH: f64 = 1e-8;

const SECANT_STEPS: usize = 3;
const MAX_BRACKET_EXPANSIONS: usize = 60;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobinBC {
    pub h: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
}

impl RobinBC {
    pub fn new(h: f64, big_h: f64) -> Result<Self> {
        if !(h.is_finite() && big_h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Robin constants must be finite, got h = {h}, H = {big_h}"
            )));
        }
        Ok(Self { h, big_h })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub q: SampledFunction,
    pub bc: RobinBC,
}

impl OperatorSpec {
    pub fn new(q: SampledFunction, bc: RobinBC) -> Result<Self> {
        if q.interval() != (0.0, 1.0) {
            return Err(Error::InvalidParameter(format!(
                "operator potential must live on [0, 1], got [{}, {}]",
                q.x_lo(),
                q.x_hi()
            )));
        }
        let bc = RobinBC::new(bc.h, bc.big_h)?;
        Ok(Self { q, bc })
    }

    /// Same operator with `q` replaced by `q + c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.q.map(|v| v + c)?, self.bc)
    }
}

/// `psi` and `psi'` sampled along `[0, x_end]` at a fixed real spectral parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionTrace {
    pub lambda: f64,
    pub nodes: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
}

impl SolutionTrace {
    pub fn step(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }
}

fn check_left_domain(q: &SampledFunction) -> Result<()> {
    if q.x_lo() != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "potential must start at x = 0, got {}",
            q.x_lo()
        )));
    }
    Ok(())
}

/// Solves `(-d^2/dx^2 + q) psi = lambda psi`, `psi(0) = 1`, `psi'(0) = -h` and
/// samples it at `grid_n` uniform nodes of the potential's interval.
pub fn solve_psi(q: &SampledFunction, h: f64, lambda: f64, grid_n: usize) -> Result<SolutionTrace> {
    check_left_domain(q)?;
    if grid_n < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {grid_n}")));
    }
    if !(lambda.is_finite() && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda and h must be finite, got {lambda}, {h}"
        )));
    }
    let length = q.x_hi();
    check_resolution(q, lambda, length, grid_n)?;
    Ok(trace(q, h, lambda, length, grid_n))
}

/// Rejects output grids with fewer than
/// [`MIN_TRACE_POINTS_PER_WAVELENGTH`] nodes per local wavelength.
pub(crate) fn check_resolution(q: &SampledFunction, lambda: f64, length: f64, grid_n: usize) -> Result<()> {
    let q_min = q.samples().iter().cloned().fold(f64::INFINITY, f64::min);
    let k_osc = (lambda - q_min).max(0.0).sqrt();
    if k_osc > 0.0 {
        let ppw = (grid_n - 1) as f64 * 2.0 * PI / (k_osc * length);
        if ppw < MIN_TRACE_POINTS_PER_WAVELENGTH {
            return Err(Error::GridTooCoarse {
                lambda,
                points_per_wavelength: ppw,
                required: MIN_TRACE_POINTS_PER_WAVELENGTH,
            });
        }
    }
    Ok(())
}

/// Unguarded trace on `[0, x_end]`; callers that only sample `psi` (rather
/// than integrate products of it) may use coarse output grids.
pub(crate) fn trace(q: &SampledFunction, h: f64, lambda: f64, x_end: f64, n_out: usize) -> SolutionTrace {
    let p = ode::propagate(q, h, lambda, x_end, n_out, Options { track_phase: false });
    SolutionTrace {
        lambda,
        nodes: p.nodes,
        psi: p.psi,
        dpsi: p.dpsi,
    }
}

struct Shot {
    characteristic: f64,
    phase: f64,
    sign_changes: usize,
}

fn shoot(spec: &OperatorSpec, lambda: f64) -> Shot {
    let p = ode::propagate(&spec.q, spec.bc.h, lambda, 1.0, 2, Options { track_phase: true });
    Shot {
        characteristic: p.dpsi[1] + spec.bc.big_h * p.psi[1],
        phase: p.phase_end,
        sign_changes: p.sign_changes,
    }
}

/// `W(lambda) = psi'(1, lambda) + H psi(1, lambda)`.
pub fn characteristic(spec: &OperatorSpec, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    Ok(shoot(spec, lambda).characteristic)
}

/// `j^2 pi^2 + 2(H - h) + ∫q`.
pub fn asymptotic_guess(spec: &OperatorSpec, j: usize) -> f64 {
    let jf = j as f64;
    jf * jf * PI * PI + 2.0 * (spec.bc.big_h - spec.bc.h) + spec.q.integral()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenvalueResult {
    pub index: usize,
    pub lambda: f64,
    /// Relative width of the final bisection bracket.
    pub rel_width: f64,
    pub characteristic: f64,
}

/// Locates the `j`-th eigenvalue (zero-based).
pub fn compute_eigenvalue(spec: &OperatorSpec, j: usize) -> Result<EigenvalueResult> {
    let target = 1.0f64.atan2(-spec.bc.big_h) + j as f64 * PI;
    let offset = |s: &Shot| s.phase - target;

    let guess = asymptotic_guess(spec, j);
    let half = PI * PI * (2.0 * j as f64 - 1.0).max(1.0) / 2.0;
    let mut lo = guess - half;
    let mut hi = guess + half;
    let mut s_lo = shoot(spec, lo);
    let mut s_hi = shoot(spec, hi);

    // Slide the bracket until the Prüfer angle straddles the target.
    let mut step = half;
    let mut expansions = 0;
    while offset(&s_lo) >= 0.0 {
        if expansions == MAX_BRACKET_EXPANSIONS {
            return Err(Error::BracketFailure {
                index: j,
                reason: format!("could not move the lower end below the root (last {lo})"),
            });
        }
        hi = lo;
        s_hi = s_lo;
        lo -= step;
        step *= 2.0;
        s_lo = shoot(spec, lo);
        expansions += 1;
    }
    let mut step = half;
    while offset(&s_hi) <= 0.0 {
        if expansions == MAX_BRACKET_EXPANSIONS {
            return Err(Error::BracketFailure {
                index: j,
                reason: format!("could not move the upper end above the root (last {hi})"),
            });
        }
        lo = hi;
        s_lo = s_hi;
        hi += step;
        step *= 2.0;
        s_hi = shoot(spec, hi);
        expansions += 1;
    }

    // Narrow until no neighbouring eigenvalue remains inside, then W has a
    // single simple sign change.
    let mut iters = 0;
    while offset(&s_lo) <= -PI || offset(&s_hi) >= PI {
        let mid = 0.5 * (lo + hi);
        let s_mid = shoot(spec, mid);
        if offset(&s_mid) < 0.0 {
            lo = mid;
            s_lo = s_mid;
        } else {
            hi = mid;
            s_hi = s_mid;
        }
        iters += 1;
        if iters > MAX_BISECTIONS {
            return Err(Error::BracketFailure {
                index: j,
                reason: "failed to isolate the root".into(),
            });
        }
    }
    if s_lo.characteristic == 0.0 {
        return finish(spec, j, lo, 0.0);
    }
    if s_hi.characteristic == 0.0 {
        return finish(spec, j, hi, 0.0);
    }
    if s_lo.characteristic.signum() == s_hi.characteristic.signum() {
        return Err(Error::BracketFailure {
            index: j,
            reason: format!("characteristic has no sign change on [{lo}, {hi}]"),
        });
    }

    while hi - lo > ROOT_REL_WIDTH * (0.5 * (lo + hi)).abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let w_mid = shoot(spec, mid).characteristic;
        if w_mid == 0.0 {
            return finish(spec, j, mid, 0.0);
        }
        if w_mid.signum() == s_lo.characteristic.signum() {
            lo = mid;
            s_lo.characteristic = w_mid;
        } else {
            hi = mid;
            s_hi.characteristic = w_mid;
        }
        iters += 1;
        if iters > MAX_BISECTIONS {
            return Err(Error::BracketFailure {
                index: j,
                reason: "bisection did not converge".into(),
            });
        }
    }
    let width = hi - lo;

    // Secant polish from the bracket ends, kept inside the bracket.
    let (mut x0, mut w0) = (lo, s_lo.characteristic);
    let (mut x1, mut w1) = (hi, s_hi.characteristic);
    for _ in 0..SECANT_STEPS {
        if w1 == w0 {
            break;
        }
        let x2 = x1 - w1 * (x1 - x0) / (w1 - w0);
        if !(x2 >= lo && x2 <= hi) {
            break;
        }
        let w2 = shoot(spec, x2).characteristic;
        (x0, w0) = (x1, w1);
        (x1, w1) = (x2, w2);
        if w2 == 0.0 {
            break;
        }
    }
    let best = if w1.abs() <= w0.abs() { x1 } else { x0 };
    finish(spec, j, best, width)
}

fn finish(spec: &OperatorSpec, j: usize, lambda: f64, width: f64) -> Result<EigenvalueResult> {
    let shot = shoot(spec, lambda);
    if shot.sign_changes != j {
        return Err(Error::IndexMismatch {
            index: j,
            found: shot.sign_changes,
        });
    }
    Ok(EigenvalueResult {
        index: j,
        lambda,
        rel_width: width / lambda.abs().max(1.0),
        characteristic: shot.characteristic,
    })
}

/// Increasing list of eigenvalues `lambda_0 < lambda_1 < ...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub bc: RobinBC,
    /// `∫_0^1 q`, needed for the asymptotic offset.
    pub integral_q: f64,
    /// Largest relative bracket width over all computed roots.
    pub tol: f64,
}

impl Spectrum {
    /// Wraps externally known eigenvalues (closed forms, oracles).
    pub fn from_values(eigenvalues: Vec<f64>, bc: RobinBC, integral_q: f64) -> Result<Self> {
        check_increasing(&eigenvalues)?;
        Ok(Self {
            eigenvalues,
            bc,
            integral_q,
            tol: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `2(H - h) + ∫q`.
    pub fn offset(&self) -> f64 {
        2.0 * (self.bc.big_h - self.bc.h) + self.integral_q
    }
}

fn check_increasing(values: &[f64]) -> Result<()> {
    for (i, w) in values.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter(format!(
                "eigenvalues must be strictly increasing; positions {i} and {} hold {} and {}",
                i + 1,
                w[0],
                w[1]
            )));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("eigenvalues must be finite".into()));
    }
    Ok(())
}

/// Eigenvalues `lambda_0 ..= lambda_{j_max}`; indices are solved in parallel.
pub fn compute_spectrum(spec: &OperatorSpec, j_max: usize) -> Result<Spectrum> {
    let roots = (0..=j_max)
        .into_par_iter()
        .map(|j| compute_eigenvalue(spec, j))
        .collect::<Result<Vec<_>>>()?;
    let tol = roots.iter().fold(0.0f64, |m, r| m.max(r.rel_width));
    let eigenvalues: Vec<f64> = roots.into_iter().map(|r| r.lambda).collect();
    check_increasing(&eigenvalues)?;
    Ok(Spectrum {
        eigenvalues,
        bc: spec.bc,
        integral_q: spec.q.integral(),
        tol,
    })
}

/// Selected eigenvalues `lambda_{m}` for the given indices (any order).
pub fn eigenvalues_at(spec: &OperatorSpec, indices: &[usize]) -> Result<Vec<f64>> {
    indices
        .par_iter()
        .map(|&j| compute_eigenvalue(spec, j).map(|r| r.lambda))
        .collect()
}

/// `r_j = lambda_j - j^2 pi^2 - 2(H - h) - ∫q`.
pub fn asymptotic_residuals(sp: &Spectrum) -> Vec<f64> {
    let offset = sp.offset();
    sp.eigenvalues
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let jf = j as f64;
            l - jf * jf * PI * PI - offset
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiAsymptoticReport {
    pub z: Vec<f64>,
    /// `z * max_x |psi(x, z^2) - cos(z x)|` for each `z`.
    pub scaled_deviation: Vec<f64>,
    /// Largest scaled deviation: the fitted constant of the `O(1/z)` bound.
    pub bound_constant: f64,
    /// Max over the upper half of `z` divided by max over the lower half.
    pub growth_ratio: f64,
    pub bounded: bool,
}

/// Growth ratios above this count as unbounded.
pub const MAX_GROWTH_RATIO: f64 = 2.0;

/// Measures how far `psi(x, z^2)` is from `cos(z x)` in units of `1/z`.
pub fn psi_asymptotic_check(
    q: &SampledFunction,
    h: f64,
    grid_n: usize,
    z_list: &[f64],
) -> Result<PsiAsymptoticReport> {
    if z_list.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if let Some(z) = z_list.iter().find(|&&z| !(z >= 1.0)) {
        return Err(Error::InvalidParameter(format!("z must be >= 1, got {z}")));
    }
    let scaled_deviation = z_list
        .par_iter()
        .map(|&z| {
            let t = solve_psi(q, h, z * z, grid_n)?;
            let dev = t
                .nodes
                .iter()
                .zip(&t.psi)
                .fold(0.0f64, |m, (x, p)| m.max((p - (z * x).cos()).abs()));
            Ok(dev * z)
        })
        .collect::<Result<Vec<_>>>()?;
    let bound_constant = scaled_deviation.iter().cloned().fold(0.0, f64::max);
    let mid = scaled_deviation.len() / 2;
    let lower = scaled_deviation[..mid.max(1)].iter().cloned().fold(0.0, f64::max);
    let upper = scaled_deviation[mid..].iter().cloned().fold(0.0, f64::max);
    let growth_ratio = if lower > 0.0 {
        upper / lower
    } else if upper > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(PsiAsymptoticReport {
        z: z_list.to_vec(),
        scaled_deviation,
        bound_constant,
        growth_ratio,
        bounded: growth_ratio <= MAX_GROWTH_RATIO,
    })
}
