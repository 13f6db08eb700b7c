//! Sampled real functions on intervals and the potential descriptions that
//! materialize into them.
//!
//! A [`SampledFunction`] stores values on a uniform grid that includes both
//! endpoints. Between nodes it is the piecewise-linear interpolant, so the
//! composite trapezoid rule integrates it exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when deciding whether a point lies inside an interval.
const DOMAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampled {
    x_lo: f64,
    x_hi: f64,
    samples: Vec<f64>,
}

/// Values on a uniform grid of `[x_lo, x_hi]`, interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampled")]
pub struct SampledFunction {
    x_lo: f64,
    x_hi: f64,
    samples: Vec<f64>,
}

impl TryFrom<RawSampled> for SampledFunction {
    type Error = Error;

    fn try_from(raw: RawSampled) -> Result<Self> {
        SampledFunction::new(raw.x_lo, raw.x_hi, raw.samples)
    }
}

impl SampledFunction {
    pub fn new(x_lo: f64, x_hi: f64, samples: Vec<f64>) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) {
            return Err(Error::InvalidGrid(format!(
                "interval [{x_lo}, {x_hi}] is empty or not finite"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            x_lo,
            x_hi,
            samples,
        })
    }

    /// Samples `f` at `grid_n` uniform nodes of `[x_lo, x_hi]`.
    pub fn from_fn(x_lo: f64, x_hi: f64, grid_n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if grid_n < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 samples, got {grid_n}"
            )));
        }
        let samples = uniform_nodes(x_lo, x_hi, grid_n).map(f).collect();
        Self::new(x_lo, x_hi, samples)
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    pub fn grid_n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn step(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.samples.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.samples.len() {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        uniform_nodes(self.x_lo, self.x_hi, self.samples.len()).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = DOMAIN_EPS * (self.x_hi - self.x_lo);
        x >= self.x_lo - slack && x <= self.x_hi + slack
    }

    /// Piecewise-linear evaluation; points outside the interval are an error.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutOfDomain {
                x,
                lo: self.x_lo,
                hi: self.x_hi,
            });
        }
        Ok(self.eval_clamped(x))
    }

    pub(crate) fn eval_clamped(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.samples[i] + t * (self.samples[i + 1] - self.samples[i])
    }

    /// Interval index `i` and local coordinate `t in [0, 1]` with
    /// `x = node(i) + t * step`.
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let last = self.samples.len() - 2;
        let u = ((x - self.x_lo) / self.step()).max(0.0);
        let i = (u.floor() as usize).min(last);
        (i, (u - i as f64).clamp(0.0, 1.0))
    }

    /// Integral over the whole interval (exact for the interpolant).
    pub fn integral(&self) -> f64 {
        let s = &self.samples;
        let inner: f64 = s[1..s.len() - 1].iter().sum();
        self.step() * (inner + 0.5 * (s[0] + s[s.len() - 1]))
    }

    /// Integral of the interpolant from `x_lo` to `x`.
    pub fn integral_to(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutOfDomain {
                x,
                lo: self.x_lo,
                hi: self.x_hi,
            });
        }
        let h = self.step();
        let (i, t) = self.locate(x);
        let s = &self.samples;
        let mut acc = 0.0;
        for k in 0..i {
            acc += 0.5 * h * (s[k] + s[k + 1]);
        }
        let fx = s[i] + t * (s[i + 1] - s[i]);
        Ok(acc + 0.5 * t * h * (s[i] + fx))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.x_lo, self.x_hi, self.samples.iter().map(|&v| f(v)).collect())
    }

    /// `self - other` on the grid of `self`; `other` is interpolated.
    pub fn minus(&self, other: &SampledFunction) -> Result<Self> {
        let samples = self
            .nodes()
            .into_iter()
            .zip(&self.samples)
            .map(|(x, &v)| other.eval(x).map(|w| v - w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.x_lo, self.x_hi, samples)
    }

    /// Resamples onto `grid_n` uniform nodes of `[lo, hi]`.
    pub fn resample(&self, lo: f64, hi: f64, grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 samples, got {grid_n}"
            )));
        }
        let samples = uniform_nodes(lo, hi, grid_n)
            .map(|x| self.eval(x))
            .collect::<Result<Vec<_>>>()?;
        Self::new(lo, hi, samples)
    }
}

/// `n` equispaced nodes of `[lo, hi]`, the last one exactly `hi`.
pub fn uniform_nodes(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n.max(2) - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + i as f64 * step })
}

/// Composite trapezoid weights for `n` nodes with spacing `step`.
pub fn trapezoid_weights(n: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; n];
    if let Some(first) = w.first_mut() {
        *first = 0.5 * step;
    }
    if let Some(last) = w.last_mut() {
        *last = 0.5 * step;
    }
    w
}

/// Config-level description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: f64,
    },
    /// `slope * x + intercept`
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `amplitude * sin(frequency * x + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// The first piece whose interval contains `x` supplies the value.
    Piecewise {
        pieces: Vec<SampledFunction>,
    },
    Samples {
        function: SampledFunction,
    },
}

impl PotentialSpec {
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(match self {
            PotentialSpec::Constant { value } => *value,
            PotentialSpec::Linear { slope, intercept } => slope * x + intercept,
            PotentialSpec::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).sin(),
            PotentialSpec::Piecewise { pieces } => {
                let piece = pieces.iter().find(|p| p.contains(x)).ok_or_else(|| {
                    Error::InvalidParameter(format!("no piecewise segment covers x = {x}"))
                })?;
                piece.eval(x)?
            }
            PotentialSpec::Samples { function } => function.eval(x)?,
        })
    }

    fn check_params(&self) -> Result<()> {
        let finite = match self {
            PotentialSpec::Constant { value } => value.is_finite(),
            PotentialSpec::Linear { slope, intercept } => slope.is_finite() && intercept.is_finite(),
            PotentialSpec::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
            PotentialSpec::Piecewise { pieces } => !pieces.is_empty(),
            PotentialSpec::Samples { .. } => true,
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "potential parameters must be finite and non-empty: {self:?}"
            )))
        }
    }
}

/// Evaluates `spec` at the `grid_n` uniform nodes of `interval`, which must
/// lie inside `[0, 1]`.
pub fn materialize(spec: &PotentialSpec, interval: (f64, f64), grid_n: usize) -> Result<SampledFunction> {
    let (lo, hi) = interval;
    if lo < 0.0 || hi > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "potential interval [{lo}, {hi}] is not inside [0, 1]"
        )));
    }
    if grid_n < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 samples, got {grid_n}"
        )));
    }
    spec.check_params()?;
    let samples = uniform_nodes(lo, hi, grid_n)
        .map(|x| spec.eval(x))
        .collect::<Result<Vec<_>>>()?;
    SampledFunction::new(lo, hi, samples)
}

/// Trapezoid approximation of `(∫|f|^p)^(1/p)`; `p = f64::INFINITY` gives the
/// maximum over nodes.
pub fn lp_norm(f: &SampledFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("L^p exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.samples().iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let w = trapezoid_weights(f.grid_n(), f.step());
    let sum: f64 = f
        .samples()
        .iter()
        .zip(&w)
        .map(|(v, w)| w * v.abs().powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Scaling and extension by parity: `u` on `[0, a]` becomes `x ↦ u(|x|/2)`
/// on `[-2a, 2a]`.
///
/// Output node `k` sits at `2 * node(|k - (n-1)|)`, so the result has
/// `2n - 1` nodes and is even at mirrored nodes bit for bit.
pub fn extend_parity(u: &SampledFunction) -> Result<SampledFunction> {
    let a = u.x_hi();
    if u.x_lo() != 0.0 || !(a > 0.0 && a <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "parity extension needs a domain [0, a] with a in (0, 1/2], got [{}, {}]",
            u.x_lo(),
            a
        )));
    }
    let s = u.samples();
    let n = s.len();
    let samples = (0..2 * n - 1).map(|k| s[k.abs_diff(n - 1)]).collect();
    SampledFunction::new(-2.0 * a, 2.0 * a, samples)
}

/// Largest `|f - g|` over the nodes of both functions that fall in `interval`.
pub fn max_abs_diff_on(f: &SampledFunction, g: &SampledFunction, interval: (f64, f64)) -> Result<f64> {
    let (lo, hi) = interval;
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
    }
    for func in [f, g] {
        if !(func.contains(lo) && func.contains(hi)) {
            return Err(Error::InvalidParameter(format!(
                "interval [{lo}, {hi}] is not inside [{}, {}]",
                func.x_lo(),
                func.x_hi()
            )));
        }
    }
    let slack = DOMAIN_EPS * (hi - lo).max(f64::MIN_POSITIVE);
    let mut probe: Vec<f64> = f
        .nodes()
        .into_iter()
        .chain(g.nodes())
        .filter(|&x| x >= lo - slack && x <= hi + slack)
        .map(|x| x.clamp(lo, hi))
        .collect();
    probe.push(lo);
    probe.push(hi);
    let mut worst: f64 = 0.0;
    for x in probe {
        worst = worst.max((f.eval_clamped(x) - g.eval_clamped(x)).abs());
    }
    Ok(worst)
}

/// True iff the node-wise difference on `interval` is at most `tol`.
pub fn equal_on(f: &SampledFunction, g: &SampledFunction, interval: (f64, f64), tol: f64) -> Result<bool> {
    Ok(max_abs_diff_on(f, g, interval)? <= tol)
}
