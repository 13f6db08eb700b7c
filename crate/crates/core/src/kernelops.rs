//! The kernel `s(y, x)` on `[-2a, 2a]^2`, the operator `T_s` with kernel
//! `2s`, the function `g = (1 - T_s) E(q_1 - q_2)` and their checks.
//!
//! With `r(z, x) = -psi_1 psi_2 + (1 + cos 2zx)/2` and the even extension
//! `E_2 r(z, x) = r(z, |x|/2)`, the kernel is fixed by
//! `∫ e^{izy} s(y, x) dy = E_2 r(z, x)`, i.e.
//! `s(y, x) = (1/π) ∫_0^∞ cos(zy) E_2 r(z, x) dz`.
//!
//! The slowly decaying part of `r` is removed analytically:
//! `E_2 r(z, x) = c(|x|/2) sin(z|x|)/(2z) + O(1/z^2)` with
//! `c(x) = (h_1 + h_2) - (1/2) ∫_0^x (q_1 + q_2)`, and the cosine transform of
//! `sin(z|x|)/(2z)` is `(1/4) 1_{|y|<|x|}`. The remainder is integrated by the
//! trapezoid rule up to `z_max`; past `z_max` it is modelled as
//! `(alpha + beta cos(z|x|) + gamma sin(z|x|))/z^2`, fitted per column, and
//! integrated in closed form with sine and cosine integrals.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{self, r_trace, PairProblem};
use crate::error::{Error, Result};
use crate::potentials::{trapezoid_weights, SampledFunction};
use crate::special::si_ci;

pub const DEFAULT_GRID_N: usize = 401;
pub const DEFAULT_Z_MAX: f64 = 200.0;
pub const DEFAULT_DZ: f64 = 0.25;
pub const DEFAULT_TAIL_TOL: f64 = 1e-4;

/// Kernel magnitude below which the tail estimate is measured in absolute
/// terms. Trace roundoff of order `1e-9` is amplified by `z^2` in the fit,
/// so nearly vanishing kernels would otherwise fail the tail test on noise.
pub const KERNEL_NOISE_FLOOR: f64 = 1e-3;

/// Nodes between `|x|` and the first `y` counted as outside the support.
pub const SUPPORT_OFFSET_NODES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelOptions {
    /// Nodes per axis on `[-2a, 2a]`; odd.
    pub grid_n: usize,
    pub z_max: f64,
    pub dz: f64,
    /// Largest admissible tail estimate relative to `max |s|`.
    pub tail_tol: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            grid_n: DEFAULT_GRID_N,
            z_max: DEFAULT_Z_MAX,
            dz: DEFAULT_DZ,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

impl KernelOptions {
    fn validate(&self) -> Result<()> {
        if self.grid_n < 3 || self.grid_n % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "kernel grid needs an odd node count >= 3, got {}",
                self.grid_n
            )));
        }
        if !(self.z_max > 0.0 && self.dz > 0.0 && self.dz < self.z_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dz < z_max, got dz = {}, z_max = {}",
                self.dz, self.z_max
            )));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tail tolerance must be positive, got {}",
                self.tail_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMeta {
    pub h1: f64,
    pub h2: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub q1_integral: f64,
    pub q2_integral: f64,
    pub q1_grid_n: usize,
    pub q2_grid_n: usize,
}

/// `s(y_i, x_k)` on a shared uniform grid of `[-2a, 2a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub a: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major, `values[i * n + k] = s(y_i, x_k)`.
    pub values: Vec<f64>,
    pub z_max: f64,
    pub dz: f64,
    /// Tail estimate relative to `max(max |s|, KERNEL_NOISE_FLOOR)`.
    pub tail_estimate: f64,
    pub max_abs: f64,
    pub meta: KernelMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelHeader {
    pub a: f64,
    pub grid_n: usize,
    pub y_range: (f64, f64),
    pub x_range: (f64, f64),
    pub z_max: f64,
    pub dz: f64,
    pub tail_estimate: f64,
    pub max_abs: f64,
    pub layout: String,
    pub meta: KernelMeta,
}

impl KernelGrid {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn step(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.n() + k]
    }

    /// Nyström matrix `M_ik = 2 s(y_i, x_k) w_k`.
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, k| 2.0 * self.at(i, k) * self.weights[k])
    }

    pub fn header(&self) -> KernelHeader {
        let (lo, hi) = (self.nodes[0], self.nodes[self.n() - 1]);
        KernelHeader {
            a: self.a,
            grid_n: self.n(),
            y_range: (lo, hi),
            x_range: (lo, hi),
            z_max: self.z_max,
            dz: self.dz,
            tail_estimate: self.tail_estimate,
            max_abs: self.max_abs,
            layout: "row i = y_i, column k = x_k".into(),
            meta: self.meta.clone(),
        }
    }

    /// Flat matrix, one line per `y` node.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::with_capacity(n * n * 12);
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|k| self.at(i, k).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// `max |s(y, x)| / max |s|` over `|y| >= |x| + offset Δ`.
    pub fn support_violation(&self, offset: usize) -> f64 {
        let m = (self.n() - 1) / 2;
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            for k in 0..self.n() {
                if i.abs_diff(m) >= k.abs_diff(m) + offset {
                    worst = worst.max(self.at(i, k).abs());
                }
            }
        }
        if self.max_abs > 0.0 {
            worst / self.max_abs
        } else {
            0.0
        }
    }

    /// Largest of `|s(y,x) - s(-y,x)|` and `|s(y,x) - s(y,-x)|`.
    pub fn parity_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in 0..n {
                let v = self.at(i, k);
                worst = worst
                    .max((v - self.at(n - 1 - i, k)).abs())
                    .max((v - self.at(i, n - 1 - k)).abs());
            }
        }
        worst
    }
}

/// `r(z, x)` for `x` in `[0, 1]`.
pub fn r_eval(pp: &PairProblem, z: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { x, lo: 0.0, hi: 1.0 });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let (_, r) = r_trace(pp, z, x, 2);
    Ok(r[1])
}

/// `c(x) = (h_1 + h_2) - (1/2) ∫_0^x (q_1 + q_2)`.
pub fn asymptote_coefficient(pp: &PairProblem, x: f64) -> Result<f64> {
    Ok(pp.h1 + pp.h2 - 0.5 * (pp.q1.integral_to(x)? + pp.q2.integral_to(x)?))
}

/// `∫_Z^∞ cos(ω z)/z^2 dz`.
fn tail_cos(omega: f64, z: f64) -> f64 {
    let w = omega.abs();
    if w == 0.0 {
        return 1.0 / z;
    }
    let (si, _) = si_ci(w * z);
    (w * z).cos() / z - w * (PI / 2.0 - si)
}

/// `∫_Z^∞ sin(ω z)/z^2 dz`.
fn tail_sin(omega: f64, z: f64) -> f64 {
    let w = omega.abs();
    if w == 0.0 {
        return 0.0;
    }
    let (_, ci) = si_ci(w * z);
    omega.signum() * ((w * z).sin() / z - w * ci)
}

struct TailFit {
    coeffs: [f64; 3],
    max_residual: f64,
}

/// Least-squares `z^2 R ≈ alpha + beta cos(z t) + gamma sin(z t)`.
fn fit_tail(zs: &[f64], rem: &[f64], t: f64) -> TailFit {
    let a = DMatrix::from_fn(zs.len(), 3, |j, c| match c {
        0 => 1.0,
        1 => (zs[j] * t).cos(),
        _ => (zs[j] * t).sin(),
    });
    let b = DVector::from_iterator(zs.len(), zs.iter().zip(rem).map(|(z, r)| z * z * r));
    let svd = a.clone().svd(true, true);
    let sol = svd
        .solve(&b, 1e-10 * svd.singular_values.max())
        .unwrap_or_else(|_| DVector::zeros(3));
    let max_residual = (a * &sol - b).amax();
    TailFit {
        coeffs: [sol[0], sol[1], sol[2]],
        max_residual,
    }
}

/// Builds `s` on `[-2a, 2a]^2` for the pair `pp`.
pub fn build_s(pp: &PairProblem, opts: &KernelOptions) -> Result<KernelGrid> {
    opts.validate()?;
    let a = pp.a;
    let n = opts.grid_n;
    let m = (n - 1) / 2;
    let delta = 4.0 * a / (n - 1) as f64;
    let half: Vec<f64> = (0..=m).map(|k| if k == m { 2.0 * a } else { k as f64 * delta }).collect();
    let c: Vec<f64> = half
        .iter()
        .map(|&x| asymptote_coefficient(pp, (0.5 * x).min(a)))
        .collect::<Result<_>>()?;

    let nz = (opts.z_max / opts.dz).round().max(2.0) as usize;
    let dz = opts.z_max / nz as f64;
    let zs: Vec<f64> = (0..=nz).map(|j| j as f64 * dz).collect();

    // remainder R(z, x_k) = E_2 r - c sin(z x)/(2z), one row per z
    let rem: Vec<Vec<f64>> = zs
        .par_iter()
        .map(|&z| {
            let (_, r) = r_trace(pp, z, a, m + 1);
            (0..=m)
                .map(|k| {
                    let x = half[k];
                    let lead = if z == 0.0 { 0.5 * x } else { (z * x).sin() / (2.0 * z) };
                    if k == 0 {
                        0.0
                    } else {
                        r[k] - c[k] * lead
                    }
                })
                .collect()
        })
        .collect();

    let wz = trapezoid_weights(nz + 1, dz);
    let cos_mat = DMatrix::from_fn(m + 1, nz + 1, |i, j| wz[j] * (zs[j] * half[i]).cos() / PI);
    let rem_mat = DMatrix::from_fn(nz + 1, m + 1, |j, k| rem[j][k]);
    let mut quad = cos_mat * rem_mat;

    // tail past z_max
    let j_fit = nz / 2;
    let z_top = zs[nz];
    let fits: Vec<Option<TailFit>> = (0..=m)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return None;
            }
            let col: Vec<f64> = (j_fit..=nz).map(|j| rem[j][k]).collect();
            Some(fit_tail(&zs[j_fit..], &col, half[k]))
        })
        .collect();
    let mut tail_abs: f64 = 0.0;
    for (k, fit) in fits.iter().enumerate() {
        let Some(fit) = fit else { continue };
        tail_abs = tail_abs.max(fit.max_residual / (PI * z_top));
        let [alpha, beta, gamma] = fit.coeffs;
        let t = half[k];
        for i in 0..=m {
            let y = half[i];
            let tail = alpha * tail_cos(y, z_top)
                + 0.5 * beta * (tail_cos(y + t, z_top) + tail_cos(y - t, z_top))
                + 0.5 * gamma * (tail_sin(t + y, z_top) + tail_sin(t - y, z_top));
            quad[(i, k)] += tail / PI;
        }
    }

    // analytic box part
    for k in 1..=m {
        for i in 0..=m {
            let b = match i.cmp(&k) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            };
            quad[(i, k)] += 0.25 * c[k] * b;
        }
    }

    let nodes: Vec<f64> = (0..n)
        .map(|p| {
            let v = half[p.abs_diff(m)];
            if p < m {
                -v
            } else {
                v
            }
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            values[i * n + k] = quad[(i.abs_diff(m), k.abs_diff(m))];
        }
    }
    let max_abs = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tail_estimate = tail_abs / max_abs.max(KERNEL_NOISE_FLOOR);
    if tail_estimate > opts.tail_tol {
        return Err(Error::TailTooLarge {
            estimate: tail_estimate,
            tolerance: opts.tail_tol,
        });
    }
    Ok(KernelGrid {
        a,
        weights: trapezoid_weights(n, delta),
        nodes,
        values,
        z_max: z_top,
        dz,
        tail_estimate,
        max_abs,
        meta: KernelMeta {
            h1: pp.h1,
            h2: pp.h2,
            big_h: pp.big_h,
            q1_integral: pp.q1.integral(),
            q2_integral: pp.q2.integral(),
            q1_grid_n: pp.q1.grid_n(),
            q2_grid_n: pp.q2.grid_n(),
        },
    })
}

fn column_norm(k: &KernelGrid, col: usize, q: f64) -> f64 {
    let sum: f64 = (0..k.n())
        .map(|i| k.weights[i] * k.at(i, col).abs().powf(q))
        .sum();
    sum.powf(1.0 / q)
}

/// `max_x ‖s(·, x)‖_{L^q}` over the grid columns.
pub fn sup_norm_columns(k: &KernelGrid, q_exp: f64) -> Result<f64> {
    if !(q_exp > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "column norm exponent must exceed 1, got {q_exp}"
        )));
    }
    Ok((0..k.n()).map(|c| column_norm(k, c, q_exp)).fold(0.0, f64::max))
}

fn check_domain(k: &KernelGrid, u: &SampledFunction) -> Result<()> {
    let two_a = 2.0 * k.a;
    if (u.x_lo() + two_a).abs() > 1e-12 || (u.x_hi() - two_a).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "function must live on [-{two_a}, {two_a}], got [{}, {}]",
            u.x_lo(),
            u.x_hi()
        )));
    }
    Ok(())
}

fn apply_raw(k: &KernelGrid, u: &[f64]) -> Vec<f64> {
    let n = k.n();
    (0..n)
        .map(|i| (0..n).map(|c| 2.0 * k.at(i, c) * k.weights[c] * u[c]).sum())
        .collect()
}

/// `(T_s u)(y) = 2 ∫ s(y, x) u(x) dx` on the kernel grid; `u` is resampled
/// when its grid differs.
pub fn apply_ts(k: &KernelGrid, u: &SampledFunction) -> Result<SampledFunction> {
    check_domain(k, u)?;
    let lo = k.nodes[0];
    let hi = k.nodes[k.n() - 1];
    let samples = if u.grid_n() == k.n() {
        u.samples().to_vec()
    } else {
        k.nodes.iter().map(|&x| u.eval_clamped(x)).collect()
    };
    SampledFunction::new(lo, hi, apply_raw(k, &samples))
}

/// `E(q_1 - q_2)` at the kernel nodes.
pub fn extended_difference(pp: &PairProblem, k: &KernelGrid) -> Vec<f64> {
    k.nodes.iter().map(|&y| pp.diff_at(0.5 * y.abs())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GFunction {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub p: f64,
}

impl GFunction {
    pub fn as_sampled(&self) -> Result<SampledFunction> {
        SampledFunction::new(self.nodes[0], self.nodes[self.nodes.len() - 1], self.values.clone())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,g\n");
        for (y, g) in self.nodes.iter().zip(&self.values) {
            out.push_str(&format!("{y},{g}\n"));
        }
        out
    }
}

fn require_tail_match(pp: &PairProblem) -> Result<()> {
    if !pp.tail_matches() {
        return Err(Error::InvalidParameter(format!(
            "q1 - q2 must vanish on [a, 1]; max difference there is {}",
            pp.tail_mismatch
        )));
    }
    Ok(())
}

/// `g = E(q_1 - q_2) - T_s E(q_1 - q_2)`.
pub fn g_compute(pp: &PairProblem, k: &KernelGrid, p: f64) -> Result<GFunction> {
    require_tail_match(pp)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let ed = extended_difference(pp, k);
    let ted = apply_raw(k, &ed);
    Ok(GFunction {
        nodes: k.nodes.clone(),
        values: ed.iter().zip(&ted).map(|(e, t)| e - t).collect(),
        p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderReport {
    pub p: f64,
    /// `‖T_s E(q_1 - q_2)‖_p^p / 2^p`
    pub lhs: f64,
    /// `2^{p+1} √a ‖q_1 - q_2‖_{L^1(0,a)}^p sup_x ‖s(·,x)‖_{2p}^p`
    pub rhs: f64,
    pub slack: f64,
    /// Same bound with `2^{2p+1}`, which also accounts for `‖E u‖_1 = 4 ‖u‖_1`.
    pub rhs_chain: f64,
    pub holds: bool,
}

pub fn holder_bound_check(pp: &PairProblem, k: &KernelGrid, p: f64) -> Result<HolderReport> {
    require_tail_match(pp)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in [1, inf), got {p}")));
    }
    let ed = extended_difference(pp, k);
    let ted = apply_raw(k, &ed);
    let lhs: f64 = ted
        .iter()
        .zip(&k.weights)
        .map(|(v, w)| w * v.abs().powf(p))
        .sum::<f64>()
        / 2f64.powf(p);
    // ‖q_1 - q_2‖_{L^1(0,a)} on the half grid x = |y|/2
    let m = (k.n() - 1) / 2;
    let wh = trapezoid_weights(m + 1, k.step() / 2.0);
    let d_l1: f64 = (0..=m).map(|j| wh[j] * ed[m + j].abs()).sum();
    let sup = sup_norm_columns(k, 2.0 * p)?.powf(p);
    let core = k.a.sqrt() * d_l1.powf(p) * sup;
    let rhs = 2f64.powf(p + 1.0) * core;
    Ok(HolderReport {
        p,
        lhs,
        rhs,
        slack: rhs - lhs,
        rhs_chain: 2f64.powf(2.0 * p + 1.0) * core,
        holds: lhs <= rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourierEntry {
    pub z: f64,
    pub transform: f64,
    pub f: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierReport {
    pub entries: Vec<FourierEntry>,
    pub max_abs_f: f64,
    pub max_deviation: f64,
    /// `max_deviation / (1 + max |f|)`
    pub relative: f64,
}

/// `∫ e^{izy} g(y) dy` against the certificate `f(z)`.
pub fn fourier_consistency(pp: &PairProblem, k: &KernelGrid, g: &GFunction, z_list: &[f64]) -> Result<FourierReport> {
    if g.nodes.len() != k.n() {
        return Err(Error::InvalidGrid(format!(
            "g has {} nodes, kernel grid has {}",
            g.nodes.len(),
            k.n()
        )));
    }
    let entries = z_list
        .par_iter()
        .map(|&z| {
            let transform: f64 = (0..k.n())
                .map(|i| k.weights[i] * (z * k.nodes[i]).cos() * g.values[i])
                .sum();
            let f = certificate::f_eval(pp, z)?;
            Ok(FourierEntry {
                z,
                transform,
                f,
                deviation: (transform - f).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_f = entries.iter().map(|e| e.f.abs()).fold(0.0, f64::max);
    let max_deviation = entries.iter().map(|e| e.deviation).fold(0.0, f64::max);
    Ok(FourierReport {
        relative: max_deviation / (1.0 + max_abs_f),
        entries,
        max_abs_f,
        max_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundtripEntry {
    pub z: f64,
    pub x: f64,
    pub transform: f64,
    pub expected: f64,
    pub deviation: f64,
}

/// `∫ e^{izy} s(y, x) dy` against `E_2 r(z, x)` at kernel nodes nearest to
/// the requested `x`.
pub fn roundtrip_check(pp: &PairProblem, k: &KernelGrid, probes: &[(f64, f64)]) -> Result<Vec<RoundtripEntry>> {
    probes
        .par_iter()
        .map(|&(z, x)| {
            let two_a = 2.0 * k.a;
            if x.abs() > two_a {
                return Err(Error::OutOfDomain { x, lo: -two_a, hi: two_a });
            }
            let col = ((x + two_a) / k.step()).round() as usize;
            let xk = k.nodes[col.min(k.n() - 1)];
            let transform: f64 = (0..k.n())
                .map(|i| k.weights[i] * (z * k.nodes[i]).cos() * k.at(i, col))
                .sum();
            let expected = r_eval(pp, z, 0.5 * xk.abs())?;
            Ok(RoundtripEntry {
                z,
                x: xk,
                transform,
                expected,
                deviation: (transform - expected).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionRow {
    pub n: usize,
    /// Induced `L^1` norm of the discretized `T_s^n`.
    pub norm: f64,
    /// `(4 √a sup_x ‖s(·,x)‖_2)^n / √(n!)`
    pub bound: f64,
    /// Largest `‖T_s^n u‖_1 / ‖u‖_1` over the probe set.
    pub probe_ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub sup_l2: f64,
    pub rows: Vec<ContractionRow>,
    pub holds: bool,
}

fn l1(w: &[f64], u: &[f64]) -> f64 {
    w.iter().zip(u).map(|(w, v)| w * v.abs()).sum()
}

/// Operator-norm estimate for `T_s^n`, `n = 1..=n_max`, against the
/// factorial bound. Probe vectors are given at the kernel nodes.
pub fn contraction_check(k: &KernelGrid, n_max: usize, probes: &[Vec<f64>]) -> Result<ContractionReport> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    if let Some(p) = probes.iter().find(|p| p.len() != k.n()) {
        return Err(Error::InvalidGrid(format!(
            "probe has {} values, kernel grid has {}",
            p.len(),
            k.n()
        )));
    }
    let sup_l2 = sup_norm_columns(k, 2.0)?;
    let base = 4.0 * k.a.sqrt() * sup_l2;
    let mat = k.operator_matrix();
    let mut power = mat.clone();
    let mut probe_state: Vec<DVector<f64>> = probes.iter().map(|p| DVector::from_column_slice(p)).collect();
    let mut rows = Vec::with_capacity(n_max);
    let mut fact = 1.0f64;
    for n in 1..=n_max {
        if n > 1 {
            power = &mat * &power;
        }
        fact *= n as f64;
        let norm = (0..k.n())
            .map(|c| {
                let s: f64 = (0..k.n()).map(|i| k.weights[i] * power[(i, c)].abs()).sum();
                s / k.weights[c]
            })
            .fold(0.0, f64::max);
        let mut probe_ratio: f64 = 0.0;
        for (state, p) in probe_state.iter_mut().zip(probes) {
            *state = &mat * &*state;
            let den = l1(&k.weights, p);
            if den > 0.0 {
                probe_ratio = probe_ratio.max(l1(&k.weights, state.as_slice()) / den);
            }
        }
        let bound = base.powi(n as i32) / fact.sqrt();
        rows.push(ContractionRow {
            n,
            norm,
            bound,
            probe_ratio,
            holds: norm <= bound && probe_ratio <= norm * (1.0 + 1e-12),
        });
    }
    Ok(ContractionReport {
        sup_l2,
        holds: rows.iter().all(|r| r.holds),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub condition_number: f64,
    /// `‖u - E(q_1 - q_2)‖_1 / ‖E(q_1 - q_2)‖_1` (absolute when the
    /// difference vanishes).
    pub rel_error: f64,
}

/// Solves `(1 - T_s) u = g` and compares `u` with `E(q_1 - q_2)`.
pub fn fixed_point_check(pp: &PairProblem, k: &KernelGrid, g: &GFunction) -> Result<FixedPointReport> {
    let n = k.n();
    let a = DMatrix::identity(n, n) - k.operator_matrix();
    let sv = a.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) {
        return Err(Error::Singular("1 - T_s is singular on this grid".into()));
    }
    let rhs = DVector::from_column_slice(&g.values);
    let u = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("LU solve of 1 - T_s failed".into()))?;
    let ed = extended_difference(pp, k);
    let diff: Vec<f64> = u.iter().zip(&ed).map(|(a, b)| a - b).collect();
    let den = l1(&k.weights, &ed);
    let num = l1(&k.weights, &diff);
    Ok(FixedPointReport {
        condition_number: smax / smin,
        rel_error: if den > 0.0 { num / den } else { num },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_pair(h1: f64, h2: f64, a: f64) -> PairProblem {
        let z = SampledFunction::new(0.0, 1.0, vec![0.0; 101]).unwrap();
        PairProblem::new(z.clone(), h1, z, h2, 0.0, a).unwrap()
    }

    fn small() -> KernelOptions {
        KernelOptions {
            grid_n: 81,
            z_max: 80.0,
            tail_tol: 1e-3,
            ..KernelOptions::default()
        }
    }

    #[test]
    fn tail_integrals_match_quadrature() {
        // midpoint quadrature of the defining integrals on [Z, Z + L] plus a crude far tail
        let z0 = 10.0;
        for omega in [0.0, 0.3, 1.7, -2.2] {
            let (mut ic, mut is) = (0.0, 0.0);
            let h = 1e-3;
            let steps = 2_000_000;
            for j in 0..steps {
                let z = z0 + (j as f64 + 0.5) * h;
                ic += (omega * z).cos() / (z * z) * h;
                is += (omega * z).sin() / (z * z) * h;
            }
            let end = z0 + steps as f64 * h;
            if omega == 0.0 {
                ic += 1.0 / end;
            }
            assert!((ic - tail_cos(omega, z0)).abs() < 1e-6, "omega {omega}");
            assert!((is - tail_sin(omega, z0)).abs() < 1e-6, "omega {omega}");
        }
    }

    #[test]
    fn r_closed_forms() {
        let pp = zero_pair(0.0, 0.0, 0.5);
        for z in [0.5f64, 3.0, 17.0] {
            for x in [0.0, 0.3, 1.0] {
                assert!(r_eval(&pp, z, x).unwrap().abs() < 1e-9);
            }
        }
        let pp = zero_pair(1.0, 0.0, 0.5);
        for z in [0.5f64, 3.0, 17.0] {
            for x in [0.1, 0.3, 1.0] {
                let expect = (2.0 * z * x).sin() / (2.0 * z);
                assert!((r_eval(&pp, z, x).unwrap() - expect).abs() < 1e-9);
            }
        }
        assert!(r_eval(&pp, 1.0, 1.5).is_err());
    }

    #[test]
    fn degenerate_pair_collapses() {
        let q = SampledFunction::from_fn(0.0, 1.0, 201, |x| (4.0 * x).sin()).unwrap();
        let pp = PairProblem::new(q.clone(), 0.4, q, 0.4, 1.0, 0.5).unwrap();
        let zero = zero_pair(0.0, 0.0, 0.5);
        // r vanishes up to trace roundoff
        let k = build_s(&zero, &small()).unwrap();
        assert!(k.max_abs < 1e-7, "{}", k.max_abs);
        assert!(sup_norm_columns(&k, 2.0).unwrap() < 1e-7);
        let g = g_compute(&zero, &k, 1.0).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        let c = contraction_check(&k, 3, &[]).unwrap();
        assert!(c.rows.iter().all(|r| r.norm < 1e-7));
        // identical nonzero data: g vanishes since q1 - q2 = 0
        let k = build_s(&pp, &small()).unwrap();
        let g = g_compute(&pp, &k, 2.0).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn box_kernel() {
        let a = 0.5;
        let pp = zero_pair(1.0, 0.0, a);
        let k = build_s(&pp, &small()).unwrap();
        let m = (k.n() - 1) / 2;
        for i in 0..k.n() {
            for c in 0..k.n() {
                let (yi, xc) = (i.abs_diff(m), c.abs_diff(m));
                let expect = if xc == 0 {
                    0.0
                } else if yi < xc {
                    0.25
                } else if yi == xc {
                    0.125
                } else {
                    0.0
                };
                assert!((k.at(i, c) - expect).abs() < 1e-6, "({i},{c}) {}", k.at(i, c));
            }
        }
        let sup = sup_norm_columns(&k, 2.0).unwrap();
        assert!((sup - 0.25 * (4.0 * a).sqrt()).abs() < 0.02 * sup);
        // T_s 1 = 2a - |y|
        let one = SampledFunction::new(-2.0 * a, 2.0 * a, vec![1.0; k.n()]).unwrap();
        let t = apply_ts(&k, &one).unwrap();
        for (y, v) in k.nodes.iter().zip(t.samples()) {
            assert!((v - (2.0 * a - y.abs())).abs() < 2.0 * k.step(), "y={y}");
        }
        assert!(k.parity_defect() == 0.0);
        assert!(k.support_violation(1) < 1e-6);
    }

    #[test]
    fn apply_ts_is_linear() {
        let pp = zero_pair(1.0, 0.0, 0.25);
        let k = build_s(&pp, &small()).unwrap();
        let u = SampledFunction::from_fn(-0.5, 0.5, k.n(), |x| x.cos()).unwrap();
        let v = SampledFunction::from_fn(-0.5, 0.5, k.n(), |x| x * x).unwrap();
        let comb = SampledFunction::from_fn(-0.5, 0.5, k.n(), |x| 2.0 * x.cos() - 3.0 * x * x).unwrap();
        let tu = apply_ts(&k, &u).unwrap();
        let tv = apply_ts(&k, &v).unwrap();
        let tc = apply_ts(&k, &comb).unwrap();
        for i in 0..k.n() {
            let lin = 2.0 * tu.samples()[i] - 3.0 * tv.samples()[i];
            assert!((tc.samples()[i] - lin).abs() < 1e-14);
        }
        let wrong = SampledFunction::from_fn(0.0, 1.0, 11, |x| x).unwrap();
        assert!(apply_ts(&k, &wrong).is_err());
    }

    #[test]
    fn options_are_validated() {
        let pp = zero_pair(1.0, 0.0, 0.5);
        let mut o = small();
        o.grid_n = 80;
        assert!(build_s(&pp, &o).is_err());
        let mut o = small();
        o.dz = 0.0;
        assert!(build_s(&pp, &o).is_err());
        assert!(sup_norm_columns(&build_s(&pp, &small()).unwrap(), 1.0).is_err());
    }
}
