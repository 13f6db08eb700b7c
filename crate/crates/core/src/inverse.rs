//! Recovery of `q` on `[0, a]` and of `h` from `q` on `[a, 1]`, `H` and a
//! finite list of indexed eigenvalues.
//!
//! The unknown part of the potential is expanded in `cos(k π x / a)`,
//! `k < M`, and glued to the known part. The parameters
//! `theta = (c_0, ..., c_{M-1}, h)` minimise
//! `Σ_j (lambda_{m_j}(theta) - s_j)^2 / w_j + mu ‖c‖^2`, `w_j = max(1, s_j)^2`,
//! by Levenberg-Marquardt with a central-difference Jacobian.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::SubSpectrum;
use crate::error::{Error, Result};
use crate::potentials::{trapezoid_weights, SampledFunction};
use crate::sturm::{eigenvalues_at, OperatorSpec, RobinBC, Spectrum};

pub const DEFAULT_MAX_ITER: usize = 60;
pub const INITIAL_DAMPING: f64 = 1e-3;
pub const DAMPING_FACTOR: f64 = 3.0;
pub const STEP_TOL: f64 = 1e-10;
pub const REL_MISFIT_TOL: f64 = 1e-12;
const FD_REL_STEP: f64 = 1e-5;
const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionProblem {
    pub known_part: SampledFunction,
    pub a: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    /// `(m_j, s_j)` pairs.
    pub targets: Vec<(usize, f64)>,
    pub basis_dim: usize,
    pub mu: f64,
    /// Nodes of the assembled potential on `[0, 1]`.
    pub grid_n: usize,
    pub max_iter: usize,
    /// Starting point `(coefficients, h)`; zeros when absent.
    pub initial: Option<(Vec<f64>, f64)>,
}

impl ReconstructionProblem {
    pub fn new(
        known_part: SampledFunction,
        a: f64,
        big_h: f64,
        targets: Vec<(usize, f64)>,
        basis_dim: usize,
        grid_n: usize,
    ) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!("a must lie in (0, 1), got {a}")));
        }
        if (known_part.x_lo() - a).abs() > 1e-12 || known_part.x_hi() != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "known part must live on [{a}, 1], got [{}, {}]",
                known_part.x_lo(),
                known_part.x_hi()
            )));
        }
        if basis_dim == 0 {
            return Err(Error::InvalidParameter("basis dimension must be positive".into()));
        }
        if grid_n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {grid_n}")));
        }
        if !big_h.is_finite() || targets.iter().any(|t| !t.1.is_finite()) {
            return Err(Error::InvalidParameter("H and targets must be finite".into()));
        }
        let mut targets = targets;
        targets.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        if targets.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("target indices must be distinct".into()));
        }
        Ok(Self {
            known_part,
            a,
            big_h,
            targets,
            basis_dim,
            mu: 0.0,
            grid_n,
            max_iter: DEFAULT_MAX_ITER,
            initial: None,
        })
    }

    pub fn n_params(&self) -> usize {
        self.basis_dim + 1
    }

    fn indices(&self) -> Vec<usize> {
        self.targets.iter().map(|t| t.0).collect()
    }

    fn weight(s: f64) -> f64 {
        s.abs().max(1.0).powi(2)
    }
}

/// `Σ_k c_k cos(k π x / a)`.
pub fn basis_eval(coeffs: &[f64], a: f64, x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * (k as f64 * PI * x / a).cos())
        .sum()
}

/// The basis expansion on `[0, a]` glued to `known_part` on `(a, 1]`.
pub fn assemble(coeffs: &[f64], a: f64, known_part: &SampledFunction, grid_n: usize) -> Result<SampledFunction> {
    SampledFunction::from_fn(0.0, 1.0, grid_n, |x| {
        if x <= a {
            basis_eval(coeffs, a, x)
        } else {
            known_part.eval_clamped(x)
        }
    })
}

/// Eigenvalues at the target indices for `(coeffs, h)`.
pub fn forward_map(coeffs: &[f64], h: f64, problem: &ReconstructionProblem) -> Result<Vec<f64>> {
    if coeffs.len() != problem.basis_dim {
        return Err(Error::InvalidParameter(format!(
            "expected {} coefficients, got {}",
            problem.basis_dim,
            coeffs.len()
        )));
    }
    if coeffs.iter().any(|c| !c.is_finite()) || !h.is_finite() {
        return Err(Error::InvalidParameter("coefficients and h must be finite".into()));
    }
    let q = assemble(coeffs, problem.a, &problem.known_part, problem.grid_n)?;
    let spec = OperatorSpec::new(q, RobinBC::new(h, problem.big_h)?)?;
    eigenvalues_at(&spec, &problem.indices())
}

fn residuals(theta: &[f64], problem: &ReconstructionProblem) -> Result<DVector<f64>> {
    let m = problem.basis_dim;
    let lam = forward_map(&theta[..m], theta[m], problem)?;
    let reg = problem.mu.sqrt();
    let mut out = Vec::with_capacity(lam.len() + if reg > 0.0 { m } else { 0 });
    for (l, &(_, s)) in lam.iter().zip(&problem.targets) {
        out.push((l - s) / ReconstructionProblem::weight(s).sqrt());
    }
    if reg > 0.0 {
        out.extend(theta[..m].iter().map(|c| reg * c));
    }
    Ok(DVector::from_vec(out))
}

fn jacobian(theta: &[f64], problem: &ReconstructionProblem) -> Result<DMatrix<f64>> {
    let cols = (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let step = FD_REL_STEP * (1.0 + theta[i].abs());
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[i] += step;
            minus[i] -= step;
            let rp = residuals(&plus, problem)?;
            let rm = residuals(&minus, problem)?;
            Ok((rp - rm) / (2.0 * step))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Eigenvalues of the Gauss-Newton Hessian `J^T J` (data part only), ascending.
pub fn hessian_spectrum(problem: &ReconstructionProblem, coeffs: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut unreg = problem.clone();
    unreg.mu = 0.0;
    let mut theta = coeffs.to_vec();
    theta.push(h);
    let j = jacobian(&theta, &unreg)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(j.transpose() * &j).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionResult {
    pub coefficients: Vec<f64>,
    pub h: f64,
    /// Misfit after each accepted step, starting with the initial point.
    pub misfit_history: Vec<f64>,
    pub final_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub damping: f64,
    pub hessian_eigenvalues: Vec<f64>,
}

impl ReconstructionResult {
    /// `iteration,misfit`
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,misfit\n");
        for (i, m) in self.misfit_history.iter().enumerate() {
            out.push_str(&format!("{i},{m}\n"));
        }
        out
    }
}

/// Levenberg-Marquardt on the weighted eigenvalue misfit.
///
/// Stops when the step norm drops below [`STEP_TOL`] or the misfit relative
/// to `Σ s_j^2 / w_j` below [`REL_MISFIT_TOL`]. Running out of iterations, or
/// damping growing past `1e12` without an accepted step, returns the best
/// iterate flagged as not converged.
pub fn reconstruct(problem: &ReconstructionProblem) -> Result<ReconstructionResult> {
    let m = problem.basis_dim;
    let needed = m + 1;
    if problem.targets.len() < needed {
        return Err(Error::TooFewPoints {
            needed,
            got: problem.targets.len(),
        });
    }
    let mut theta: Vec<f64> = match &problem.initial {
        Some((c, h)) if c.len() == m => c.iter().copied().chain([*h]).collect(),
        Some((c, _)) => {
            return Err(Error::InvalidParameter(format!(
                "initial guess has {} coefficients, expected {m}",
                c.len()
            )))
        }
        None => vec![0.0; needed],
    };
    let data_scale: f64 = problem
        .targets
        .iter()
        .map(|&(_, s)| s * s / ReconstructionProblem::weight(s))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);

    let mut r = residuals(&theta, problem)?;
    let mut misfit = r.norm_squared();
    let mut history = vec![misfit];
    let mut damping = INITIAL_DAMPING;
    let mut converged = misfit / data_scale < REL_MISFIT_TOL;
    let mut iterations = 0;

    while !converged && iterations < problem.max_iter {
        iterations += 1;
        let j = jacobian(&theta, problem)?;
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * &r;
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut lhs = jtj.clone();
            for i in 0..needed {
                lhs[(i, i)] += damping * jtj[(i, i)].max(diag_floor);
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= DAMPING_FACTOR;
                continue;
            };
            let delta = -chol.solve(&grad);
            let step_norm = delta.norm();
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let r_trial = residuals(&trial, problem)?;
            let m_trial = r_trial.norm_squared();
            if m_trial < misfit {
                theta = trial;
                r = r_trial;
                misfit = m_trial;
                history.push(misfit);
                damping /= DAMPING_FACTOR;
                accepted = true;
                converged = step_norm < STEP_TOL || misfit / data_scale < REL_MISFIT_TOL;
                break;
            }
            if step_norm < STEP_TOL {
                converged = true;
                break;
            }
            damping *= DAMPING_FACTOR;
        }
        if !accepted && !converged {
            break;
        }
    }

    let coefficients = theta[..m].to_vec();
    let h = theta[m];
    let hessian_eigenvalues = hessian_spectrum(problem, &coefficients, h)?;
    Ok(ReconstructionResult {
        coefficients,
        h,
        misfit_history: history,
        final_residual: misfit,
        iterations,
        converged,
        damping,
        hessian_eigenvalues,
    })
}

/// Relative `L^2(0, a)` distance between two coefficient vectors.
pub fn relative_l2_error(estimate: &[f64], truth: &[f64], a: f64) -> f64 {
    let n = 4001;
    let w = trapezoid_weights(n, a / (n - 1) as f64);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, w) in w.iter().enumerate() {
        let x = a * i as f64 / (n - 1) as f64;
        let t = basis_eval(truth, a, x);
        let e = basis_eval(estimate, a, x);
        num += w * (e - t).powi(2);
        den += w * t * t;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Even,
    Odd,
    EveryK(usize),
}

impl Scenario {
    pub fn indices(&self, len: usize) -> Result<Vec<usize>> {
        let (start, stride) = match *self {
            Scenario::Even => (0, 2),
            Scenario::Odd => (1, 2),
            Scenario::EveryK(0) => {
                return Err(Error::InvalidParameter("every_k needs k >= 1".into()))
            }
            Scenario::EveryK(k) => (0, k),
        };
        Ok((start..len).step_by(stride).collect())
    }
}

/// Index selection of a computed spectrum.
pub fn subspectrum_scenarios(full: &Spectrum, kind: Scenario) -> Result<SubSpectrum> {
    SubSpectrum::new(full.clone(), kind.indices(full.len())?)
}
