//! One function per subcommand. Each writes its files and reports whether
//! the checks it runs passed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use slgate_core::certificate::{self, PairProblem};
use slgate_core::counting::{CountingReport, HypothesisConfig};
use slgate_core::inverse::{self, ReconstructionProblem};
use slgate_core::kernelops;
use slgate_core::potentials::{materialize, SampledFunction};
use slgate_core::sturm::{self, OperatorSpec, RobinBC};

use crate::config::{require, ExperimentConfig, OperatorConfig, PairConfig};
use crate::error::{CliError, Result};

/// Name of the PRNG stream recorded in every output.
pub const PRNG: &str = "ChaCha8Rng::seed_from_u64";

pub struct Run<'a> {
    pub command: &'static str,
    pub config: &'a ExperimentConfig,
    pub out_dir: &'a Path,
    pub seed: u64,
}

impl Run<'_> {
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn meta(&self) -> Value {
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "prng": PRNG,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        match &self.config.output.prefix {
            Some(p) => self.out_dir.join(format!("{p}{name}")),
            None => self.out_dir.join(name),
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn build_operator(op: &OperatorConfig) -> Result<OperatorSpec> {
    let q = materialize(&op.potential, (0.0, 1.0), op.grid_n)?;
    Ok(OperatorSpec::new(q, RobinBC::new(op.h, op.big_h)?)?)
}

fn build_pair(pc: &PairConfig) -> Result<PairProblem> {
    let q1 = materialize(&pc.q1, (0.0, 1.0), pc.grid_n)?;
    let q2 = match (&pc.q2, &pc.perturbation) {
        (Some(q2), None) => materialize(q2, (0.0, 1.0), pc.grid_n)?,
        (None, Some(pert)) => {
            let mut values = Vec::with_capacity(pc.grid_n);
            for (i, x) in q1.nodes().into_iter().enumerate() {
                let extra = if x < pc.a { pert.eval(x)? } else { 0.0 };
                values.push(q1.samples()[i] + extra);
            }
            SampledFunction::new(0.0, 1.0, values)?
        }
        _ => {
            return Err(CliError::Config(
                "`pair` needs exactly one of `q2` and `perturbation`".into(),
            ))
        }
    };
    Ok(PairProblem::new(q1, pc.h1, q2, pc.h2, pc.big_h, pc.a)?.with_trace_n(pc.trace_n)?)
}

pub fn spectrum(run: &Run) -> Result<bool> {
    let cfg = run.config;
    let op = require(&cfg.operator, "operator", run.command)?;
    let sc = require(&cfg.spectrum, "spectrum", run.command)?;
    let spec = build_operator(op)?;
    let sp = sturm::compute_spectrum(&spec, sc.j_max)?;
    let residuals = sturm::asymptotic_residuals(&sp);

    let mut csv = String::from("j,lambda,residual\n");
    for (j, (l, r)) in sp.eigenvalues.iter().zip(&residuals).enumerate() {
        csv.push_str(&format!("{j},{l},{r}\n"));
    }
    let increasing = sp.eigenvalues.windows(2).all(|w| w[1] > w[0]);
    run.write("spectrum.csv", &csv)?;
    run.write_json(
        "spectrum.json",
        &json!({
            "meta": run.meta(),
            "grid_n": op.grid_n,
            "bc": sp.bc,
            "j_max": sc.j_max,
            "integral_q": sp.integral_q,
            "two_H_minus_h": 2.0 * (sp.bc.big_h - sp.bc.h),
            "asymptotic_offset": sp.offset(),
            "achieved_rel_tol": sp.tol,
            "strictly_increasing": increasing,
        }),
    )?;
    Ok(increasing)
}

pub fn hypotheses(run: &Run) -> Result<bool> {
    let cfg = run.config;
    let op = require(&cfg.operator, "operator", run.command)?;
    let cc = require(&cfg.counting, "counting", run.command)?;
    let hc = HypothesisConfig::new(cc.a, cc.p)?;
    let sigma = sturm::compute_spectrum(&build_operator(op)?, cc.j_max)?;
    let s = inverse::subspectrum_scenarios(&sigma, cc.scenario)?;
    let report = CountingReport::build(&s, &sigma, &hc, cc.j0)?;
    run.write("counting.csv", &report.to_csv())?;
    run.write_json(
        "hypotheses.json",
        &json!({
            "meta": run.meta(),
            "scenario": cc.scenario,
            "indices": s.indices,
            "report": report,
        }),
    )?;
    // the hypotheses describe the data; failing them is a finding, not an error
    Ok(true)
}

fn probe_list(run: &Run, z: &Option<Vec<f64>>, count: Option<usize>, lo: f64, hi: f64) -> Result<(Vec<f64>, &'static str)> {
    match (z, count) {
        (Some(z), None) => Ok((z.clone(), "explicit")),
        (None, Some(n)) => {
            if !(lo < hi) {
                return Err(CliError::Config(format!("need z_min < z_max, got {lo} and {hi}")));
            }
            let mut rng = run.rng();
            Ok(((0..n).map(|_| rng.random_range(lo..=hi)).collect(), "seeded"))
        }
        _ => Err(CliError::Config("give exactly one of `z` and `count`".into())),
    }
}

pub fn certify(run: &Run) -> Result<bool> {
    let cfg = run.config;
    let pc = require(&cfg.pair, "pair", run.command)?;
    let cc = require(&cfg.certify, "certify", run.command)?;
    let pp = build_pair(pc)?;
    let (z, source) = probe_list(run, &cc.z, cc.count, cc.z_min, cc.z_max)?;
    let report = certificate::certify(&pp, &z)?;
    let tol = cfg.tolerances;
    let mut pass = report.max_lagrange_deviation <= tol.lagrange * report.scale;

    let fourier = if cc.fourier {
        let opts = cfg.kernel.as_ref().map(|k| k.options).unwrap_or_default();
        let k = kernelops::build_s(&pp, &opts)?;
        let g = kernelops::g_compute(&pp, &k, 1.0)?;
        let rep = kernelops::fourier_consistency(&pp, &k, &g, &z)?;
        pass &= rep.relative <= tol.fourier;
        Some(rep)
    } else {
        None
    };

    run.write("certificate.csv", &report.to_csv())?;
    run.write_json(
        "certificate.json",
        &json!({
            "meta": run.meta(),
            "z_source": source,
            "tolerances": {"lagrange": tol.lagrange, "fourier": tol.fourier},
            "passed": pass,
            "report": report,
            "fourier": fourier,
        }),
    )?;
    Ok(pass)
}

pub fn kernel(run: &Run) -> Result<bool> {
    let cfg = run.config;
    let pc = require(&cfg.pair, "pair", run.command)?;
    let kc = require(&cfg.kernel, "kernel", run.command)?;
    let tol = cfg.tolerances;
    let pp = build_pair(pc)?;
    let k = kernelops::build_s(&pp, &kc.options)?;

    let support = k.support_violation(kernelops::SUPPORT_OFFSET_NODES);
    let holder = kc
        .holder_p
        .iter()
        .map(|&p| kernelops::holder_bound_check(&pp, &k, p))
        .collect::<slgate_core::Result<Vec<_>>>()?;
    let mut probes = vec![kernelops::extended_difference(&pp, &k)];
    let mut rng = run.rng();
    for _ in 0..kc.random_probes {
        probes.push((0..k.n()).map(|_| rng.random_range(-1.0..=1.0)).collect());
    }
    let contraction = kernelops::contraction_check(&k, kc.contraction_n.max(1), &probes)?;
    let g = kernelops::g_compute(&pp, &k, 1.0)?;
    let fixed_point = kernelops::fixed_point_check(&pp, &k, &g)?;

    let pass = support <= tol.support
        && holder.iter().all(|h| h.holds)
        && contraction.holds
        && fixed_point.rel_error <= tol.fixed_point;

    if kc.write_matrix {
        run.write("kernel.csv", &k.to_csv())?;
    }
    run.write("g.csv", &g.to_csv())?;
    run.write_json(
        "kernel.json",
        &json!({
            "meta": run.meta(),
            "header": k.header(),
            "options": kc.options,
            "checks": {
                "passed": pass,
                "support_violation": support,
                "support_tolerance": tol.support,
                "parity_defect": k.parity_defect(),
                "holder": holder,
                "contraction": contraction,
                "fixed_point": fixed_point,
            },
        }),
    )?;
    Ok(pass)
}

pub fn reconstruct(run: &Run) -> Result<bool> {
    let cfg = run.config;
    let ic = require(&cfg.inverse, "inverse", run.command)?;
    let known_n = ic.grid_n / 2 + 1;
    let known = materialize(&ic.known, (ic.a, 1.0), known_n)?;

    let targets = match (&ic.targets, &ic.target_indices, &ic.truth) {
        (Some(t), None, _) => t.clone(),
        (None, Some(idx), Some(truth)) => {
            if truth.coefficients.len() != ic.basis_dim {
                return Err(CliError::Config(format!(
                    "truth has {} coefficients, basis_dim is {}",
                    truth.coefficients.len(),
                    ic.basis_dim
                )));
            }
            let known_data = materialize(&ic.known, (ic.a, 1.0), ic.data_grid_n / 2 + 1)?;
            let q = inverse::assemble(&truth.coefficients, ic.a, &known_data, ic.data_grid_n)?;
            let spec = OperatorSpec::new(q, RobinBC::new(truth.h, ic.big_h)?)?;
            let values = sturm::eigenvalues_at(&spec, idx)?;
            idx.iter().copied().zip(values).collect()
        }
        _ => {
            return Err(CliError::Config(
                "`inverse` needs `targets`, or `target_indices` together with `truth`".into(),
            ))
        }
    };

    let mut problem = ReconstructionProblem::new(known, ic.a, ic.big_h, targets, ic.basis_dim, ic.grid_n)?;
    if let Some(m) = ic.max_iter {
        problem.max_iter = m;
    }
    let (mut coeffs, mut h) = match &ic.initial {
        Some(init) => (init.coefficients.clone(), init.h),
        None => (vec![0.0; ic.basis_dim], 0.0),
    };
    if coeffs.len() != ic.basis_dim {
        return Err(CliError::Config("initial coefficients must have basis_dim entries".into()));
    }
    if ic.initial_jitter > 0.0 {
        let mut rng = run.rng();
        let w = ic.initial_jitter;
        for c in coeffs.iter_mut() {
            *c += rng.random_range(-w..=w);
        }
        h += rng.random_range(-w..=w);
    }
    problem.initial = Some((coeffs, h));

    let result = inverse::reconstruct(&problem)?;
    let truth_errors = ic.truth.as_ref().map(|t| {
        json!({
            "relative_l2_error": inverse::relative_l2_error(&result.coefficients, &t.coefficients, ic.a),
            "h_error": (result.h - t.h).abs(),
        })
    });
    run.write("history.csv", &result.history_csv())?;
    run.write_json(
        "reconstruction.json",
        &json!({
            "meta": run.meta(),
            "a": ic.a,
            "H": ic.big_h,
            "basis_dim": ic.basis_dim,
            "grid_n": ic.grid_n,
            "targets": problem.targets,
            "result": result,
            "truth_errors": truth_errors,
        }),
    )?;
    Ok(result.converged)
}
