//! Experiment configuration. Every block rejects unknown keys.

use std::path::Path;

use serde::Deserialize;
use slgate_core::counting::DEFAULT_J0;
use slgate_core::inverse::Scenario;
use slgate_core::kernelops::KernelOptions;
use slgate_core::potentials::PotentialSpec;

use crate::error::{CliError, Result};

fn default_grid_n() -> usize {
    2001
}

fn default_trace_n() -> usize {
    slgate_core::certificate::DEFAULT_TRACE_N
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: Option<OperatorConfig>,
    pub pair: Option<PairConfig>,
    pub spectrum: Option<SpectrumConfig>,
    pub counting: Option<CountingConfig>,
    pub certify: Option<CertifyConfig>,
    pub kernel: Option<KernelConfig>,
    pub inverse: Option<InverseConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub potential: PotentialSpec,
    pub h: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
}

/// `q_2` is either given directly or as `q_1 + perturbation` on `[0, a)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub q1: PotentialSpec,
    pub h1: f64,
    pub q2: Option<PotentialSpec>,
    pub perturbation: Option<PotentialSpec>,
    pub h2: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub a: f64,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_trace_n")]
    pub trace_n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub j_max: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingConfig {
    pub a: f64,
    pub p: f64,
    pub scenario: Scenario,
    pub j_max: usize,
    #[serde(default = "default_j0")]
    pub j0: usize,
}

fn default_j0() -> usize {
    DEFAULT_J0
}

/// Probe points: an explicit list, or `count` seeded draws from `[z_min, z_max]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub z: Option<Vec<f64>>,
    pub count: Option<usize>,
    #[serde(default = "default_z_min")]
    pub z_min: f64,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    /// Also build the kernel and compare the transform of `g` with `f`.
    #[serde(default)]
    pub fourier: bool,
}

fn default_z_min() -> f64 {
    0.1
}

fn default_z_max() -> f64 {
    60.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub options: KernelOptions,
    #[serde(default = "default_holder_p")]
    pub holder_p: Vec<f64>,
    #[serde(default = "default_contraction_n")]
    pub contraction_n: usize,
    /// Seeded random probe vectors for the contraction check.
    #[serde(default)]
    pub random_probes: usize,
    /// Write the full matrix as CSV.
    #[serde(default = "default_true")]
    pub write_matrix: bool,
}

fn default_holder_p() -> Vec<f64> {
    vec![1.0, 2.0]
}

fn default_contraction_n() -> usize {
    5
}

fn default_true() -> bool {
    true
}

/// Synthetic truth from which the target eigenvalues are generated.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub coefficients: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseConfig {
    pub a: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub basis_dim: usize,
    /// Potential on `[a, 1]`.
    pub known: PotentialSpec,
    /// Explicit `(index, eigenvalue)` data.
    pub targets: Option<Vec<(usize, f64)>>,
    /// Indices to generate from `truth`.
    pub target_indices: Option<Vec<usize>>,
    pub truth: Option<TruthConfig>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    /// Grid for synthetic data; finer than `grid_n` to avoid an inverse crime.
    #[serde(default = "default_data_grid_n")]
    pub data_grid_n: usize,
    pub max_iter: Option<usize>,
    pub initial: Option<TruthConfig>,
    /// Half-width of a seeded uniform perturbation of the starting point.
    #[serde(default)]
    pub initial_jitter: f64,
}

fn default_data_grid_n() -> usize {
    4001
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Prefix for every file written by the command.
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Lagrange identity, relative to the pair scale.
    pub lagrange: f64,
    /// Fourier consistency, relative to `1 + max |f|`.
    pub fourier: f64,
    /// Kernel mass outside the cone, relative to `max |s|`.
    pub support: f64,
    pub fixed_point: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lagrange: 1e-7,
            fourier: 1e-3,
            support: 1e-3,
            fixed_point: 1e-4,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Returns the block or a config error naming it.
pub fn require<'a, T>(block: &'a Option<T>, name: &str, command: &str) -> Result<&'a T> {
    block
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("`{command}` needs a `{name}` block")))
}
