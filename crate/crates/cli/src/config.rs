//! JSON run-configuration schemas. Unknown keys are rejected so typos fail
//! loudly; schema violations surface serde's line/column diagnostics.

use crate::Failure;
use pspin_core::mixture::Mixture;
use pspin_core::rsb::FunctionalOrderParameter;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureTermCfg {
    pub p: u32,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderParameterCfg {
    pub k: usize,
    pub m: Vec<f64>,
    pub q: Vec<f64>,
}

/// Config for `pspin solve`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveCfg {
    pub mixture: Vec<MixtureTermCfg>,
    pub k_max: usize,
    /// Optional reference point: validated and evaluated, not optimized.
    #[serde(default)]
    pub order_parameter: Option<OrderParameterCfg>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Function-value tolerance for each local search.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Stop the k sweep when a deeper level improves by less than this
    /// (negative disables early stopping).
    #[serde(default)]
    pub sweep_tol: Option<f64>,
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

/// Config for `pspin finite-m`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteMCfg {
    pub mixture: Vec<MixtureTermCfg>,
    pub order_parameter: OrderParameterCfg,
    pub m_values: Vec<usize>,
    /// Accepted for config uniformity; the quadrature path draws nothing.
    #[serde(default, rename = "seed")]
    pub _seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub r_grid_size: Option<usize>,
    #[serde(default)]
    pub r_max_sigmas: Option<f64>,
    #[serde(default)]
    pub gh_nodes: Option<usize>,
    #[serde(default)]
    pub chi_nodes: Option<usize>,
}

/// First pass over a simulate config: read the task tag only.
#[derive(Debug, Deserialize)]
pub struct TaskPeek {
    pub task: String,
}

/// The dispatch tag; present in every task struct so strict parsing accepts
/// the key, read only through [`TaskPeek`].


#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeEnergyCfg {
    #[serde(rename = "task")]
    pub _task: String,
    pub mixture: Vec<MixtureTermCfg>,
    pub n: usize,
    pub n_config: usize,
    pub n_disorder: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// One Φ(p, n, f) request; `f` lists monomial factors (a, b, exponent) with
/// 1-based replica indices, empty meaning f ≡ 1.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiCfg {
    pub p: u32,
    pub n: usize,
    #[serde(default)]
    pub f: Vec<(usize, usize, u32)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GgStatsCfg {
    #[serde(rename = "task")]
    pub _task: String,
    pub mixture: Vec<MixtureTermCfg>,
    pub n: usize,
    /// Independent disorder realizations.
    pub groups: usize,
    /// Independent chains per realization (replicas come from distinct
    /// chains).
    pub chains_per_group: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub phi: Vec<PhiCfg>,
    /// Ultrametric violation margin; default 3/√N.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Highest order of the perturbation Hamiltonian (u_p = 1.5 uniformly);
    /// 0 or absent disables it.
    #[serde(default)]
    pub perturbation_p_max: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Dump every stored chain as a binary SPHCHAIN file.
    #[serde(default)]
    pub dump_chains: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssBracketCfg {
    #[serde(rename = "task")]
    pub _task: String,
    pub mixture: Vec<MixtureTermCfg>,
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub n_rep: Option<usize>,
    #[serde(default)]
    pub n_gauss: Option<usize>,
    #[serde(default)]
    pub n_dis: Option<usize>,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub thin: Option<usize>,
    /// Shell half-width δ for the correction term.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityCheckCfg {
    #[serde(rename = "task")]
    pub _task: String,
    pub mixture: Vec<MixtureTermCfg>,
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub n_configs: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

pub fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))
}

pub fn parse<T: serde::de::DeserializeOwned>(raw: &str) -> Result<T, Failure> {
    serde_json::from_str(raw).map_err(|e| Failure::config(format!("config schema violation: {e}")))
}

pub fn build_mixture(terms: &[MixtureTermCfg]) -> Result<Mixture, Failure> {
    Mixture::new(terms.iter().map(|t| (t.p, t.beta))).map_err(Failure::from_core)
}

pub fn build_order_parameter(
    cfg: &OrderParameterCfg,
) -> Result<FunctionalOrderParameter, Failure> {
    FunctionalOrderParameter::new(cfg.k, cfg.m.clone(), cfg.q.clone()).map_err(Failure::from_core)
}
