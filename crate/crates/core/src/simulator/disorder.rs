//! Disorder realizations, Hamiltonian evaluation, the small perturbation
//! Hamiltonian, and plain Monte Carlo free-energy estimation.

use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::numeric::{logsumexp, mean_stderr, Kahan};
use crate::par;
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Dense-tensor memory guard: Σ_p N^p entries across mixture terms.
pub const MAX_TENSOR_ENTRIES: usize = 10_000_000;

/// RNG block length for tensor regeneration. Entry i of the order-p tensor
/// comes from position i mod BLOCK of the stream keyed by
/// (seed, p, i / BLOCK), so tensors are reproducible bitwise and can be
/// generated in parallel blocks.
const BLOCK: usize = 8192;

/// One quenched disorder realization: a dense i.i.d. standard Gaussian
/// coupling tensor per mixture term.
#[derive(Debug, Clone)]
pub struct Disorder {
    n: usize,
    seed: u64,
    mixture: Mixture,
    /// (p, row-major tensor of N^p entries), ascending p, zero-β terms skipped.
    tensors: Vec<(u32, Vec<f64>)>,
}

fn tensor_len(n: usize, p: u32) -> Result<usize> {
    let len = (n as u128).checked_pow(p).unwrap_or(u128::MAX);
    if len > MAX_TENSOR_ENTRIES as u128 {
        return Err(Error::CostGuard(format!(
            "dense coupling tensor for N = {n}, p = {p} needs {len} entries \
             (limit {MAX_TENSOR_ENTRIES})"
        )));
    }
    Ok(len as usize)
}

fn gaussian_tensor(seed: u64, p: u32, len: usize) -> Vec<f64> {
    let blocks = len.div_ceil(BLOCK);
    let chunks = par::map_indexed(blocks, |b| {
        let mut rng = rng::derive(seed, &[rng::tags::DISORDER, p as u64, b as u64]);
        let count = BLOCK.min(len - b * BLOCK);
        (0..count)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<f64>>()
    });
    chunks.concat()
}

/// Draws the coupling tensors for every nonzero mixture term.
pub fn sample_disorder(mix: &Mixture, n: usize, seed: u64) -> Result<Disorder> {
    if n < 1 {
        return Err(Error::Validation("system size N must be >= 1".into()));
    }
    let mut total = 0usize;
    for t in mix.terms() {
        if t.beta == 0.0 {
            continue;
        }
        total = total.saturating_add(tensor_len(n, t.p)?);
        if total > MAX_TENSOR_ENTRIES {
            return Err(Error::CostGuard(format!(
                "total tensor storage for N = {n} exceeds {MAX_TENSOR_ENTRIES} \
                 entries at p = {}",
                t.p
            )));
        }
    }
    let tensors = mix
        .terms()
        .iter()
        .filter(|t| t.beta != 0.0)
        .map(|t| {
            let len = n.pow(t.p);
            (t.p, gaussian_tensor(seed, t.p, len))
        })
        .collect();
    Ok(Disorder {
        n,
        seed,
        mixture: mix.clone(),
        tensors,
    })
}

impl Disorder {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn tensor(&self, p: u32) -> Option<&[f64]> {
        self.tensors
            .iter()
            .find(|(tp, _)| *tp == p)
            .map(|(_, g)| g.as_slice())
    }

    pub(crate) fn tensors(&self) -> &[(u32, Vec<f64>)] {
        &self.tensors
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Σ over all N^p ordered tuples of g_{i1..ip} σ_{i1}⋯σ_{ip}, by contracting
/// one index at a time against σ. The order p is explicit because lengths
/// cannot distinguish it at N = 1.
pub(crate) fn contract_tensor(tensor: &[f64], sigma: &[f64], p: u32) -> f64 {
    let n = sigma.len();
    if p == 1 {
        return dot(tensor, sigma);
    }
    let mut cur: Vec<f64> = tensor.chunks_exact(n).map(|row| dot(row, sigma)).collect();
    for _ in 2..p {
        cur = cur.chunks_exact(n).map(|row| dot(row, sigma)).collect();
    }
    dot(&cur, sigma)
}

fn check_configuration(sigma: &[f64], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(Error::Domain(format!(
            "configuration has {} coordinates, disorder expects {n}",
            sigma.len()
        )));
    }
    let norm2: f64 = sigma.iter().map(|x| x * x).sum();
    if (norm2 / n as f64 - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!(
            "configuration norm² = {norm2}, expected {n} (relative tolerance 1e-8)"
        )));
    }
    Ok(())
}

/// H(σ) = Σ_p β_p · s^{−(p−1)/2} Σ_{tuples} g σ_{i1}⋯σ_{ip} with
/// s = `scaling_total`. Pass s = N for the size-N model and s = M+N for the
/// cavity-scaled one; every ordered tuple contributes, repeated indices
/// included, so the disorder covariance is exactly s·ξ(σ·σ′/s).
pub fn hamiltonian(d: &Disorder, sigma: &[f64], scaling_total: usize) -> Result<f64> {
    check_configuration(sigma, d.n)?;
    if scaling_total < d.n {
        return Err(Error::Validation(format!(
            "scaling_total {scaling_total} must be >= N = {}",
            d.n
        )));
    }
    let s = scaling_total as f64;
    let mut acc = Kahan::new();
    for (p, g) in &d.tensors {
        let beta = d
            .mixture
            .terms()
            .iter()
            .find(|t| t.p == *p)
            .map(|t| t.beta)
            .unwrap_or(0.0);
        let pref = beta * s.powf(-((*p as f64) - 1.0) / 2.0);
        acc.add(pref * contract_tensor(g, sigma, *p));
    }
    Ok(acc.total())
}

/// Which size enters the perturbation's scaling prefactors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationVariant {
    /// Prefactors use N.
    Plain,
    /// Prefactors use M+N.
    Cavity { m_dim: usize },
}

/// The perturbation Hamiltonian
/// s^{−1/8} Σ_{p=1}^{p_max} (u_p/2^p) H′_{s,p}(σ), drawn from disorder
/// independent of the base model. Its weight vanishes relative to the main
/// Hamiltonian as the system grows but forces the overlap-moment identities
/// asymptotically.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    /// u_p for p = 1..=p_max, each in [1, 2].
    pub u: Vec<f64>,
    pub p_max: u32,
    pub enabled: bool,
    /// Seed for the independent coupling tensors.
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(u: Vec<f64>, seed: u64) -> Result<Self> {
        for (i, &v) in u.iter().enumerate() {
            if !(1.0..=2.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "perturbation weight u_{} = {v} outside [1, 2]",
                    i + 1
                )));
            }
        }
        let p_max = u.len() as u32;
        Ok(Self {
            u,
            p_max,
            enabled: true,
            seed,
        })
    }

    /// u_p = 1.5 for p = 1..=p_max.
    pub fn uniform(p_max: u32, seed: u64) -> Self {
        Self {
            u: vec![1.5; p_max as usize],
            p_max,
            enabled: true,
            seed,
        }
    }

    pub fn disabled() -> Self {
        Self {
            u: Vec::new(),
            p_max: 0,
            enabled: false,
            seed: 0,
        }
    }
}

/// Perturbation tensors materialized for a fixed N, reusable across many
/// energy evaluations (one Metropolis chain, for instance).
pub(crate) struct MaterializedPerturbation {
    u: Vec<f64>,
    tensors: Vec<Vec<f64>>,
}

impl MaterializedPerturbation {
    pub(crate) fn build(spec: &PerturbationSpec, n: usize) -> Result<Option<Self>> {
        if !spec.enabled || spec.p_max == 0 {
            return Ok(None);
        }
        let mut total = 0usize;
        for p in 1..=spec.p_max {
            total = total.saturating_add(tensor_len(n, p)?);
        }
        if total > MAX_TENSOR_ENTRIES {
            return Err(Error::CostGuard(format!(
                "perturbation tensors for N = {n}, p_max = {} exceed \
                 {MAX_TENSOR_ENTRIES} entries",
                spec.p_max
            )));
        }
        let tensors = (1..=spec.p_max)
            .map(|p| gaussian_tensor(spec.seed, p, n.pow(p)))
            .collect();
        Ok(Some(Self {
            u: spec.u.clone(),
            tensors,
        }))
    }

    pub(crate) fn energy(&self, sigma: &[f64], scaling_total: usize) -> f64 {
        let s = scaling_total as f64;
        let mut acc = Kahan::new();
        for (idx, g) in self.tensors.iter().enumerate() {
            let p = idx + 1;
            let pref = self.u[idx] / 2f64.powi(p as i32) * s.powf(-((p as f64) - 1.0) / 2.0);
            acc.add(pref * contract_tensor(g, sigma, p as u32));
        }
        s.powf(-0.125) * acc.total()
    }
}

/// One-shot perturbation energy; `base` supplies N. Returns 0 when disabled.
pub fn perturbation(
    spec: &PerturbationSpec,
    base: &Disorder,
    sigma: &[f64],
    variant: PerturbationVariant,
) -> Result<f64> {
    check_configuration(sigma, base.n())?;
    let scaling_total = match variant {
        PerturbationVariant::Plain => base.n(),
        PerturbationVariant::Cavity { m_dim } => base.n() + m_dim,
    };
    match MaterializedPerturbation::build(spec, base.n())? {
        None => Ok(0.0),
        Some(m) => Ok(m.energy(sigma, scaling_total)),
    }
}

/// Output of [`free_energy_mc`].
#[derive(Debug, Clone)]
pub struct FreeEnergyEstimate {
    /// Mean of N⁻¹ log Ẑ over disorder draws.
    pub estimate: f64,
    /// Bootstrap standard error over disorder draws.
    pub stderr: f64,
    /// N⁻¹ log Ẑ per disorder draw.
    pub per_disorder: Vec<f64>,
    /// Smallest exp-weight effective sample size across disorder draws.
    pub min_ess: f64,
    pub warnings: Vec<String>,
    /// The estimator's structural caveat, always present.
    pub bias_note: &'static str,
}

const BIAS_NOTE: &str = "log of a sample mean of exp(H): downward-biased for \
E log Z by Jensen's inequality; the bias shrinks as the effective sample size grows";

/// Plain Monte Carlo quenched free energy: for each disorder draw, Ẑ is the
/// sample mean of exp H over uniform sphere points (computed by
/// log-sum-exp), and N⁻¹ log Ẑ is averaged over disorder draws.
///
/// Reliable only at high temperature; the effective sample size of the
/// exp-weights collapses exponentially as couplings grow.
pub fn free_energy_mc(
    mix: &Mixture,
    n: usize,
    n_config: usize,
    n_disorder: usize,
    seed: u64,
) -> Result<FreeEnergyEstimate> {
    if n < 1 || n_config < 2 || n_disorder < 2 {
        return Err(Error::Validation(
            "need N >= 1, n_config >= 2, n_disorder >= 2".into(),
        ));
    }
    // Surface the memory guard before spawning parallel draws.
    let mut total = 0usize;
    for t in mix.terms().iter().filter(|t| t.beta != 0.0) {
        total = total.saturating_add(tensor_len(n, t.p)?);
        if total > MAX_TENSOR_ENTRIES {
            return Err(Error::CostGuard(format!(
                "total tensor storage for N = {n} exceeds {MAX_TENSOR_ENTRIES} entries"
            )));
        }
    }
    let per: Vec<(f64, f64)> = par::map_indexed(n_disorder, |di| {
        let mut seeder = rng::derive(seed, &[rng::tags::DISORDER, di as u64]);
        let d_seed: u64 = seeder.gen();
        let d = sample_disorder(mix, n, d_seed).expect("memory guard checked above");
        let energies: Vec<f64> = (0..n_config)
            .map(|ci| {
                let mut rng =
                    rng::derive(seed, &[rng::tags::FREE_ENERGY, di as u64, ci as u64]);
                let sigma = crate::sphere::sphere_point(&mut rng, n);
                hamiltonian(&d, &sigma, n).expect("uniform point is on the sphere")
            })
            .collect();
        let log_z = logsumexp(&energies) - (n_config as f64).ln();
        // Effective sample size of w_i = exp(H_i − max H).
        let mx = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut s1, mut s2) = (Kahan::new(), Kahan::new());
        for &e in &energies {
            let w = (e - mx).exp();
            s1.add(w);
            s2.add(w * w);
        }
        let ess = s1.total() * s1.total() / s2.total();
        (log_z / n as f64, ess)
    });

    let per_disorder: Vec<f64> = per.iter().map(|&(v, _)| v).collect();
    let min_ess = per.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
    let estimate = mean_stderr(&per_disorder).0;
    let stderr = bootstrap_stderr_mean(&per_disorder, 1000, seed);
    let mut warnings = Vec::new();
    if min_ess < 100.0 {
        warnings.push(format!(
            "exp-weight effective sample size dropped to {min_ess:.1} (< 100); \
             the partition-function estimate is unreliable at this coupling"
        ));
    }
    Ok(FreeEnergyEstimate {
        estimate,
        stderr,
        per_disorder,
        min_ess,
        warnings,
        bias_note: BIAS_NOTE,
    })
}

/// Two configurations on S_N with overlap exactly r (test helper).
#[cfg(test)]
pub(crate) fn overlapping_pair(n: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
    let root_n = (n as f64).sqrt();
    let mut a = vec![0.0; n];
    a[0] = root_n;
    let mut b = vec![0.0; n];
    b[0] = root_n * r;
    b[1] = root_n * (1.0 - r * r).sqrt();
    (a, b)
}

/// Bootstrap standard error of the sample mean.
pub(crate) fn bootstrap_stderr_mean(values: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut rng = rng::derive(seed, &[rng::tags::BOOTSTRAP]);
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut acc = Kahan::new();
            for _ in 0..n {
                acc.add(values[rng.gen_range(0..n)]);
            }
            acc.total() / n as f64
        })
        .collect();
    let (_, se_of_mean) = mean_stderr(&means);
    // mean_stderr returns sd/√B for the resample list; the bootstrap stderr
    // is the plain standard deviation of the resampled means.
    se_of_mean * (resamples as f64).sqrt()
}
