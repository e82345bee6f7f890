//! Cavity-coordinate decomposition of the size-(M+N) Hamiltonian and the
//! empirical lower-bound bracket built from sampled replicas.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::finite_m::{mgf_node_count, SphericalMgf};
use crate::mixture::Mixture;
use crate::numeric::{logsumexp, mean_stderr, Kahan};
use crate::par;
use crate::rng;
use crate::sphere::{ass_correction, ShellSpec};

use super::disorder::{sample_disorder, Disorder, PerturbationSpec};
use super::mcmc::gibbs_mcmc;

/// The three pieces of H(ρ) on M+N sites split by cavity-index count.
#[derive(Debug, Clone)]
pub struct CavityDecomposition {
    /// Monomials with no cavity index: the size-N Hamiltonian of σ kept at
    /// the (M+N) scaling.
    pub h_mn: f64,
    /// Coefficient of ε_i for monomials with exactly one cavity index: the
    /// cavity field Z_i(σ), i = 1..M. The ε factor itself is not included.
    pub z_terms: Vec<f64>,
    /// Every monomial with two or more cavity indices, ε factors included.
    pub gamma: f64,
}

/// Splits the full Hamiltonian of ρ = (σ, ε) — σ the first N coordinates,
/// ε the last `m_dim` — by how many indices of each monomial land in the
/// cavity block: none (h_mn), exactly one (linear term Σ_i ε_i Z_i(σ)), or
/// at least two (gamma). The pieces satisfy
/// `h_mn + Σ_i ε_i·z_terms[i] + gamma = hamiltonian(d_full, ρ, M+N)`
/// to 1e-10 relative.
pub fn cavity_decompose(
    d_full: &Disorder,
    rho: &[f64],
    m_dim: usize,
) -> Result<CavityDecomposition> {
    let total = d_full.n();
    if m_dim < 1 || m_dim >= total {
        return Err(Error::Validation(format!(
            "cavity dimension M = {m_dim} must satisfy 1 <= M < M+N = {total}"
        )));
    }
    let n = total - m_dim;
    if rho.len() != total {
        return Err(Error::Domain(format!(
            "configuration has {} coordinates, disorder expects {total}",
            rho.len()
        )));
    }
    let norm2: f64 = rho.iter().map(|x| x * x).sum();
    if (norm2 / total as f64 - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!(
            "configuration norm² = {norm2}, expected {total} (relative tolerance 1e-8)"
        )));
    }
    for (p, _) in d_full.tensors() {
        if *p >= 5 {
            return Err(Error::CostGuard(format!(
                "cavity classification enumerates all (M+N)^p tuples; p = {p} >= 5 \
                 is refused"
            )));
        }
    }

    let s = total as f64;
    let mut h = Kahan::new();
    let mut z: Vec<Kahan> = (0..m_dim).map(|_| Kahan::new()).collect();
    let mut gamma = Kahan::new();
    let mut digits = [0usize; 4];
    for (p, g) in d_full.tensors() {
        let beta = d_full
            .mixture()
            .terms()
            .iter()
            .find(|t| t.p == *p)
            .map(|t| t.beta)
            .unwrap_or(0.0);
        let pref = beta * s.powf(-((*p as f64) - 1.0) / 2.0);
        let pu = *p as usize;
        for (t, &gt) in g.iter().enumerate() {
            let mut rem = t;
            for d in (0..pu).rev() {
                digits[d] = rem % total;
                rem /= total;
            }
            let mut prod_all = 1.0;
            let mut prod_sigma = 1.0;
            let mut cavity_count = 0u32;
            let mut cavity_site = 0usize;
            for &i in &digits[..pu] {
                prod_all *= rho[i];
                if i >= n {
                    cavity_count += 1;
                    cavity_site = i;
                } else {
                    prod_sigma *= rho[i];
                }
            }
            match cavity_count {
                0 => h.add(pref * gt * prod_sigma),
                1 => z[cavity_site - n].add(pref * gt * prod_sigma),
                _ => gamma.add(pref * gt * prod_all),
            }
        }
    }
    Ok(CavityDecomposition {
        h_mn: h.total(),
        z_terms: z.into_iter().map(|k| k.total()).collect(),
        gamma: gamma.total(),
    })
}

/// Sampling effort for [`ass_bracket_estimate`].
#[derive(Debug, Clone)]
pub struct AssBracketOptions {
    /// Replicas drawn from each Gibbs chain.
    pub n_rep: usize,
    /// Gaussian field draws per disorder realization.
    pub n_gauss: usize,
    /// Disorder realizations (the standard error is taken across these).
    pub n_dis: usize,
    /// Metropolis burn-in steps.
    pub burn_in: usize,
    /// Metropolis steps between stored replicas.
    pub thin: usize,
    /// Shell half-width δ entering the correction term.
    pub delta: f64,
}

impl Default for AssBracketOptions {
    fn default() -> Self {
        Self {
            n_rep: 24,
            n_gauss: 64,
            n_dis: 6,
            burn_in: 2000,
            thin: 400,
            delta: 0.1,
        }
    }
}

/// Output of [`ass_bracket_estimate`].
#[derive(Debug, Clone)]
pub struct AssBracket {
    /// Mean over disorder of E log ⟨exp Λ_M(‖z(σ)‖)⟩.
    pub term_z: f64,
    /// Standard error of `term_z` across disorder realizations.
    pub term_z_stderr: f64,
    /// Mean over disorder of E log ⟨exp √M y(σ)⟩.
    pub term_y: f64,
    /// Standard error of `term_y` across disorder realizations.
    pub term_y_stderr: f64,
    /// Standard error of the bracket across disorder realizations.
    pub stderr: f64,
    /// Shell correction −δξ′(1) + M⁻¹ log ν_M(A_δ), a constant offset.
    pub correction: f64,
    /// (term_z − term_y)/M + correction.
    pub lower_bound: f64,
}

/// Lower-triangular factor of `cov` + jitter·I, retrying with jitter ×10 up
/// to 1e-6 before giving up with a condition-number diagnostic.
fn cholesky_with_jitter(cov: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let mut jitter = 1e-10;
    while jitter <= 1e-6 {
        let mut m = cov.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.l());
        }
        jitter *= 10.0;
    }
    let eigs = cov.clone().symmetric_eigen().eigenvalues;
    let emax = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let emin = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    Err(Error::Numerical(format!(
        "factorization of the {what} covariance failed up to jitter 1e-6; \
         eigenvalue range [{emin:.3e}, {emax:.3e}], condition estimate {:.3e}",
        emax / emin.abs().max(f64::MIN_POSITIVE)
    )))
}

/// Empirical lower-bound bracket for the limiting free energy at cavity
/// dimension M.
///
/// For each disorder realization a Metropolis chain at the (M+N) scaling
/// supplies `n_rep` replicas σ^1..σ^{n_rep}. Conditionally on them, the
/// cavity fields z_i(σ^a) (i = 1..M, covariance δ_{ii′} ξ′(R_ab)) and the
/// compensator y(σ^a) (covariance θ(R_ab)) are drawn by Cholesky
/// factorization of the overlap Gram matrices, and
///
///   term_z ≈ E log ⟨exp Λ_M(‖z(σ)‖)⟩,   term_y ≈ E log ⟨exp √M y(σ)⟩
///
/// are averaged over `n_gauss` field draws (at M = 1 the first term is
/// E log ⟨cosh z(σ)⟩). The estimate (term_z − term_y)/M plus the shell
/// correction is a finite-sample stand-in for the asymptotic lower bound;
/// its spread across disorder realizations gives the standard error.
pub fn ass_bracket_estimate(
    mix: &Mixture,
    m_dim: usize,
    n: usize,
    opts: &AssBracketOptions,
    seed: u64,
) -> Result<AssBracket> {
    if !(1..=8).contains(&m_dim) || !(1..=32).contains(&n) {
        return Err(Error::Validation(format!(
            "bracket estimation is restricted to 1 <= M <= 8 and 1 <= N <= 32, \
             got M = {m_dim}, N = {n}"
        )));
    }
    if opts.n_rep < 2 || opts.n_gauss < 2 || opts.n_dis < 2 || opts.thin < 1 {
        return Err(Error::Validation(
            "need n_rep >= 2, n_gauss >= 2, n_dis >= 2, thin >= 1".into(),
        ));
    }
    let correction = ass_correction(&ShellSpec::new(m_dim, opts.delta)?, mix)?;
    let mf = m_dim as f64;
    // Fixed quadrature for Λ_M sized for ‖z‖ up to 10 standard deviations of
    // its typical χ_M·√ξ′(1) magnitude.
    let c_max = 10.0 * (mf * mix.xi_prime(1.0)?).sqrt() * mf.sqrt();
    let mgf = SphericalMgf::new(m_dim, mgf_node_count(c_max, 1.0));
    let mgf = &mgf;

    let per: Vec<Result<(f64, f64)>> = par::map_indexed(opts.n_dis, |di| {
        let mut seeder = rng::derive(seed, &[rng::tags::DISORDER, di as u64]);
        let d_seed: u64 = seeder.gen();
        let dis = sample_disorder(mix, n, d_seed)?;
        let chain = gibbs_mcmc(
            &dis,
            &PerturbationSpec::disabled(),
            n + m_dim,
            opts.n_rep * opts.thin,
            opts.burn_in,
            opts.thin,
            seeder.gen(),
        )?;
        let reps = &chain.samples;
        let k = reps.len();
        let gram = DMatrix::from_fn(k, k, |a, b| {
            reps[a].iter().zip(&reps[b]).map(|(x, y)| x * y).sum::<f64>() / n as f64
        });
        let cz = gram.map(|r| mix.xi_prime(r).expect("overlaps lie in [-1, 1]"));
        let cy = gram.map(|r| mix.theta(r).expect("overlaps lie in [-1, 1]"));
        let lz = cholesky_with_jitter(&cz, "cavity-field")?;
        let ly = cholesky_with_jitter(&cy, "compensator")?;

        let mut grng = rng::derive(seed, &[rng::tags::FIELDS, di as u64]);
        let ln_k = (k as f64).ln();
        let mut tz = Kahan::new();
        let mut ty = Kahan::new();
        let mut norms2 = vec![0.0f64; k];
        for _ in 0..opts.n_gauss {
            norms2.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..m_dim {
                let gs = DVector::from_fn(k, |_, _| grng.sample::<f64, _>(StandardNormal));
                let v = &lz * gs;
                for (acc, x) in norms2.iter_mut().zip(v.iter()) {
                    *acc += x * x;
                }
            }
            let terms: Vec<f64> = norms2.iter().map(|&n2| mgf.eval(n2.sqrt())).collect();
            tz.add(logsumexp(&terms) - ln_k);

            let gs = DVector::from_fn(k, |_, _| grng.sample::<f64, _>(StandardNormal));
            let y = &ly * gs;
            let terms: Vec<f64> = y.iter().map(|&v| mf.sqrt() * v).collect();
            ty.add(logsumexp(&terms) - ln_k);
        }
        let inv = 1.0 / opts.n_gauss as f64;
        Ok((tz.total() * inv, ty.total() * inv))
    });
    let per: Vec<(f64, f64)> = per.into_iter().collect::<Result<_>>()?;

    let (term_z, term_z_stderr) =
        mean_stderr(&per.iter().map(|&(z, _)| z).collect::<Vec<_>>());
    let (term_y, term_y_stderr) =
        mean_stderr(&per.iter().map(|&(_, y)| y).collect::<Vec<_>>());
    let brackets: Vec<f64> = per.iter().map(|&(z, y)| (z - y) / mf).collect();
    let (bracket, stderr) = mean_stderr(&brackets);
    Ok(AssBracket {
        term_z,
        term_z_stderr,
        term_y,
        term_y_stderr,
        stderr,
        correction,
        lower_bound: bracket + correction,
    })
}
