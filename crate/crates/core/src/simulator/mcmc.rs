//! Metropolis sampling of the Gibbs measure ∝ exp(H(σ)) dλ_N on the sphere.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;

use super::disorder::{hamiltonian, Disorder, MaterializedPerturbation, PerturbationSpec};

/// Window length for step-size adaptation during burn-in.
const ADAPT_WINDOW: usize = 200;

/// A finished Metropolis run: thinned configurations with their energies and
/// the adaptation record.
#[derive(Debug, Clone)]
pub struct GibbsChain {
    /// Thinned post-burn-in configurations, each on the radius-√N sphere.
    pub samples: Vec<Vec<f64>>,
    /// Total energy (base + perturbation) of each stored sample.
    pub energies: Vec<f64>,
    /// Acceptance rate over the measurement phase.
    pub acceptance_rate: f64,
    /// (step, step size ζ, window acceptance) per burn-in window.
    pub step_size_trace: Vec<(usize, f64, f64)>,
    /// Step size frozen at the end of burn-in.
    pub zeta_final: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Runs a Metropolis random walk targeting exp(H) dλ_N, where H evaluates
/// the disorder at `scaling_total` (pass N for the plain measure, M+N for
/// the cavity-scaled one) plus the perturbation when enabled.
///
/// Proposals are σ′ = √N (σ + ζη)/‖σ + ζη‖ with η standard Gaussian. The
/// step size ζ adapts multiplicatively during burn-in toward acceptance in
/// [0.3, 0.5] and is frozen for the measurement phase, which runs `steps`
/// updates storing every `thin`-th configuration.
pub fn gibbs_mcmc(
    d: &Disorder,
    pert: &PerturbationSpec,
    scaling_total: usize,
    steps: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<GibbsChain> {
    let n = d.n();
    if scaling_total < n {
        return Err(Error::Validation(format!(
            "scaling_total {scaling_total} must be >= N = {n}"
        )));
    }
    if steps < 1 || thin < 1 {
        return Err(Error::Validation("need steps >= 1 and thin >= 1".into()));
    }
    let materialized = MaterializedPerturbation::build(pert, n)?;
    let energy = |sigma: &[f64]| -> f64 {
        let base = hamiltonian(d, sigma, scaling_total).expect("walker stays on the sphere");
        match &materialized {
            Some(m) => base + m.energy(sigma, scaling_total),
            None => base,
        }
    };

    let mut rng = rng::derive(seed, &[rng::tags::MCMC]);
    let mut sigma = crate::sphere::sphere_point(&mut rng, n);
    let mut e_cur = energy(&sigma);

    let mut zeta = 0.5f64;
    let mut trace = Vec::new();
    let mut window_accepts = 0usize;
    let root_n = (n as f64).sqrt();
    let mut proposal = vec![0.0; n];

    let step = |sigma: &mut Vec<f64>,
                    e_cur: &mut f64,
                    zeta: f64,
                    rng: &mut rand_chacha::ChaCha8Rng,
                    proposal: &mut Vec<f64>|
     -> bool {
        let mut norm2 = 0.0;
        for (pi, si) in proposal.iter_mut().zip(sigma.iter()) {
            let eta: f64 = rng.sample(StandardNormal);
            *pi = si + zeta * eta;
            norm2 += *pi * *pi;
        }
        let scale = root_n / norm2.sqrt();
        for pi in proposal.iter_mut() {
            *pi *= scale;
        }
        let e_new = energy(proposal);
        let accept = e_new - *e_cur >= 0.0 || rng.gen::<f64>().ln() < e_new - *e_cur;
        if accept {
            std::mem::swap(sigma, proposal);
            *e_cur = e_new;
        }
        accept
    };

    for i in 0..burn_in {
        if step(&mut sigma, &mut e_cur, zeta, &mut rng, &mut proposal) {
            window_accepts += 1;
        }
        if (i + 1) % ADAPT_WINDOW == 0 {
            let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
            if rate > 0.5 {
                zeta = (zeta * 1.3).min(100.0);
            } else if rate < 0.3 {
                zeta = (zeta / 1.3).max(1e-4);
            }
            trace.push((i + 1, zeta, rate));
            window_accepts = 0;
        }
    }

    let mut samples = Vec::with_capacity(steps / thin);
    let mut energies = Vec::with_capacity(steps / thin);
    let mut accepts = 0usize;
    for i in 0..steps {
        if step(&mut sigma, &mut e_cur, zeta, &mut rng, &mut proposal) {
            accepts += 1;
        }
        if (i + 1) % thin == 0 {
            samples.push(sigma.clone());
            energies.push(e_cur);
        }
    }
    let acceptance_rate = accepts as f64 / steps as f64;
    let mut warnings = Vec::new();
    if !(0.15..=0.7).contains(&acceptance_rate) {
        warnings.push(format!(
            "measurement-phase acceptance rate {acceptance_rate:.3} outside [0.15, 0.7]; \
             mixing may be poor"
        ));
    }
    Ok(GibbsChain {
        samples,
        energies,
        acceptance_rate,
        step_size_trace: trace,
        zeta_final: zeta,
        seed,
        warnings,
    })
}
