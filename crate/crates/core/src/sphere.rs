//! Exact geometry on the radius-√N sphere: uniform sampling, the product
//! density that decouples M cavity coordinates from a lower-dimensional
//! sphere, Gaussian shell measures, and the shell correction entering the
//! finite-M free-energy bracket.
//!
//! # Coordinate decoupling
//!
//! A uniform point ρ on the radius-√(M+N) sphere in R^{M+N} splits exactly
//! into M scalar coordinates ε = (ε_1..ε_M) with joint density
//!
//!   F_{M,N}(ε) = b_{M,N} Π_{j=1}^{M} (1 − ε_j²/(M+N+1−j))^{(M+N−j−2)/2}
//!
//! on the box |ε_j| ≤ √(M+N+1−j), plus an independent uniform σ on the
//! radius-√N sphere, reassembled as ρ = (a_{M+1}σ, a_1ε_1, …, a_Mε_M) with
//! scale factors a_1 = 1, a_ℓ = Π_{j<ℓ} √(1 + (1 − ε_j²)/(M+N−j)). The
//! factors satisfy Σ_ℓ a_ℓ²ε_ℓ² + N·a_{M+1}² = M+N identically, so the
//! reassembled point is again on the sphere. [`decomposition_check`]
//! verifies the change of variables by Monte Carlo on both sides.

use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::numeric::mean_stderr;
use crate::par;
use crate::rng;
use crate::special::{chi_square_cdf, ln_gamma};
use rand::Rng;
use rand_distr::StandardNormal;

/// The Gaussian shell M ≤ ‖ε‖² ≤ M(1+δ) in R^M.
#[derive(Debug, Clone, Copy)]
pub struct ShellSpec {
    pub m_dim: usize,
    pub delta: f64,
}

impl ShellSpec {
    pub fn new(m_dim: usize, delta: f64) -> Result<Self> {
        let s = Self { m_dim, delta };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.m_dim < 1 {
            return Err(Error::Validation("shell dimension M must be >= 1".into()));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Validation("shell width delta must be > 0".into()));
        }
        Ok(())
    }
}

/// Output of [`coordinate_density`].
#[derive(Debug, Clone)]
pub struct CoordinateFactors {
    pub m_dim: usize,
    pub n_dim: usize,
    /// F_{M,N}(ε).
    pub density: f64,
    /// a_1..a_{M+1}; a_1 = 1, a_{M+1} rescales the inner sphere.
    pub factors: Vec<f64>,
}

/// Both Monte Carlo sides of the decoupling identity.
#[derive(Debug, Clone, Copy)]
pub struct DecompositionCheck {
    /// Direct average of f over the radius-√(M+N) sphere.
    pub lhs: f64,
    /// Average of f over reassembled (σ, ε) draws.
    pub rhs: f64,
    /// Combined standard error of lhs − rhs.
    pub stderr: f64,
}

fn standard_normal_vec(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A uniform point on the radius-√n sphere from one Gaussian vector.
pub(crate) fn sphere_point(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut g = standard_normal_vec(rng, n);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-100 {
            let scale = (n as f64).sqrt() / norm;
            for x in g.iter_mut() {
                *x *= scale;
            }
            return g;
        }
    }
}

/// `count` i.i.d. uniform points on the radius-√N sphere.
///
/// Each draw uses its own generator stream derived from (seed, index), so
/// output is bitwise identical across runs and thread counts.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < 1 || count < 1 {
        return Err(Error::Validation(
            "sphere dimension and sample count must be >= 1".into(),
        ));
    }
    Ok(par::map_indexed(count, |i| {
        let mut rng = rng::derive(seed, &[rng::tags::SPHERE, i as u64]);
        sphere_point(&mut rng, n)
    }))
}

/// log of the normalization b_{M,N}: each coordinate factor is the density
/// of one coordinate of a uniform point on a radius-√K sphere, normalized by
/// c_K = Γ(K/2) / (√(Kπ) Γ((K−1)/2)); the product telescopes sphere-area
/// ratios, evaluated in log space.
fn ln_normalization(m_dim: usize, n_dim: usize) -> f64 {
    let mut ln_b = 0.0;
    for j in 1..=m_dim {
        let k = (m_dim + n_dim + 1 - j) as f64;
        ln_b += ln_gamma(k / 2.0)
            - ln_gamma((k - 1.0) / 2.0)
            - 0.5 * (k * std::f64::consts::PI).ln();
    }
    ln_b
}

/// F_{M,N}(ε) and the scale factors a_1..a_{M+1}.
pub fn coordinate_density(m_dim: usize, n_dim: usize, eps: &[f64]) -> Result<CoordinateFactors> {
    if m_dim < 1 || n_dim < 1 {
        return Err(Error::Validation("need M >= 1 and N >= 1".into()));
    }
    if eps.len() != m_dim {
        return Err(Error::Validation(format!(
            "expected {} coordinates, got {}",
            m_dim,
            eps.len()
        )));
    }
    let mn = (m_dim + n_dim) as f64;
    for (j, &e) in eps.iter().enumerate() {
        let bound = (mn + 1.0 - (j + 1) as f64).sqrt();
        if !e.is_finite() || e.abs() > bound {
            return Err(Error::Domain(format!(
                "coordinate {} = {e} outside its box |eps| <= {bound}",
                j + 1
            )));
        }
    }

    let mut ln_density = ln_normalization(m_dim, n_dim);
    for (j, &e) in eps.iter().enumerate() {
        let k = mn + 1.0 - (j + 1) as f64;
        let base = 1.0 - e * e / k;
        let expo = (k - 3.0) / 2.0;
        if base <= 0.0 {
            // On the box boundary: density is 0 for positive exponents and
            // +inf for the integrable-singularity cases.
            ln_density += if expo > 0.0 {
                f64::NEG_INFINITY
            } else if expo == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
        } else {
            ln_density += expo * base.ln();
        }
    }

    let mut factors = Vec::with_capacity(m_dim + 1);
    factors.push(1.0);
    let mut acc = 1.0f64;
    for (j, &e) in eps.iter().enumerate() {
        acc *= (1.0 + (1.0 - e * e) / (mn - (j + 1) as f64)).sqrt();
        factors.push(acc);
    }

    Ok(CoordinateFactors {
        m_dim,
        n_dim,
        density: ln_density.exp(),
        factors,
    })
}

/// Draws one coordinate with density ∝ (1 − ε²/K)^{(K−3)/2} on [−√K, √K]
/// — the first coordinate of a uniform point on the radius-√K sphere.
fn sample_coordinate(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> f64 {
    loop {
        let g = standard_normal_vec(rng, k);
        let norm2 = g.iter().map(|x| x * x).sum::<f64>();
        if norm2 > 1e-200 {
            return (k as f64).sqrt() * g[0] / norm2.sqrt();
        }
    }
}

/// Monte Carlo check of the decoupling identity: averages `test_fn` once
/// over the radius-√(M+N) sphere directly, and once over reassembled
/// (a_{M+1}σ, a_1ε_1, …, a_Mε_M) draws with ε sampled from F_{M,N}.
pub fn decomposition_check<F>(
    m_dim: usize,
    n_dim: usize,
    test_fn: F,
    samples: usize,
    seed: u64,
) -> Result<DecompositionCheck>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if m_dim < 1 || n_dim < 1 || m_dim + n_dim < 3 {
        return Err(Error::Validation("need M >= 1, N >= 1, M + N >= 3".into()));
    }
    if samples < 16 {
        return Err(Error::Validation("need at least 16 samples".into()));
    }
    let total = m_dim + n_dim;

    let direct: Vec<f64> = par::map_indexed(samples, |i| {
        let mut rng = rng::derive(seed, &[rng::tags::SPHERE, 0xA, i as u64]);
        test_fn(&sphere_point(&mut rng, total))
    });

    let split: Vec<f64> = par::map_indexed(samples, |i| {
        let mut rng = rng::derive(seed, &[rng::tags::SPHERE, 0xB, i as u64]);
        let mut eps = Vec::with_capacity(m_dim);
        for j in 1..=m_dim {
            eps.push(sample_coordinate(&mut rng, total + 1 - j));
        }
        let sigma = sphere_point(&mut rng, n_dim);
        let factors = coordinate_density(m_dim, n_dim, &eps)
            .expect("sampled coordinates lie in the box")
            .factors;
        let mut rho = Vec::with_capacity(total);
        for &s in &sigma {
            rho.push(factors[m_dim] * s);
        }
        for (j, &e) in eps.iter().enumerate() {
            rho.push(factors[j] * e);
        }
        test_fn(&rho)
    });

    let (lhs, se_l) = mean_stderr(&direct);
    let (rhs, se_r) = mean_stderr(&split);
    Ok(DecompositionCheck {
        lhs,
        rhs,
        stderr: (se_l * se_l + se_r * se_r).sqrt(),
    })
}

/// ν_M(A_δ) = P(M ≤ ‖ε‖² ≤ M(1+δ)) for a standard Gaussian ε ∈ R^M,
/// via the chi-square CDF.
pub fn shell_measure(s: &ShellSpec) -> Result<f64> {
    s.validate()?;
    let m = s.m_dim as f64;
    let hi = chi_square_cdf(m, m * (1.0 + s.delta))?;
    let lo = chi_square_cdf(m, m)?;
    Ok((hi - lo).max(0.0))
}

/// The shell correction −δ·ξ′(1) + M⁻¹ log ν_M(A_δ) appearing in the lower
/// half of the finite-M free-energy bracket. Nonpositive, and vanishing as
/// M → ∞ then δ → 0.
pub fn ass_correction(s: &ShellSpec, mix: &Mixture) -> Result<f64> {
    let nu = shell_measure(s)?;
    Ok(-s.delta * mix.xi_prime(1.0)? + nu.ln() / s.m_dim as f64)
}
