//! The finite-M functional: a recursive Gaussian construction whose large-M
//! limit recovers the functional value computed by [`crate::parisi`].
//!
//! For a triplet (k, m, q) draw independent M-dimensional Gaussian vectors
//! z_p (p = 0..k) whose coordinates are i.i.d. with variance
//! Δ_p = ξ′(q_{p+1}) − ξ′(q_p). With Λ_M the spherical log-MGF
//!
//!   Λ_M(r) = log ∫_{S_M} e^{ε·s} dλ_M(ε),   ‖s‖ = r,
//!
//! set X_{k+1} = Λ_M(‖z_0 + … + z_k‖) and descend
//! X_p = (1/m_p) log E_p exp(m_p X_{p+1}), where E_p integrates z_p only and
//! m_p = 0 means a plain average. The functional value is
//! pm = X_0/M − ½ Σ_p m_p (θ(q_{p+1}) − θ(q_p)).
//!
//! # Radial collapse
//!
//! X_{k+1} depends on the z's only through the running norm, and adding an
//! isotropic Gaussian to a vector of norm r produces norm
//! √((r + a)² + s²) where a ~ N(0, Δ_p) is the component along the current
//! direction and s² ~ Δ_p·χ²_{M−1} the perpendicular part. The recursion
//! therefore closes over scalar functions G_p(r) on a radial grid:
//!
//!   G_{k+1}(r) = Λ_M(r),
//!   G_p(r) = (1/m_p) log E exp(m_p G_{p+1}(√((r+a)² + s²))),
//!
//! integrated by Gauss-Hermite × Gauss-gamma product quadrature with
//! monotone cubic interpolation of G_{p+1} between grid points. This replaces
//! exponentially nested Monte Carlo with O(k · grid · nodes²) work; the MC
//! path ([`pm_value_mc`]) exists precisely to validate the collapse at small
//! M. Everything is evaluated in log space with max subtraction.
//!
//! Every quantity here is deterministic quadrature — identical bits across
//! runs and thread counts.

use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::numeric::{logsumexp, Kahan};
use crate::par;
use crate::quad::{gauss_gamma, gauss_hermite, gauss_jacobi_symmetric, Rule};
use crate::rng;
use crate::rsb::{l1_distance, FunctionalOrderParameter};
use rand::Rng;
use rand_distr::StandardNormal;

/// m_p below this uses the plain-average branch.
const M_LIMIT_THRESHOLD: f64 = 1e-10;

/// Discretization knobs for the radial recursion.
#[derive(Debug, Clone)]
pub struct FiniteMConfig {
    /// Sphere dimension M ≥ 1.
    pub m_dim: usize,
    /// Radial grid size (0 plus log-spaced points up to r_max).
    pub r_grid_size: usize,
    /// r_max in units of √(M ξ′(1)), the root-mean-square of ‖Σ z_p‖.
    pub r_max_sigmas: f64,
    /// Gauss-Hermite nodes for the along-direction component a.
    pub gh_nodes: usize,
    /// Gauss-gamma nodes for the perpendicular component s² (χ²_{M−1}).
    pub chi_nodes: usize,
}

impl Default for FiniteMConfig {
    fn default() -> Self {
        Self {
            m_dim: 32,
            r_grid_size: 512,
            r_max_sigmas: 8.0,
            gh_nodes: 40,
            chi_nodes: 24,
        }
    }
}

impl FiniteMConfig {
    pub fn with_m(m_dim: usize) -> Self {
        Self {
            m_dim,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m_dim < 1 {
            return Err(Error::Validation("sphere dimension M must be >= 1".into()));
        }
        if self.r_grid_size < 8 || self.gh_nodes < 8 || self.chi_nodes < 8 {
            return Err(Error::Validation(
                "all node counts (r_grid_size, gh_nodes, chi_nodes) must be >= 8".into(),
            ));
        }
        if !(self.r_max_sigmas >= 3.0) {
            return Err(Error::Validation("r_max_sigmas must be >= 3".into()));
        }
        Ok(())
    }

    /// The refined configuration used for the error estimate.
    fn refined(&self) -> Self {
        Self {
            m_dim: self.m_dim,
            r_grid_size: self.r_grid_size * 2,
            r_max_sigmas: self.r_max_sigmas,
            gh_nodes: self.gh_nodes * 2,
            chi_nodes: self.chi_nodes * 2,
        }
    }
}

/// Diagnostics for one integration level of the recursion.
#[derive(Debug, Clone)]
pub struct LevelSummary {
    /// Level index p (z_p integrated at this step); 0 is the outermost.
    pub level: usize,
    /// Replica weight m_p applied at this level.
    pub m_weight: f64,
    /// Coordinate variance Δ_p of z_p.
    pub variance: f64,
    /// G_p(0) after integrating this level.
    pub g_at_zero: f64,
    /// G_p(r_max) after integrating this level.
    pub g_at_rmax: f64,
}

/// Output of [`pm_value`].
#[derive(Debug, Clone)]
pub struct FiniteMResult {
    /// X_0/M, the per-coordinate value of the recursion at the root.
    pub x0: f64,
    /// The functional value x0 − ½ Σ m_p (θ(q_{p+1}) − θ(q_p)).
    pub pm: f64,
    /// Per-level diagnostics, outermost (p = 0) first.
    pub per_level_grids: Vec<LevelSummary>,
    /// max(|refined − base| , 1e-9) over the pm values of the two passes.
    pub error_estimate: f64,
}

/// Monte Carlo counterpart of [`pm_value`], with its own Λ_M evaluation path.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub x0: f64,
    pub pm: f64,
    /// Standard error of `pm` over the outermost sample layer.
    pub stderr: f64,
}

/// Both sides of the order-parameter continuity bound
/// |pm(f1) − pm(f2)| ≤ (ξ′(1)/2)·‖x̄_1 − x̄_2‖_{L¹}.
#[derive(Debug, Clone)]
pub struct LipschitzGap {
    pub lhs: f64,
    pub rhs: f64,
    /// Larger of the two pm error estimates.
    pub error_estimate: f64,
}

// ---------------------------------------------------------------------------
// Spherical log-MGF
// ---------------------------------------------------------------------------

/// log cosh with no overflow for large |x|.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Λ_M evaluator with a cached quadrature rule.
///
/// The first coordinate of a uniform point on the radius-√M sphere in M
/// dimensions has density ∝ (1 − t²/M)^{(M−3)/2} on [−√M, √M], so
/// Λ_M(r) = log ∫ e^{rt} w_M(t) dt collapses to a single log-sum-exp over a
/// symmetric Jacobi rule. M = 1 is the two-point measure {±1}.
pub(crate) struct SphericalMgf {
    m_dim: usize,
    /// √M · u_j for the Jacobi nodes u_j.
    scaled_nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl SphericalMgf {
    pub(crate) fn new(m_dim: usize, nodes: usize) -> Self {
        if m_dim == 1 {
            return Self {
                m_dim,
                scaled_nodes: Vec::new(),
                log_weights: Vec::new(),
            };
        }
        let mf = m_dim as f64;
        let lambda = (mf - 3.0) / 2.0;
        let rule = gauss_jacobi_symmetric(nodes, lambda);
        let scaled_nodes: Vec<f64> = rule.nodes.iter().map(|&u| u * mf.sqrt()).collect();
        let log_weights: Vec<f64> = rule.weights.iter().map(|&w| w.ln()).collect();
        Self {
            m_dim,
            scaled_nodes,
            log_weights,
        }
    }

    pub(crate) fn eval(&self, r: f64) -> f64 {
        if self.m_dim == 1 {
            return ln_cosh(r);
        }
        let terms: Vec<f64> = self
            .scaled_nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&t, &lw)| r * t + lw)
            .collect();
        logsumexp(&terms)
    }
}

/// Node count needed for e^{c·u} against the Jacobi weight: roughly c/2
/// polynomial degrees plus margin.
pub(crate) fn mgf_node_count(c_max: f64, scale: f64) -> usize {
    (((0.8 * c_max + 48.0) * scale).ceil() as usize).max(48)
}

/// Λ_M(r): the spherical log-moment-generating function.
///
/// Even in the sign of the argument vector, zero at r = 0, convex and
/// nondecreasing in r, bounded by r√M.
pub fn spherical_logmgf(m_dim: usize, r: f64) -> Result<f64> {
    if m_dim < 1 {
        return Err(Error::Validation("sphere dimension M must be >= 1".into()));
    }
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("radial argument {r} must be >= 0")));
    }
    let mgf = SphericalMgf::new(m_dim, mgf_node_count(r * (m_dim as f64).sqrt(), 1.0));
    Ok(mgf.eval(r))
}

// ---------------------------------------------------------------------------
// Monotone cubic interpolation (Fritsch-Carlson slopes)
// ---------------------------------------------------------------------------

/// Piecewise-cubic Hermite interpolant of monotone shape-preserving slopes;
/// evaluation outside the knot range extrapolates linearly with the end
/// slopes.
struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 3 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let sec: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if sec[i - 1] * sec[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / sec[i - 1] + w2 / sec[i]);
            }
        }
        d[0] = Self::end_slope(h[0], h[1], sec[0], sec[1]);
        d[n - 1] = Self::end_slope(h[n - 2], h[n - 3], sec[n - 2], sec[n - 3]);
        Self { xs, ys, slopes: d }
    }

    /// Three-point end slope with the usual shape-preserving clamps.
    fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
        let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
        if d * s0 <= 0.0 {
            0.0
        } else if s0 * s1 < 0.0 && d.abs() > 3.0 * s0.abs() {
            3.0 * s0
        } else {
            d
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        // Binary search for the containing interval.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.xs[lo + 1] - self.xs[lo];
        let t = (x - self.xs[lo]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        self.ys[lo] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * self.slopes[lo] * (t3 - 2.0 * t2 + t)
            + self.ys[lo + 1] * (-2.0 * t3 + 3.0 * t2)
            + h * self.slopes[lo + 1] * (t3 - t2)
    }
}

// ---------------------------------------------------------------------------
// The radial recursion
// ---------------------------------------------------------------------------

/// One integration step: the (a, s², log-weight) product nodes for variance
/// `delta` at dimension M.
fn level_nodes(delta: f64, m_dim: usize, gh: &Rule, chi: Option<&Rule>) -> Vec<(f64, f64, f64)> {
    let a_scale = (2.0 * delta).sqrt();
    match chi {
        None => {
            debug_assert_eq!(m_dim, 1);
            gh.nodes
                .iter()
                .zip(&gh.weights)
                .map(|(&x, &w)| (a_scale * x, 0.0, w.ln()))
                .collect()
        }
        Some(chi) => {
            let mut out = Vec::with_capacity(gh.nodes.len() * chi.nodes.len());
            for (&x, &wa) in gh.nodes.iter().zip(&gh.weights) {
                let a = a_scale * x;
                let lwa = wa.ln();
                for (&g, &ws) in chi.nodes.iter().zip(&chi.weights) {
                    out.push((a, 2.0 * delta * g, lwa + ws.ln()));
                }
            }
            out
        }
    }
}

/// G_p at `points` given G_{p+1} as an interpolant.
fn integrate_level(
    upper: &Pchip,
    nodes: &[(f64, f64, f64)],
    m_weight: f64,
    points: &[f64],
) -> Vec<f64> {
    par::map_slice(points, |&r| {
        if m_weight < M_LIMIT_THRESHOLD {
            let mut acc = Kahan::new();
            for &(a, s2, lw) in nodes {
                let arg = ((r + a) * (r + a) + s2).sqrt();
                acc.add(lw.exp() * upper.eval(arg));
            }
            acc.total()
        } else {
            let terms: Vec<f64> = nodes
                .iter()
                .map(|&(a, s2, lw)| {
                    let arg = ((r + a) * (r + a) + s2).sqrt();
                    lw + m_weight * upper.eval(arg)
                })
                .collect();
            logsumexp(&terms) / m_weight
        }
    })
}

struct Pass {
    x0: f64,
    pm: f64,
    levels: Vec<LevelSummary>,
}

fn pm_pass(
    mix: &Mixture,
    f: &FunctionalOrderParameter,
    cfg: &FiniteMConfig,
    mgf_scale: f64,
) -> Result<Pass> {
    let m_dim = cfg.m_dim;
    let mf = m_dim as f64;
    let k = f.k();
    let q = f.q();
    let mw = f.m();
    let deltas: Vec<f64> = (0..=k)
        .map(|p| mix.xi_prime(q[p + 1]).unwrap() - mix.xi_prime(q[p]).unwrap())
        .collect();

    // Radial grid: 0, then log-spaced from r_max·1e-5 to r_max. The floor on
    // r_max only matters for the zero mixture, where the state never leaves 0.
    let r_max = (cfg.r_max_sigmas * (mf * mix.xi_prime(1.0).unwrap()).sqrt()).max(1.0);
    let n = cfg.r_grid_size;
    let mut grid = Vec::with_capacity(n);
    grid.push(0.0);
    for i in 1..n {
        let t = (n - 1 - i) as f64 / (n - 2) as f64;
        grid.push(r_max * 10f64.powf(-5.0 * t));
    }

    let mgf = SphericalMgf::new(m_dim, mgf_node_count(r_max * mf.sqrt(), mgf_scale));
    let mut g: Vec<f64> = par::map_slice(&grid, |&r| mgf.eval(r));

    let gh = gauss_hermite(cfg.gh_nodes);
    let chi = if m_dim > 1 {
        Some(gauss_gamma(cfg.chi_nodes, (mf - 1.0) / 2.0))
    } else {
        None
    };

    let mut levels: Vec<LevelSummary> = Vec::with_capacity(k + 1);
    for p in (1..=k).rev() {
        if deltas[p] != 0.0 {
            let nodes = level_nodes(deltas[p], m_dim, &gh, chi.as_ref());
            let upper = Pchip::new(grid.clone(), g);
            g = integrate_level(&upper, &nodes, mw[p], &grid);
        }
        levels.push(LevelSummary {
            level: p,
            m_weight: mw[p],
            variance: deltas[p],
            g_at_zero: g[0],
            g_at_rmax: *g.last().unwrap(),
        });
    }

    // Outermost level (m_0 = 0): only the endpoints are needed.
    let upper = Pchip::new(grid.clone(), g);
    let ends = if deltas[0] != 0.0 {
        let nodes = level_nodes(deltas[0], m_dim, &gh, chi.as_ref());
        integrate_level(&upper, &nodes, mw[0], &[0.0, r_max])
    } else {
        vec![upper.eval(0.0), upper.eval(r_max)]
    };
    let x0_raw = ends[0];
    levels.push(LevelSummary {
        level: 0,
        m_weight: mw[0],
        variance: deltas[0],
        g_at_zero: ends[0],
        g_at_rmax: ends[1],
    });
    levels.reverse();

    let x0 = x0_raw / mf;
    let mut theta_sum = Kahan::new();
    for p in 1..=k {
        theta_sum.add(mw[p] * (mix.theta(q[p + 1]).unwrap() - mix.theta(q[p]).unwrap()));
    }
    let pm = x0 - 0.5 * theta_sum.total();
    Ok(Pass { x0, pm, levels })
}

/// Evaluates the finite-M functional by deterministic quadrature.
///
/// Runs the radial recursion at the given configuration and once more at a
/// refined one (grid and node counts doubled); reports the refined values
/// with the disagreement as `error_estimate`.
pub fn pm_value(
    mix: &Mixture,
    f: &FunctionalOrderParameter,
    cfg: &FiniteMConfig,
) -> Result<FiniteMResult> {
    cfg.validate()?;
    if f.k() > 3 {
        return Err(Error::CostGuard(format!(
            "finite-M recursion is limited to k <= 3 levels (got k = {}); \
             each level multiplies quadrature cost by the node-product",
            f.k()
        )));
    }
    let base = pm_pass(mix, f, cfg, 1.0)?;
    let fine = pm_pass(mix, f, &cfg.refined(), 1.5)?;
    let error_estimate = (fine.pm - base.pm).abs().max(1e-9);
    Ok(FiniteMResult {
        x0: fine.x0,
        pm: fine.pm,
        per_level_grids: fine.levels,
        error_estimate,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo validation path
// ---------------------------------------------------------------------------

/// Λ_M by composite Simpson integration in log space — deliberately separate
/// from the Gauss-Jacobi path so the two validate each other. Substituting
/// t = √M sin φ removes the endpoint singularities for every M ≥ 2:
/// ∫ e^{rt}(1 − t²/M)^{(M−3)/2} dt ∝ ∫ e^{r√M sin φ} cos^{M−2}φ dφ.
struct SimpsonMgf {
    m_dim: usize,
    cache_max: f64,
    step: f64,
    cache: Vec<f64>,
}

impl SimpsonMgf {
    const POINTS: usize = 4097;

    fn direct(m_dim: usize, r: f64) -> f64 {
        if m_dim == 1 {
            return ln_cosh(r);
        }
        let mf = m_dim as f64;
        let n = Self::POINTS;
        let h = std::f64::consts::PI / (n - 1) as f64;
        let log_f = |i: usize, r: f64| -> f64 {
            let phi = -std::f64::consts::FRAC_PI_2 + i as f64 * h;
            let c = phi.cos().max(0.0);
            let weight = if m_dim == 2 {
                0.0
            } else {
                (mf - 2.0) * c.max(1e-300).ln()
            };
            let simpson = if i == 0 || i == n - 1 {
                1.0f64
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            r * mf.sqrt() * phi.sin() + weight + simpson.ln()
        };
        let at = |r: f64| -> f64 {
            let terms: Vec<f64> = (0..n).map(|i| log_f(i, r)).collect();
            logsumexp(&terms)
        };
        at(r) - at(0.0)
    }

    fn new(m_dim: usize, cache_max: f64) -> Self {
        let n = 16_384usize;
        let step = cache_max / (n - 1) as f64;
        let cache = par::map_indexed(n, |i| Self::direct(m_dim, i as f64 * step));
        Self {
            m_dim,
            cache_max,
            step,
            cache,
        }
    }

    fn eval(&self, r: f64) -> f64 {
        if r >= self.cache_max {
            return Self::direct(self.m_dim, r);
        }
        let t = r / self.step;
        let i = (t as usize).min(self.cache.len() - 2);
        let frac = t - i as f64;
        self.cache[i] * (1.0 - frac) + self.cache[i + 1] * frac
    }
}

/// Brute-force Monte Carlo evaluation of the finite-M functional, drawing
/// the Gaussian vectors directly (no radial collapse) and using the Simpson
/// Λ_M path. Supports k ≤ 2; the outermost plain average supplies the
/// standard error.
pub fn pm_value_mc(
    mix: &Mixture,
    f: &FunctionalOrderParameter,
    m_dim: usize,
    outer_samples: usize,
    inner_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m_dim < 1 {
        return Err(Error::Validation("sphere dimension M must be >= 1".into()));
    }
    if f.k() > 2 {
        return Err(Error::CostGuard(
            "Monte Carlo evaluation is limited to k <= 2 (nested sampling cost)".into(),
        ));
    }
    if outer_samples < 16 || inner_samples < 16 {
        return Err(Error::Validation("need at least 16 samples per layer".into()));
    }
    let k = f.k();
    let q = f.q();
    let mw = f.m();
    let mf = m_dim as f64;
    let deltas: Vec<f64> = (0..=k)
        .map(|p| mix.xi_prime(q[p + 1]).unwrap() - mix.xi_prime(q[p]).unwrap())
        .collect();
    let total_var: f64 = deltas.iter().sum();
    let cache_max = (total_var.sqrt() * (mf.sqrt() + 14.0)).max(1.0);
    let mgf = SimpsonMgf::new(m_dim, cache_max);

    // log ( (1/n) Σ exp(c · g(sample)) ) / c, or the plain mean when c ≈ 0.
    let log_mean_exp = |values: &[f64], c: f64| -> f64 {
        if c < M_LIMIT_THRESHOLD {
            let mut acc = Kahan::new();
            for &v in values {
                acc.add(v);
            }
            acc.total() / values.len() as f64
        } else {
            let scaled: Vec<f64> = values.iter().map(|&v| c * v).collect();
            (logsumexp(&scaled) - (values.len() as f64).ln()) / c
        }
    };

    let draw = |rng: &mut rand_chacha::ChaCha8Rng, delta: f64, buf: &mut [f64]| {
        let sd = delta.sqrt();
        for x in buf.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *x = sd * g;
        }
    };

    // Per-outer-sample values of X_1 (k = 1) or X_1 (k = 2).
    let per_outer: Vec<f64> = if k == 1 && deltas[0] == 0.0 {
        // Degenerate outer level: one flat layer of outer·inner samples,
        // X_0 = (1/m_1) log E exp(m_1 Λ(‖z_1‖)).
        let n = outer_samples * inner_samples;
        let lam = par::map_indexed(n, |i| {
            let mut rng = rng::derive(seed, &[rng::tags::MC_ORACLE, i as u64]);
            let mut z = vec![0.0; m_dim];
            draw(&mut rng, deltas[1], &mut z);
            mgf.eval(z.iter().map(|x| x * x).sum::<f64>().sqrt())
        });
        // Delta-method standard error of (1/c)·log mean(exp(c·Λ)).
        let c = mw[1];
        let x0_raw = log_mean_exp(&lam, c);
        let shifted: Vec<f64> = lam.iter().map(|&v| (c * v - c * x0_raw).exp()).collect();
        let (mean_w, se_w) = crate::numeric::mean_stderr(&shifted);
        let stderr_raw = se_w / mean_w.max(1e-300) / c.max(M_LIMIT_THRESHOLD);
        let pm = assemble_pm(mix, f, x0_raw / mf);
        return Ok(McEstimate {
            x0: x0_raw / mf,
            pm,
            stderr: stderr_raw / mf,
        });
    } else {
        par::map_indexed(outer_samples, |o| {
            let mut rng = rng::derive(seed, &[rng::tags::MC_ORACLE, o as u64]);
            let mut z0 = vec![0.0; m_dim];
            draw(&mut rng, deltas[0], &mut z0);
            let mut z1 = vec![0.0; m_dim];
            if k == 1 {
                let lam: Vec<f64> = (0..inner_samples)
                    .map(|_| {
                        draw(&mut rng, deltas[1], &mut z1);
                        let norm = z0
                            .iter()
                            .zip(&z1)
                            .map(|(a, b)| (a + b) * (a + b))
                            .sum::<f64>()
                            .sqrt();
                        mgf.eval(norm)
                    })
                    .collect();
                log_mean_exp(&lam, mw[1])
            } else {
                // k = 2: X_1(z_0) = (1/m_1) log E exp(m_1 X_2), X_2 nested.
                let mut z2 = vec![0.0; m_dim];
                let x2: Vec<f64> = (0..inner_samples)
                    .map(|_| {
                        draw(&mut rng, deltas[1], &mut z1);
                        let lam: Vec<f64> = (0..inner_samples)
                            .map(|_| {
                                draw(&mut rng, deltas[2], &mut z2);
                                let norm = z0
                                    .iter()
                                    .zip(&z1)
                                    .zip(&z2)
                                    .map(|((a, b), c)| (a + b + c) * (a + b + c))
                                    .sum::<f64>()
                                    .sqrt();
                                mgf.eval(norm)
                            })
                            .collect();
                        log_mean_exp(&lam, mw[2])
                    })
                    .collect();
                log_mean_exp(&x2, mw[1])
            }
        })
    };

    let (x0_raw, stderr_raw) = crate::numeric::mean_stderr(&per_outer);
    let x0 = x0_raw / mf;
    let pm = assemble_pm(mix, f, x0);
    Ok(McEstimate {
        x0,
        pm,
        stderr: stderr_raw / mf,
    })
}

fn assemble_pm(mix: &Mixture, f: &FunctionalOrderParameter, x0: f64) -> f64 {
    let mut theta_sum = Kahan::new();
    for p in 1..=f.k() {
        theta_sum.add(
            f.m()[p] * (mix.theta(f.q()[p + 1]).unwrap() - mix.theta(f.q()[p]).unwrap()),
        );
    }
    x0 - 0.5 * theta_sum.total()
}

/// Evaluates both sides of the continuity bound
/// |pm(f1) − pm(f2)| ≤ (ξ′(1)/2) · L¹-distance.
pub fn lipschitz_gap(
    mix: &Mixture,
    f1: &FunctionalOrderParameter,
    f2: &FunctionalOrderParameter,
    cfg: &FiniteMConfig,
) -> Result<LipschitzGap> {
    let a = pm_value(mix, f1, cfg)?;
    let b = pm_value(mix, f2, cfg)?;
    Ok(LipschitzGap {
        lhs: (a.pm - b.pm).abs(),
        rhs: 0.5 * mix.xi_prime(1.0).unwrap() * l1_distance(f1, f2),
        error_estimate: a.error_estimate.max(b.error_estimate),
    })
}
