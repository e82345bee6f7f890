//! Overlap-moment diagnostics over groups of independent Gibbs chains.
//!
//! A "group" is a set of chains sharing one disorder realization; distinct
//! groups use independent disorder. Within a group, chain ℓ supplies
//! replica ℓ, so time-paired tuples across chains are draws from the
//! replicated Gibbs measure ⟨·⟩, and averages across groups estimate the
//! disorder expectation E.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{mean_stderr, Kahan};
use crate::rng;

use super::mcmc::GibbsChain;

/// A product Π R_{a,b}^e of replica overlaps with 1-based replica indices.
/// The empty product is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMonomial {
    factors: Vec<(usize, usize, u32)>,
}

impl OverlapMonomial {
    /// The constant monomial 1.
    pub fn one() -> Self {
        Self {
            factors: Vec::new(),
        }
    }

    /// Builds Π R_{a,b}^e from (a, b, e) triples; replicas are 1-based and
    /// each factor needs two distinct replicas and exponent ≥ 1.
    pub fn new(factors: impl IntoIterator<Item = (usize, usize, u32)>) -> Result<Self> {
        let mut fs = Vec::new();
        for (a, b, e) in factors {
            if a < 1 || b < 1 {
                return Err(Error::Validation(
                    "replica indices in overlap monomials are 1-based".into(),
                ));
            }
            if a == b {
                return Err(Error::Validation(format!(
                    "R[{a},{a}] is identically 1; factors need distinct replicas"
                )));
            }
            if e < 1 {
                return Err(Error::Validation("factor exponent must be >= 1".into()));
            }
            fs.push((a.min(b), a.max(b), e));
        }
        Ok(Self { factors: fs })
    }

    /// Largest replica index used (0 for the constant 1).
    pub fn max_replica(&self) -> usize {
        self.factors.iter().map(|&(_, b, _)| b).max().unwrap_or(0)
    }

    fn eval<F: Fn(usize, usize) -> f64>(&self, r: F) -> f64 {
        self.factors
            .iter()
            .map(|&(a, b, e)| r(a, b).powi(e as i32))
            .product()
    }
}

impl fmt::Display for OverlapMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (i, &(a, b, e)) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "R[{a},{b}]")?;
            } else {
                write!(f, "R[{a},{b}]^{e}")?;
            }
        }
        Ok(())
    }
}

/// One requested overlap-moment identity: power p, replica count n, and a
/// monomial f of the overlaps among replicas 1..n (needs n+1 chains).
#[derive(Debug, Clone)]
pub struct PhiSpec {
    pub p: u32,
    pub n: usize,
    pub f: OverlapMonomial,
}

/// Estimated identity residual
/// Φ = |E⟨f·R_{1,n+1}^p⟩ − (1/n)E⟨f⟩E⟨R_{1,2}^p⟩ − (1/n)Σ_{ℓ=2}^n E⟨f·R_{1,ℓ}^p⟩|,
/// which vanishes in the large-size limit once the vanishing perturbation
/// forces the overlap-moment identities.
#[derive(Debug, Clone)]
pub struct PhiEstimate {
    pub p: u32,
    pub n: usize,
    /// Human-readable form of the monomial f.
    pub f_desc: String,
    pub phi: f64,
    /// Bootstrap standard error over disorder groups.
    pub stderr: f64,
}

/// Overlap diagnostics with bootstrap errors over disorder groups.
#[derive(Debug, Clone)]
pub struct StatReport {
    pub phi: Vec<PhiEstimate>,
    /// Rate of E⟨1{R_{1,2} < min(R_{1,3}, R_{2,3}) − η}⟩ on chain triples;
    /// small values are consistent with an ultrametric overlap support.
    pub ultrametric_violation: f64,
    pub ultrametric_stderr: f64,
    /// (estimate, stderr) of E⟨R_{1,2}⟩.
    pub overlap_first: (f64, f64),
    /// (estimate, stderr) of E⟨R_{1,2}²⟩.
    pub overlap_second: (f64, f64),
    /// (estimate, stderr) of the mean stored energy across all chains.
    pub mean_energy: (f64, f64),
    pub n_groups: usize,
    pub samples_per_chain: usize,
}

/// Per-(spec, group) time averages entering the Φ estimator.
struct SpecGroupSummary {
    a: f64,
    f: f64,
    b: f64,
    c: Vec<f64>,
}

fn mean_at(vals: &[f64], idx: &[usize]) -> f64 {
    let mut acc = Kahan::new();
    for &i in idx {
        acc.add(vals[i]);
    }
    acc.total() / idx.len() as f64
}

fn phi_at(sums: &[SpecGroupSummary], n: usize, idx: &[usize]) -> f64 {
    let inv_n = 1.0 / n as f64;
    let mean = |get: &dyn Fn(&SpecGroupSummary) -> f64| -> f64 {
        let mut acc = Kahan::new();
        for &i in idx {
            acc.add(get(&sums[i]));
        }
        acc.total() / idx.len() as f64
    };
    let a = mean(&|s| s.a);
    let f = mean(&|s| s.f);
    let b = mean(&|s| s.b);
    let mut c_sum = 0.0;
    for l in 0..n.saturating_sub(1) {
        c_sum += mean(&|s| s.c[l]);
    }
    (a - inv_n * f * b - inv_n * c_sum).abs()
}

fn sd(xs: &[f64]) -> f64 {
    let (_, se) = mean_stderr(xs);
    se * (xs.len() as f64).sqrt()
}

/// Estimates the requested Φ identities, the ultrametricity violation rate at
/// margin `eta`, and low overlap moments from groups of independent chains.
///
/// Each group must hold at least max(3, n+1) chains for the largest
/// requested n; replicas for every statistic come from distinct chains.
/// Standard errors are bootstrapped by resampling whole groups.
pub fn overlap_statistics(
    groups: &[Vec<GibbsChain>],
    specs: &[PhiSpec],
    eta: f64,
    seed: u64,
) -> Result<StatReport> {
    if groups.len() < 2 {
        return Err(Error::Insufficient(
            "need at least 2 disorder groups for cross-group errors".into(),
        ));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::Validation(format!(
            "ultrametric margin eta = {eta} must be finite and >= 0"
        )));
    }
    let mut n_max = 2usize;
    for s in specs {
        if s.p < 1 || s.n < 1 {
            return Err(Error::Validation("each spec needs p >= 1 and n >= 1".into()));
        }
        if s.f.max_replica() > s.n {
            return Err(Error::Validation(format!(
                "monomial {} uses replica {}, but only n = {} replicas are declared",
                s.f,
                s.f.max_replica(),
                s.n
            )));
        }
        n_max = n_max.max(s.n);
    }
    let need = 3.max(n_max + 1);
    for (gi, g) in groups.iter().enumerate() {
        if g.len() < need {
            return Err(Error::Insufficient(format!(
                "group {gi} has {} chains; the largest request needs {need} \
                 (n+1 chains for n replicas, 3 for the ultrametric triple)",
                g.len()
            )));
        }
    }
    let t_len = groups[0][0].samples.len();
    let n_coord = groups[0][0].samples.first().map(Vec::len).unwrap_or(0);
    if t_len == 0 || n_coord == 0 {
        return Err(Error::Insufficient("chains store no samples".into()));
    }
    for g in groups {
        for ch in g {
            if ch.samples.len() != t_len {
                return Err(Error::Validation(
                    "all chains must store the same number of samples".into(),
                ));
            }
            if ch.samples[0].len() != n_coord {
                return Err(Error::Validation(
                    "all chains must share the same system size".into(),
                ));
            }
        }
    }

    let overlap = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n_coord as f64
    };

    // Per-group time averages for every requested spec.
    let mut spec_sums: Vec<Vec<SpecGroupSummary>> = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut per_group = Vec::with_capacity(groups.len());
        for g in groups {
            let reps = &g[..spec.n + 1];
            let mut a = Kahan::new();
            let mut fm = Kahan::new();
            let mut b = Kahan::new();
            let mut c: Vec<Kahan> = (0..spec.n.saturating_sub(1)).map(|_| Kahan::new()).collect();
            for t in 0..t_len {
                let r = |x: usize, y: usize| overlap(&reps[x - 1].samples[t], &reps[y - 1].samples[t]);
                let fv = spec.f.eval(r);
                a.add(fv * r(1, spec.n + 1).powi(spec.p as i32));
                fm.add(fv);
                b.add(r(1, 2).powi(spec.p as i32));
                for l in 2..=spec.n {
                    c[l - 2].add(fv * r(1, l).powi(spec.p as i32));
                }
            }
            let inv_t = 1.0 / t_len as f64;
            per_group.push(SpecGroupSummary {
                a: a.total() * inv_t,
                f: fm.total() * inv_t,
                b: b.total() * inv_t,
                c: c.into_iter().map(|k| k.total() * inv_t).collect(),
            });
        }
        spec_sums.push(per_group);
    }

    // Ultrametric triples, overlap moments, and energies per group.
    let mut ultra_g = Vec::with_capacity(groups.len());
    let mut r1_g = Vec::with_capacity(groups.len());
    let mut r2_g = Vec::with_capacity(groups.len());
    let mut e_g = Vec::with_capacity(groups.len());
    for g in groups {
        let mut ultra = Kahan::new();
        let mut r1 = Kahan::new();
        let mut r2 = Kahan::new();
        for t in 0..t_len {
            let r12 = overlap(&g[0].samples[t], &g[1].samples[t]);
            let r13 = overlap(&g[0].samples[t], &g[2].samples[t]);
            let r23 = overlap(&g[1].samples[t], &g[2].samples[t]);
            if r12 < r13.min(r23) - eta {
                ultra.add(1.0);
            }
            r1.add(r12);
            r2.add(r12 * r12);
        }
        let inv_t = 1.0 / t_len as f64;
        ultra_g.push(ultra.total() * inv_t);
        r1_g.push(r1.total() * inv_t);
        r2_g.push(r2.total() * inv_t);
        let mut e = Kahan::new();
        for ch in g {
            for &v in &ch.energies {
                e.add(v);
            }
        }
        e_g.push(e.total() / (g.len() * t_len) as f64);
    }

    let all_idx: Vec<usize> = (0..groups.len()).collect();
    let point_phi: Vec<f64> = specs
        .iter()
        .zip(&spec_sums)
        .map(|(s, sums)| phi_at(sums, s.n, &all_idx))
        .collect();

    // Bootstrap whole groups.
    const RESAMPLES: usize = 500;
    let mut brng = rng::derive(seed, &[rng::tags::BOOTSTRAP]);
    let mut phi_b: Vec<Vec<f64>> = vec![Vec::with_capacity(RESAMPLES); specs.len()];
    let mut ultra_b = Vec::with_capacity(RESAMPLES);
    let mut r1_b = Vec::with_capacity(RESAMPLES);
    let mut r2_b = Vec::with_capacity(RESAMPLES);
    let mut e_b = Vec::with_capacity(RESAMPLES);
    let mut idx = vec![0usize; groups.len()];
    for _ in 0..RESAMPLES {
        for slot in idx.iter_mut() {
            *slot = brng.gen_range(0..groups.len());
        }
        for (si, s) in specs.iter().enumerate() {
            phi_b[si].push(phi_at(&spec_sums[si], s.n, &idx));
        }
        ultra_b.push(mean_at(&ultra_g, &idx));
        r1_b.push(mean_at(&r1_g, &idx));
        r2_b.push(mean_at(&r2_g, &idx));
        e_b.push(mean_at(&e_g, &idx));
    }

    let phi = specs
        .iter()
        .enumerate()
        .map(|(si, s)| PhiEstimate {
            p: s.p,
            n: s.n,
            f_desc: s.f.to_string(),
            phi: point_phi[si],
            stderr: sd(&phi_b[si]),
        })
        .collect();

    Ok(StatReport {
        phi,
        ultrametric_violation: mean_at(&ultra_g, &all_idx),
        ultrametric_stderr: sd(&ultra_b),
        overlap_first: (mean_at(&r1_g, &all_idx), sd(&r1_b)),
        overlap_second: (mean_at(&r2_g, &all_idx), sd(&r2_b)),
        mean_energy: (mean_at(&e_g, &all_idx), sd(&e_b)),
        n_groups: groups.len(),
        samples_per_chain: t_len,
    })
}
