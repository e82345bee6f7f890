//! Outer minimization of the functional over step order parameters.
//!
//! The search space at a fixed number of levels k is the set of triplets
//! (k, m, q) with ordered coordinates. Feasibility is enforced by
//! construction, not projection: each raw coordinate y ∈ ℝ maps to
//! u = sin²(y) ∈ [0, 1], and the u's stick-break into ordered sequences
//!   q_ℓ = q_{ℓ-1} + (1 − q_{ℓ-1})·u_ℓ,   m_ℓ = m_{ℓ-1} + (1 − m_{ℓ-1})·u'_ℓ,
//! with m_k = 1 pinned. Every raw vector decodes to a valid triplet and the
//! endpoints (u = 0 or 1) are attained exactly.
//!
//! The local search is Nelder-Mead on the raw coordinates (dimension 2k−1)
//! with the inner b-minimization solved exactly per evaluation. Restart
//! points come from a seeded additive-recurrence low-discrepancy sequence,
//! so reruns with the same seed are bitwise identical; restarts run through
//! the order-preserving parallel map and merge deterministically with a
//! lexicographic tie-break.
//!
//! Across k the sweep warm-starts level k+1 from the best k-level triplet by
//! splitting one plateau of x̄ (probed by small perturbations of each level),
//! which guarantees the per-k best values are nonincreasing up to solver
//! noise: a k-level triplet embeds in k+1 levels with a zero-width interval
//! without changing the function.

use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::par;
use crate::parisi::{infimum_over_b, ParisiEvaluation};
use crate::rng;
use crate::rsb::FunctionalOrderParameter;
use rand::Rng;

/// Knobs for the local search at one k.
#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Independent Nelder-Mead runs (first one uses the warm start when
    /// available).
    pub restarts: usize,
    /// Convergence tolerance on functional values.
    pub tol: f64,
    /// Iteration cap per Nelder-Mead run.
    pub max_iter: usize,
    /// Master seed for the restart sequence.
    pub seed: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            tol: 1e-9,
            max_iter: 600,
            seed: 0,
        }
    }
}

/// Best triplet found at one fixed k.
#[derive(Debug, Clone)]
pub struct KOptimum {
    pub param: FunctionalOrderParameter,
    pub value: f64,
    /// Inner-minimization details at the returned triplet.
    pub evaluation: ParisiEvaluation,
    /// False when some restart hit the iteration cap before its simplex
    /// collapsed; the best point found is still returned.
    pub converged: bool,
}

/// Outcome of the sweep over k = 1..k_max.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best: FunctionalOrderParameter,
    pub value: f64,
    /// Inner-minimization details at `best`.
    pub evaluation: ParisiEvaluation,
    /// (k, best value at k) in sweep order.
    pub per_k_values: Vec<(usize, f64)>,
    /// Total local-search runs across the sweep.
    pub restarts_used: usize,
    pub converged: bool,
}

/// Decodes raw coordinates (length 2k−1) into a valid triplet.
fn decode(k: usize, y: &[f64]) -> FunctionalOrderParameter {
    debug_assert_eq!(y.len(), 2 * k - 1);
    let u = |v: f64| {
        let s = v.sin();
        s * s
    };
    let mut q = Vec::with_capacity(k + 2);
    q.push(0.0);
    let mut prev = 0.0;
    for &yi in &y[..k] {
        prev += (1.0 - prev) * u(yi);
        q.push(prev);
    }
    q.push(1.0);
    let mut m = Vec::with_capacity(k + 1);
    m.push(0.0);
    prev = 0.0;
    for &yi in &y[k..] {
        prev += (1.0 - prev) * u(yi);
        m.push(prev);
    }
    m.push(1.0);
    FunctionalOrderParameter::new(k, m, q).expect("stick-breaking always yields a valid triplet")
}

/// Raw coordinates reproducing `f` under `decode` (up to roundoff).
fn encode(f: &FunctionalOrderParameter) -> Vec<f64> {
    let k = f.k();
    let mut y = Vec::with_capacity(2 * k - 1);
    let stick = |prev: f64, next: f64| -> f64 {
        let span = 1.0 - prev;
        let u = if span <= 1e-15 {
            0.0
        } else {
            ((next - prev) / span).clamp(0.0, 1.0)
        };
        u.sqrt().asin()
    };
    for l in 1..=k {
        y.push(stick(f.q()[l - 1], f.q()[l]));
    }
    for l in 1..k {
        y.push(stick(f.m()[l - 1], f.m()[l]));
    }
    y
}

/// Total order on (value, point) pairs: by value, then coordinates.
fn cmp_candidate(a: (f64, &[f64]), b: (f64, &[f64])) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| {
        for (x, y) in a.1.iter().zip(b.1) {
            let ord = x.total_cmp(y);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    })
}

struct NmOutcome {
    y: Vec<f64>,
    value: f64,
    converged: bool,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction ½, shrink ½)
/// with deterministic ordering.
fn nelder_mead(
    obj: &dyn Fn(&[f64]) -> f64,
    y0: &[f64],
    step: f64,
    ftol: f64,
    max_iter: usize,
) -> NmOutcome {
    let n = y0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(y0.to_vec());
    for i in 0..n {
        let mut v = y0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| obj(p)).collect();
    let mut converged = false;

    for _ in 0..max_iter {
        // Order by (value, coordinates); the secondary key makes exact ties
        // deterministic.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| {
            cmp_candidate((values[a], &simplex[a]), (values[b], &simplex[b]))
        });
        let reordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let revalued: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalued;

        if values[n].is_finite()
            && (values[n] - values[0]).abs() <= ftol * (1.0 + values[0].abs())
        {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let combine = |coef: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + coef * (centroid[j] - simplex[n][j]))
                .collect()
        };

        let reflected = combine(1.0);
        let f_reflected = obj(&reflected);
        if f_reflected < values[0] {
            let expanded = combine(2.0);
            let f_expanded = obj(&expanded);
            if f_expanded < f_reflected {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_reflected;
            continue;
        }
        let contracted = if f_reflected < values[n] {
            combine(0.5)
        } else {
            combine(-0.5)
        };
        let f_contracted = obj(&contracted);
        if f_contracted < values[n].min(f_reflected) {
            simplex[n] = contracted;
            values[n] = f_contracted;
            continue;
        }
        // Shrink toward the best vertex.
        let best_vertex = simplex[0].clone();
        for i in 1..=n {
            for (x, &b) in simplex[i].iter_mut().zip(&best_vertex) {
                *x = b + 0.5 * (*x - b);
            }
            values[i] = obj(&simplex[i]);
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if cmp_candidate((values[i], &simplex[i]), (values[best], &simplex[best]))
            == std::cmp::Ordering::Less
        {
            best = i;
        }
    }
    NmOutcome {
        y: simplex[best].clone(),
        value: values[best],
        converged,
    }
}

/// Low-discrepancy restart points: the additive recurrence driven by the
/// root of x^{d+1} = x + 1, offset by a seeded random shift, mapped into
/// [0, π/2] per coordinate.
fn restart_points(dim: usize, count: usize, seed: u64, k: usize) -> Vec<Vec<f64>> {
    let mut gamma = 1.5f64;
    for _ in 0..64 {
        gamma = (1.0 + gamma).powf(1.0 / (dim as f64 + 1.0));
    }
    let alphas: Vec<f64> = (1..=dim)
        .map(|i| (1.0 / gamma.powi(i as i32)).fract())
        .collect();
    let mut rng = rng::derive(seed, &[rng::tags::RESTART, k as u64]);
    let offsets: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (0..count)
        .map(|j| {
            (0..dim)
                .map(|i| {
                    let t = (offsets[i] + (j as f64 + 1.0) * alphas[i]).fract();
                    t * std::f64::consts::FRAC_PI_2
                })
                .collect()
        })
        .collect()
}

/// Neutral default start: equispaced q and m levels.
fn default_start(k: usize) -> Vec<f64> {
    let q: Vec<f64> = (0..=k + 1).map(|l| l as f64 / (k + 1) as f64).collect();
    let m: Vec<f64> = (0..=k).map(|l| l as f64 / k as f64).collect();
    encode(&FunctionalOrderParameter::new(k, m, q).unwrap())
}

fn optimize_at_k_from(
    mix: &Mixture,
    k: usize,
    opts: &OptimizeOptions,
    warm: Option<Vec<f64>>,
) -> Result<KOptimum> {
    if k < 1 {
        return Err(Error::Validation("level count k must be >= 1".into()));
    }
    if opts.restarts < 1 {
        return Err(Error::Validation("need at least one restart".into()));
    }
    let dim = 2 * k - 1;
    let objective = |y: &[f64]| -> f64 {
        let f = decode(k, y);
        match infimum_over_b(mix, &f) {
            Ok(eval) => eval.value,
            Err(_) => f64::INFINITY,
        }
    };
    let ftol = (opts.tol * 1e-3).max(1e-14);

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts);
    starts.push(warm.unwrap_or_else(|| default_start(k)));
    starts.extend(restart_points(dim, opts.restarts - 1, opts.seed, k));

    let outcomes = par::map_slice(&starts, |y0| {
        nelder_mead(&objective, y0, 0.35, ftol, opts.max_iter)
    });

    let mut best: Option<&NmOutcome> = None;
    for o in &outcomes {
        let better = match best {
            None => true,
            Some(b) => {
                cmp_candidate((o.value, &o.y), (b.value, &b.y)) == std::cmp::Ordering::Less
            }
        };
        if better {
            best = Some(o);
        }
    }
    let best = best.expect("at least one restart");
    if !best.value.is_finite() {
        return Err(Error::Numerical(
            "every restart failed to produce a finite functional value".into(),
        ));
    }
    let param = decode(k, &best.y);
    let evaluation = infimum_over_b(mix, &param)?;
    Ok(KOptimum {
        value: evaluation.value,
        param,
        evaluation,
        converged: outcomes.iter().all(|o| o.converged),
    })
}

/// Minimizes the functional over k-level triplets from `opts.restarts`
/// deterministic starting points.
pub fn optimize_at_k(mix: &Mixture, k: usize, opts: &OptimizeOptions) -> Result<KOptimum> {
    optimize_at_k_from(mix, k, opts, None)
}

/// Builds k+1-level warm starts by splitting one plateau of the best k-level
/// triplet, returning the most promising (probed by actual evaluation).
fn best_split(mix: &Mixture, f: &FunctionalOrderParameter) -> Vec<f64> {
    let k = f.k();
    let q = f.q();
    let m = f.m();
    let mut best: Option<(f64, FunctionalOrderParameter)> = None;
    for l in 1..=k {
        // Split level l: a new interval [q_l, q_l + 0.1·gap) at height
        // slightly below m_l.
        let gap_q = q[l + 1] - q[l];
        let gap_m = m[l] - m[l - 1];
        let mut new_q: Vec<f64> = q.to_vec();
        new_q.insert(l + 1, q[l] + 0.1 * gap_q);
        let mut new_m: Vec<f64> = m.to_vec();
        new_m.insert(l, m[l] - 0.1 * gap_m);
        let candidate = FunctionalOrderParameter::new(k + 1, new_m, new_q)
            .expect("split preserves ordering");
        let value = match infimum_over_b(mix, &candidate) {
            Ok(eval) => eval.value,
            Err(_) => f64::INFINITY,
        };
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, candidate));
        }
    }
    // Fall back to the plain zero-width embedding (same function value).
    let (split_value, split_param) = best.expect("k >= 1 always offers a split");
    let embed_q = {
        let mut v = q.to_vec();
        v.insert(1, q[1]);
        v
    };
    let embed_m = {
        let mut v = m.to_vec();
        v.insert(1, m[1]);
        v
    };
    let embedded = FunctionalOrderParameter::new(k + 1, embed_m, embed_q).unwrap();
    let embed_value = infimum_over_b(mix, &embedded)
        .map(|e| e.value)
        .unwrap_or(f64::INFINITY);
    if split_value <= embed_value {
        encode(&split_param)
    } else {
        encode(&embedded)
    }
}

/// Sweeps k = 1..k_max, warm-starting each level count from the previous
/// best, stopping early once the improvement drops below `tol`.
pub fn optimize(
    mix: &Mixture,
    k_max: usize,
    tol: f64,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    if k_max < 1 {
        return Err(Error::Validation("k_max must be >= 1".into()));
    }
    let mut per_k_values = Vec::with_capacity(k_max);
    let mut restarts_used = 0;
    let mut converged = true;
    let mut best: Option<KOptimum> = None;

    for k in 1..=k_max {
        let warm = best.as_ref().map(|b| best_split(mix, &b.param));
        let outcome = optimize_at_k_from(mix, k, opts, warm)?;
        restarts_used += opts.restarts;
        converged &= outcome.converged;
        per_k_values.push((k, outcome.value));
        let improvement = match &best {
            None => f64::INFINITY,
            Some(b) => b.value - outcome.value,
        };
        let take = best
            .as_ref()
            .is_none_or(|b| outcome.value <= b.value);
        if take {
            best = Some(outcome);
        }
        if improvement < tol && k > 1 {
            break;
        }
    }

    let best = best.expect("k_max >= 1");
    Ok(OptimizationResult {
        value: best.value,
        best: best.param,
        evaluation: best.evaluation,
        per_k_values,
        restarts_used,
        converged,
    })
}
