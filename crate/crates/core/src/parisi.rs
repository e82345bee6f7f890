//! The free-energy functional for a step order parameter and its inner
//! one-dimensional minimization.
//!
//! For a mixture with covariance function ξ and a triplet (k, m, q), define
//! depth sums d_ℓ = Σ_{ℓ≤p≤k} m_p (ξ′(q_{p+1}) − ξ′(q_p)) and, for a scalar
//! b > d_1, the shifted depths D_ℓ = b − d_ℓ with D_{k+1} = b. The functional
//! value is
//!
//!   P(x̄) = inf_{b>d_1} ½ ( b − 1 − log b + ξ′(q_1)/D_1
//!                          + Σ_ℓ (1/m_ℓ) log(D_{ℓ+1}/D_ℓ)
//!                          − Σ_ℓ m_ℓ (θ(q_{ℓ+1}) − θ(q_ℓ)) ),
//!
//! with θ(x) = xξ′(x) − ξ(x). Using D_{ℓ+1} = D_ℓ + m_ℓ Δ_ℓ where
//! Δ_ℓ = ξ′(q_{ℓ+1}) − ξ′(q_ℓ), each log ratio is evaluated as
//! (1/m_ℓ)·log1p(m_ℓ Δ_ℓ/D_ℓ), which stays accurate when adjacent levels are
//! close and has the analytic limit Δ_ℓ/D_ℓ as m_ℓ → 0.
//!
//! The b-derivative telescopes to the exact form
//!   ½ ( 1 − 1/b − ξ′(q_1)/D_1² − Σ_ℓ Δ_ℓ/(D_ℓ D_{ℓ+1}) ),
//! free of any division by m_ℓ. Differentiating once more gives
//!   ½ ( 1/b² + 2ξ′(q_1)/D_1³ + Σ_ℓ Δ_ℓ(D_ℓ + D_{ℓ+1})/(D_ℓ D_{ℓ+1})² ) > 0,
//! so the objective is strictly convex on (d_1, ∞); it diverges at both ends
//! of the interval, so the minimizer exists, is unique, and is the sole root
//! of the derivative. The minimizer search still performs a coarse objective
//! scan as a safeguard against floating-point surprises.

use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::numeric::Kahan;
use crate::opt1d::{brent_min, brent_root};
use crate::rsb::FunctionalOrderParameter;

/// Below this, (1/m)·log1p(mx) switches to its m → 0 limit x.
const M_LIMIT_THRESHOLD: f64 = 1e-10;

/// Result of the inner minimization over b.
#[derive(Debug, Clone)]
pub struct ParisiEvaluation {
    /// The minimized functional value.
    pub value: f64,
    /// The minimizing b (strictly above d_1).
    pub b_star: f64,
    /// Depth sums d_1..d_k.
    pub d: Vec<f64>,
    /// The bracketing interval the solver worked in.
    pub bracket: (f64, f64),
    /// Derivative-solver iterations, including bracket expansions.
    pub iterations: usize,
    /// Analytic b-derivative evaluated at `b_star`.
    pub derivative_at_b_star: f64,
}

/// Depth sums d_ℓ = Σ_{p=ℓ}^{k} m_p (ξ′(q_{p+1}) − ξ′(q_p)) for ℓ = 1..k.
///
/// The sequence is nonincreasing in ℓ and nonnegative, with
/// d_k = m_k (ξ′(q_{k+1}) − ξ′(q_k)).
pub fn cascade_depths(mix: &Mixture, f: &FunctionalOrderParameter) -> Vec<f64> {
    let k = f.k();
    let q = f.q();
    let m = f.m();
    let mut d = vec![0.0; k];
    let mut tail = Kahan::new();
    for l in (1..=k).rev() {
        let delta = mix.xi_prime(q[l + 1]).unwrap() - mix.xi_prime(q[l]).unwrap();
        tail.add(m[l] * delta);
        d[l - 1] = tail.total();
    }
    d
}

/// Per-level increments Δ_ℓ = ξ′(q_{ℓ+1}) − ξ′(q_ℓ) for ℓ = 1..k.
fn xi_prime_increments(mix: &Mixture, f: &FunctionalOrderParameter) -> Vec<f64> {
    let q = f.q();
    (1..=f.k())
        .map(|l| mix.xi_prime(q[l + 1]).unwrap() - mix.xi_prime(q[l]).unwrap())
        .collect()
}

fn check_b(b: f64, d1: f64) -> Result<()> {
    if !b.is_finite() || b - d1 <= 1e-14 {
        return Err(Error::Domain(format!(
            "b = {b} must exceed d_1 = {d1} (guard 1e-14)"
        )));
    }
    Ok(())
}

/// The bracketed objective at a given b > d_1.
pub fn objective_at_b(mix: &Mixture, f: &FunctionalOrderParameter, b: f64) -> Result<f64> {
    let d = cascade_depths(mix, f);
    objective_with_depths(mix, f, &d, b)
}

fn objective_with_depths(
    mix: &Mixture,
    f: &FunctionalOrderParameter,
    d: &[f64],
    b: f64,
) -> Result<f64> {
    check_b(b, d[0])?;
    let k = f.k();
    let q = f.q();
    let m = f.m();
    let mut acc = Kahan::new();
    acc.add(b - 1.0 - b.ln());
    acc.add(mix.xi_prime(q[1]).unwrap() / (b - d[0]));
    for l in 1..=k {
        let dl = b - d[l - 1];
        let delta = mix.xi_prime(q[l + 1]).unwrap() - mix.xi_prime(q[l]).unwrap();
        let ml = m[l];
        let log_ratio = if ml < M_LIMIT_THRESHOLD {
            delta / dl
        } else {
            (ml * delta / dl).ln_1p() / ml
        };
        acc.add(log_ratio);
        acc.add(-(ml * (mix.theta(q[l + 1]).unwrap() - mix.theta(q[l]).unwrap())));
    }
    Ok(0.5 * acc.total())
}

/// Analytic b-derivative of the objective,
/// ½ (1 − 1/b − ξ′(q_1)/D_1² − Σ_ℓ Δ_ℓ/(D_ℓ D_{ℓ+1})).
pub fn objective_derivative_at_b(
    mix: &Mixture,
    f: &FunctionalOrderParameter,
    b: f64,
) -> Result<f64> {
    let d = cascade_depths(mix, f);
    let deltas = xi_prime_increments(mix, f);
    derivative_with_depths(mix, f, &d, &deltas, b)
}

fn derivative_with_depths(
    mix: &Mixture,
    f: &FunctionalOrderParameter,
    d: &[f64],
    deltas: &[f64],
    b: f64,
) -> Result<f64> {
    check_b(b, d[0])?;
    let k = f.k();
    let q = f.q();
    let mut acc = Kahan::new();
    acc.add(1.0 - 1.0 / b);
    let d1 = b - d[0];
    acc.add(-mix.xi_prime(q[1]).unwrap() / (d1 * d1));
    for l in 1..=k {
        let dl = b - d[l - 1];
        let dl_next = if l == k { b } else { b - d[l] };
        acc.add(-deltas[l - 1] / (dl * dl_next));
    }
    Ok(0.5 * acc.total())
}

/// Minimizes the objective over b ∈ (d_1, ∞).
///
/// The derivative tends to −∞ at the left end and to ½ at +∞, so a sign
/// change always exists; it is bracketed by geometric expansion and solved by
/// a Brent root find, then cross-checked against a 64-point log-spaced
/// objective scan (refined with a Brent minimization if the scan wins).
pub fn infimum_over_b(mix: &Mixture, f: &FunctionalOrderParameter) -> Result<ParisiEvaluation> {
    let d = cascade_depths(mix, f);
    let deltas = xi_prime_increments(mix, f);
    let d1 = d[0];
    let deriv = |b: f64| derivative_with_depths(mix, f, &d, &deltas, b);
    let mut iterations = 0usize;

    // Left bracket edge: the derivative is analytically negative close to
    // d_1; shrink defensively if rounding says otherwise.
    let mut eps = f64::max(1e-8, 1e-8 * d1);
    let mut b_lo = d1 + eps;
    while deriv(b_lo)? >= 0.0 {
        eps *= 0.25;
        b_lo = d1 + eps;
        iterations += 1;
        if b_lo - d1 <= 1e-13 * f64::max(1.0, d1) {
            return Err(Error::Numerical(format!(
                "derivative is nonnegative arbitrarily close to the boundary d_1 = {d1}"
            )));
        }
    }

    // Right bracket edge by geometric expansion.
    let mut span = f64::max(1.0 + d1, 2.0 * eps);
    let mut b_hi = d1 + span;
    while deriv(b_hi)? <= 0.0 {
        span *= 2.0;
        b_hi = d1 + span;
        iterations += 1;
        if span > 1e12 {
            return Err(Error::Numerical(format!(
                "no sign change of the b-derivative up to b = d_1 + 1e12 (d_1 = {d1})"
            )));
        }
    }

    let (root, root_iters) = brent_root(|b| deriv(b).unwrap(), b_lo, b_hi, 1e-13, 200)
        .ok_or_else(|| Error::Numerical("derivative bracket lost its sign change".into()))?;
    iterations += root_iters;
    let mut b_star = root;
    let mut value = objective_with_depths(mix, f, &d, b_star)?;

    // Safeguard: coarse log-spaced objective scan over the bracket; refine
    // and keep the scan result if it beats the derivative root.
    let ratio = (b_hi - d1) / (b_lo - d1);
    let mut scan_best: Option<(usize, f64)> = None;
    let mut scan_points = Vec::with_capacity(64);
    for j in 0..64 {
        let t = j as f64 / 63.0;
        let b = d1 + (b_lo - d1) * ratio.powf(t);
        let v = objective_with_depths(mix, f, &d, b)?;
        scan_points.push(b);
        if scan_best.is_none_or(|(_, best)| v < best) {
            scan_best = Some((j, v));
        }
    }
    if let Some((j, v)) = scan_best {
        if v < value - 1e-12 * (1.0 + value.abs()) {
            let lo = scan_points[j.saturating_sub(1)];
            let hi = scan_points[(j + 1).min(63)];
            let (b_min, v_min, min_iters) = brent_min(
                |b| objective_with_depths(mix, f, &d, b).unwrap(),
                lo,
                hi,
                1e-13,
                200,
            );
            iterations += min_iters;
            if v_min < value {
                b_star = b_min;
                value = v_min;
            }
        }
    }

    let derivative_at_b_star = deriv(b_star)?;
    Ok(ParisiEvaluation {
        value,
        b_star,
        d,
        bracket: (b_lo, b_hi),
        iterations,
        derivative_at_b_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn pure2(beta: f64) -> Mixture {
        Mixture::pure(2, beta).unwrap()
    }

    fn one_step(q1: f64) -> FunctionalOrderParameter {
        FunctionalOrderParameter::one_step(q1).unwrap()
    }

    #[test]
    fn depth_sums_reference_values() {
        let d = cascade_depths(&pure2(1.0), &one_step(0.0));
        assert_eq!(d.len(), 1);
        assert!((d[0] - 2.0).abs() < 1e-15);

        let z = Mixture::zero();
        let f2 = FunctionalOrderParameter::new(
            2,
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.3, 0.7, 1.0],
        )
        .unwrap();
        for &dl in &cascade_depths(&z, &f2) {
            assert_eq!(dl, 0.0);
        }

        // β_2 = 1, k = 2, m = (0, 0.5, 1), q = (0, 0.3, 0.7, 1):
        // d_2 = 1·(2 − 1.4) = 0.6, d_1 = 0.6 + 0.5·(1.4 − 0.6) = 1.0.
        let d = cascade_depths(&pure2(1.0), &f2);
        assert!((d[1] - 0.6).abs() < 1e-14);
        assert!((d[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn depths_nonincreasing_on_random_inputs() {
        let mut rng = rng::derive(0x9a5e_0001, &[1]);
        for _ in 0..200 {
            let mix = Mixture::new([(2, rng.gen_range(0.0..2.0)), (3, rng.gen_range(0.0..2.0)), (5, rng.gen_range(0.0..1.0))])
            .unwrap();
            let mut qs: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut ms: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
            ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let f = FunctionalOrderParameter::new(
                3,
                vec![0.0, ms[0], ms[1], 1.0],
                vec![0.0, qs[0], qs[1], qs[2], 1.0],
            )
            .unwrap();
            let d = cascade_depths(&mix, &f);
            for w in d.windows(2) {
                assert!(w[0] >= w[1] - 1e-12);
            }
            assert!(*d.last().unwrap() >= -1e-15);
        }
    }

    #[test]
    fn objective_reference_values() {
        // Zero mixture at b = 1: ½(1 − 1 − log 1) = 0.
        let v = objective_at_b(&Mixture::zero(), &one_step(0.0), 1.0).unwrap();
        assert!(v.abs() < 1e-15);

        // β_2 = 1, q_1 = 0, b = 3: ½(3 − 1 − log 3 + log 3 − 1) = 0.5.
        let v = objective_at_b(&pure2(1.0), &one_step(0.0), 3.0).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn objective_matches_closed_form_at_q1_zero() {
        // For a one-step parameter with q_1 = 0 the log b terms cancel
        // symbolically: value = ½(b − 1 − log(b − ξ′(1)) − ξ′(1) + ξ(1)).
        let mix = Mixture::new([(2, 0.8), (4, 0.5)])
        .unwrap();
        let xi1 = mix.xi(1.0).unwrap();
        let xip1 = mix.xi_prime(1.0).unwrap();
        for b in [xip1 + 0.2, xip1 + 0.5, xip1 + 1.0, xip1 + 2.0, xip1 + 8.0] {
            let direct = objective_at_b(&mix, &one_step(0.0), b).unwrap();
            let closed = 0.5 * (b - 1.0 - (b - xip1).ln() - xip1 + xi1);
            assert!(
                (direct - closed).abs() < 1e-12 * (1.0 + closed.abs()),
                "b={b}: {direct} vs {closed}"
            );
        }
    }

    #[test]
    fn small_m_branch_is_continuous() {
        let mix = Mixture::new([(2, 1.0), (3, 0.7)])
        .unwrap();
        let make = |m1: f64| {
            FunctionalOrderParameter::new(2, vec![0.0, m1, 1.0], vec![0.0, 0.25, 0.6, 1.0])
                .unwrap()
        };
        let b = 6.0;
        // Tiny m (limit branch) vs just above the threshold (log1p branch).
        let below = objective_at_b(&mix, &make(1e-13), b).unwrap();
        let above = objective_at_b(&mix, &make(2e-10), b).unwrap();
        assert!((below - above).abs() < 1e-9, "{below} vs {above}");
        // And right at the branch point: switching branches at m ≈ 1e-10
        // perturbs the term by about m·(Δ/D)²/2, a few parts in 1e12.
        let lo = objective_at_b(&mix, &make(0.9999999e-10), b).unwrap();
        let hi = objective_at_b(&mix, &make(1.0000001e-10), b).unwrap();
        assert!((lo - hi).abs() < 1e-10);
    }

    #[test]
    fn objective_rejects_b_at_or_below_d1() {
        let mix = pure2(1.0);
        let f = one_step(0.0); // d_1 = 2
        assert!(matches!(
            objective_at_b(&mix, &f, 2.0),
            Err(Error::Domain(_))
        ));
        assert!(objective_at_b(&mix, &f, 1.5).is_err());
        assert!(objective_at_b(&mix, &f, 2.0 + 1e-13).is_ok());
    }

    #[test]
    fn infimum_zero_mixture() {
        let eval = infimum_over_b(&Mixture::zero(), &one_step(0.0)).unwrap();
        assert!(eval.value.abs() < 1e-12);
        assert!((eval.b_star - 1.0).abs() < 1e-9);
        assert!(eval.b_star > 0.0);
        assert!(eval.derivative_at_b_star.abs() < 1e-9);
    }

    #[test]
    fn infimum_replica_symmetric_point() {
        // β_2 = 1, q_1 = 0: stationarity 1 − 1/(b − ξ′(1)) = 0 gives
        // b* = 1 + ξ′(1) = 3 and value ξ(1)/2 = 0.5.
        let eval = infimum_over_b(&pure2(1.0), &one_step(0.0)).unwrap();
        assert!((eval.value - 0.5).abs() < 1e-12);
        assert!((eval.b_star - 3.0).abs() < 1e-9);
        assert!((eval.d[0] - 2.0).abs() < 1e-14);
        assert!(eval.bracket.0 < eval.b_star && eval.b_star < eval.bracket.1);
    }

    #[test]
    fn infimum_one_step_optimum_of_pure_two_spin() {
        // At β = 1 (> 1/√2) the one-step stationary point is
        // q = 1 − 1/√2, b* = 2√2, value √2 − 3/4 − ½ log √2.
        let q1 = 1.0 - 1.0 / std::f64::consts::SQRT_2;
        let eval = infimum_over_b(&pure2(1.0), &one_step(q1)).unwrap();
        let expected = std::f64::consts::SQRT_2 - 0.75 - 0.5 * std::f64::consts::SQRT_2.ln();
        assert!((eval.value - expected).abs() < 1e-12, "{}", eval.value);
        assert!((eval.b_star - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
        assert!(eval.derivative_at_b_star.abs() < 1e-8);
    }

    #[test]
    fn infimum_matches_dense_grid_scan() {
        let mix = Mixture::new([(2, 1.0), (3, 0.6)])
        .unwrap();
        let f = FunctionalOrderParameter::new(
            2,
            vec![0.0, 0.4, 1.0],
            vec![0.0, 0.2, 0.65, 1.0],
        )
        .unwrap();
        let eval = infimum_over_b(&mix, &f).unwrap();
        let d1 = eval.d[0];
        let mut best = f64::INFINITY;
        for i in 1..200_000 {
            let b = d1 + 1e-4 + i as f64 * 5e-5;
            best = best.min(objective_at_b(&mix, &f, b).unwrap());
        }
        assert!(eval.value <= best + 1e-9, "{} vs scan {}", eval.value, best);
        assert!((eval.value - best).abs() < 1e-6);
    }

    #[test]
    fn objective_blows_up_at_both_ends() {
        let mix = pure2(1.0);
        let f = one_step(0.3);
        let eval = infimum_over_b(&mix, &f).unwrap();
        let near = objective_at_b(&mix, &f, eval.d[0] + 1e-9).unwrap();
        assert!(near > eval.value + 10.0);
        let far = objective_at_b(&mix, &f, 1e6).unwrap();
        assert!(far > 1000.0);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mix = Mixture::new([(2, 0.8), (3, 0.5)])
        .unwrap();
        let f = FunctionalOrderParameter::new(
            2,
            vec![0.0, 0.35, 1.0],
            vec![0.0, 0.15, 0.55, 1.0],
        )
        .unwrap();
        let d1 = cascade_depths(&mix, &f)[0];
        let mut rng = rng::derive(0x9a5e_0002, &[2]);
        for _ in 0..50 {
            let b = d1 + rng.gen_range(0.1..20.0);
            let h = 1e-6 * b.max(1.0);
            let analytic = objective_derivative_at_b(&mix, &f, b).unwrap();
            let plus = objective_at_b(&mix, &f, b + h).unwrap();
            let minus = objective_at_b(&mix, &f, b - h).unwrap();
            let numeric = (plus - minus) / (2.0 * h);
            assert!(
                (analytic - numeric).abs() <= 1e-6 * (1.0 + analytic.abs()),
                "b={b}: {analytic} vs {numeric}"
            );
        }
    }

    #[test]
    fn degenerate_level_insertion_is_invisible() {
        let mix = Mixture::new([(2, 1.2), (3, 0.7)])
        .unwrap();
        let f = FunctionalOrderParameter::new(
            2,
            vec![0.0, 0.45, 1.0],
            vec![0.0, 0.3, 0.7, 1.0],
        )
        .unwrap();
        // Duplicate q (zero-width interval) and split m (repeated value).
        let dup_q = FunctionalOrderParameter::new(
            3,
            vec![0.0, 0.45, 0.45, 1.0],
            vec![0.0, 0.3, 0.3, 0.7, 1.0],
        )
        .unwrap();
        let split_m = FunctionalOrderParameter::new(
            3,
            vec![0.0, 0.45, 1.0, 1.0],
            vec![0.0, 0.3, 0.7, 0.7, 1.0],
        )
        .unwrap();
        let base = infimum_over_b(&mix, &f).unwrap();
        for g in [dup_q, split_m] {
            let other = infimum_over_b(&mix, &g).unwrap();
            assert!(
                (base.value - other.value).abs() < 1e-12,
                "{} vs {}",
                base.value,
                other.value
            );
            assert!((base.b_star - other.b_star).abs() < 1e-7);
        }
    }

    #[test]
    fn q1_zero_family_hits_closed_form() {
        let mixes = [
            Mixture::new([(2, 0.6)]).unwrap(),
            Mixture::new([(3, 1.1)]).unwrap(),
            Mixture::new([(2, 0.5), (4, 0.3)])
            .unwrap(),
        ];
        for mix in &mixes {
            let eval = infimum_over_b(mix, &one_step(0.0)).unwrap();
            let expect_value = mix.xi(1.0).unwrap() / 2.0;
            let expect_b = 1.0 + mix.xi_prime(1.0).unwrap();
            assert!((eval.value - expect_value).abs() < 1e-10);
            assert!((eval.b_star - expect_b).abs() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn minimizer_is_interior_local_minimum(
            b2 in 0.1f64..1.5,
            b3 in 0.0f64..1.2,
            q1 in 0.0f64..0.9,
            gap in 0.01f64..0.1,
            m1 in 0.05f64..0.95,
        ) {
            let mix = Mixture::new([(2, b2), (3, b3)]).unwrap();
            let q2 = (q1 + gap).min(1.0);
            let f = FunctionalOrderParameter::new(
                2,
                vec![0.0, m1, 1.0],
                vec![0.0, q1, q2, 1.0],
            ).unwrap();
            let eval = infimum_over_b(&mix, &f).unwrap();
            prop_assert!(eval.value.is_finite());
            prop_assert!(eval.b_star > eval.d[0]);
            let h = 1e-4 * (1.0 + eval.b_star);
            let up = objective_at_b(&mix, &f, eval.b_star + h).unwrap();
            let down_b = eval.b_star - h;
            prop_assert!(up >= eval.value - 1e-12);
            if down_b > eval.d[0] + 1e-12 {
                let down = objective_at_b(&mix, &f, down_b).unwrap();
                prop_assert!(down >= eval.value - 1e-12);
            }
        }
    }
}
