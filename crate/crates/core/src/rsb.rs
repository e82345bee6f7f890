//! Step order parameters (replica symmetry breaking structures).
//!
//! A triplet (k, m, q) with 0 = m_0 ≤ … ≤ m_k = 1 and
//! 0 = q_0 ≤ … ≤ q_k ≤ q_{k+1} = 1 encodes the right-continuous step
//! function x̄(t) = m_ℓ for t ∈ [q_ℓ, q_{ℓ+1}), x̄(1) = 1 — the distribution
//! function of a probability measure on [0, 1] carried by the q-levels.
//! Zero-width levels are representational slack: two triplets describing the
//! same function are interchangeable everywhere in this crate.
//!
//! The metric is the L¹ distance between step functions, computed exactly by
//! sweeping the merged breakpoint lists. `discretize_to_grid` pushes the
//! underlying measure forward through the staircase map
//! H_k(t) = j/k on [j/(k+1), (j+1)/(k+1)), H_k(1) = 1,
//! which moves every level onto the grid {0, 1/k, …, 1} and changes the
//! function by at most 1/k in L¹ (sup |H_k(t) − t| ≤ 1/k and the map is
//! monotone).

use crate::error::{Error, Result};

/// A validated (k, m, q) triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalOrderParameter {
    k: usize,
    m: Vec<f64>,
    q: Vec<f64>,
}

impl FunctionalOrderParameter {
    /// Validates and wraps a triplet: `m` has length k+1 with m_0 = 0 and
    /// m_k = 1, `q` has length k+2 with q_0 = 0 and q_{k+1} = 1, both
    /// nondecreasing within [0, 1].
    pub fn new(k: usize, m: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if k < 1 {
            return Err(Error::Validation("triplet needs k >= 1".into()));
        }
        if m.len() != k + 1 {
            return Err(Error::Validation(format!(
                "m must have length k+1 = {}, got {}",
                k + 1,
                m.len()
            )));
        }
        if q.len() != k + 2 {
            return Err(Error::Validation(format!(
                "q must have length k+2 = {}, got {}",
                k + 2,
                q.len()
            )));
        }
        for (name, v) in [("m", &m), ("q", &q)] {
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                    return Err(Error::Validation(format!(
                        "{name}[{i}] = {x} outside [0, 1]"
                    )));
                }
            }
            for i in 1..v.len() {
                if v[i] < v[i - 1] {
                    return Err(Error::Validation(format!(
                        "{name}[{i}] = {} decreases below {name}[{}] = {}",
                        v[i],
                        i - 1,
                        v[i - 1]
                    )));
                }
            }
        }
        if m[0] != 0.0 {
            return Err(Error::Validation(format!("m[0] must be 0, got {}", m[0])));
        }
        if m[k] != 1.0 {
            return Err(Error::Validation(format!("m[k] must be 1, got {}", m[k])));
        }
        if q[0] != 0.0 {
            return Err(Error::Validation(format!("q[0] must be 0, got {}", q[0])));
        }
        if q[k + 1] != 1.0 {
            return Err(Error::Validation(format!(
                "q[k+1] must be 1, got {}",
                q[k + 1]
            )));
        }
        Ok(Self { k, m, q })
    }

    /// The one-step structure jumping from 0 to 1 at `q1`.
    pub fn one_step(q1: f64) -> Result<Self> {
        Self::new(1, vec![0.0, 1.0], vec![0.0, q1, 1.0])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// x̄(t): the value m_ℓ of the unique nonempty level interval
    /// [q_ℓ, q_{ℓ+1}) containing t, and 1 at t = 1.
    pub fn evaluate_cdf(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("cdf argument {t} outside [0, 1]")));
        }
        Ok(self.cdf_unchecked(t))
    }

    fn cdf_unchecked(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        // Largest ℓ with q_ℓ <= t indexes the nonempty interval holding t.
        let mut level = 0usize;
        for l in (0..=self.k).rev() {
            if self.q[l] <= t {
                level = l;
                break;
            }
        }
        self.m[level]
    }
}

/// Exact L¹ distance between two step functions, by sweeping the union of
/// their breakpoints.
pub fn l1_distance(a: &FunctionalOrderParameter, b: &FunctionalOrderParameter) -> f64 {
    let mut pts: Vec<f64> = a.q.iter().chain(b.q.iter()).copied().collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let width = w[1] - w[0];
        if width > 0.0 {
            total += width * (a.cdf_unchecked(w[0]) - b.cdf_unchecked(w[0])).abs();
        }
    }
    total
}

/// The staircase value H_k(t) = j/k for t ∈ [j/(k+1), (j+1)/(k+1)), H_k(1)=1.
pub fn staircase_map(k_grid: usize, t: f64) -> f64 {
    debug_assert!(k_grid >= 1 && (0.0..=1.0).contains(&t));
    if t >= 1.0 {
        return 1.0;
    }
    let j = (t * (k_grid as f64 + 1.0)).floor().min(k_grid as f64);
    j / k_grid as f64
}

/// Pushes the measure underlying `f` forward through `staircase_map(k_grid, ·)`:
/// every q-level moves onto the grid {0, 1/k, …, 1}, and duplicate adjacent
/// levels merge keeping the largest m. The result differs from `f` by at most
/// 1/k_grid in L¹.
pub fn discretize_to_grid(
    f: &FunctionalOrderParameter,
    k_grid: usize,
) -> Result<FunctionalOrderParameter> {
    if k_grid < 1 {
        return Err(Error::Validation("grid size must be >= 1".into()));
    }
    // Interior levels (H(q_ℓ), m_ℓ), merged on equal q keeping the last
    // (largest) m; the step function is unchanged by dropping the zero-width
    // members of each merged group.
    let mut levels: Vec<(f64, f64)> = Vec::with_capacity(f.k);
    for l in 1..=f.k {
        let ql = staircase_map(k_grid, f.q[l]);
        let ml = f.m[l];
        match levels.last_mut() {
            Some(last) if last.0 == ql => last.1 = ml,
            _ => levels.push((ql, ml)),
        }
    }
    let k_new = levels.len();
    let mut m = Vec::with_capacity(k_new + 1);
    let mut q = Vec::with_capacity(k_new + 2);
    m.push(0.0);
    q.push(0.0);
    for (ql, ml) in levels {
        q.push(ql);
        m.push(ml);
    }
    q.push(1.0);
    FunctionalOrderParameter::new(k_new, m, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_step() -> FunctionalOrderParameter {
        FunctionalOrderParameter::new(2, vec![0.0, 0.4, 1.0], vec![0.0, 0.2, 0.7, 1.0]).unwrap()
    }

    #[test]
    fn validation_accepts_and_rejects() {
        assert!(FunctionalOrderParameter::one_step(0.3).is_ok());
        // q_k = 1 (touching the endpoint) is legal.
        assert!(FunctionalOrderParameter::new(1, vec![0.0, 1.0], vec![0.0, 1.0, 1.0]).is_ok());
        // Decreasing m.
        let e = FunctionalOrderParameter::new(2, vec![0.0, 0.6, 0.3], vec![0.0, 0.1, 0.2, 1.0]);
        assert!(matches!(e, Err(Error::Validation(_))));
        // m_k != 1.
        assert!(
            FunctionalOrderParameter::new(2, vec![0.0, 0.4, 0.9], vec![0.0, 0.1, 0.2, 1.0])
                .is_err()
        );
        // Decreasing q, wrong lengths, endpoint violations.
        assert!(FunctionalOrderParameter::new(1, vec![0.0, 1.0], vec![0.0, 1.1, 1.0]).is_err());
        assert!(FunctionalOrderParameter::new(1, vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(FunctionalOrderParameter::new(1, vec![0.1, 1.0], vec![0.0, 0.5, 1.0]).is_err());
        assert!(FunctionalOrderParameter::new(1, vec![0.0, 1.0], vec![0.1, 0.5, 1.0]).is_err());
    }

    #[test]
    fn cdf_steps_through_levels() {
        let f = two_step();
        assert_eq!(f.evaluate_cdf(0.0).unwrap(), 0.0);
        assert_eq!(f.evaluate_cdf(0.1).unwrap(), 0.0);
        assert_eq!(f.evaluate_cdf(0.2).unwrap(), 0.4);
        assert_eq!(f.evaluate_cdf(0.69).unwrap(), 0.4);
        assert_eq!(f.evaluate_cdf(0.7).unwrap(), 1.0);
        assert_eq!(f.evaluate_cdf(1.0).unwrap(), 1.0);
        assert!(f.evaluate_cdf(1.5).is_err());
        assert!(f.evaluate_cdf(-0.1).is_err());
    }

    #[test]
    fn zero_width_levels_do_not_change_the_function() {
        let f = two_step();
        // Insert a duplicate of level 1 (width-0 interval at q=0.2).
        let g = FunctionalOrderParameter::new(
            3,
            vec![0.0, 0.4, 0.4, 1.0],
            vec![0.0, 0.2, 0.2, 0.7, 1.0],
        )
        .unwrap();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            assert_eq!(f.evaluate_cdf(t).unwrap(), g.evaluate_cdf(t).unwrap());
        }
        assert_eq!(l1_distance(&f, &g), 0.0);
    }

    #[test]
    fn l1_distance_of_one_step_functions_is_gap_between_jumps() {
        let a = FunctionalOrderParameter::one_step(0.25).unwrap();
        let b = FunctionalOrderParameter::one_step(0.6).unwrap();
        assert!((l1_distance(&a, &b) - 0.35).abs() < 1e-15);
        assert_eq!(l1_distance(&a, &a), 0.0);
    }

    #[test]
    fn staircase_reference_values() {
        // k=2: thresholds at 1/3, 2/3.
        assert_eq!(staircase_map(2, 0.0), 0.0);
        assert_eq!(staircase_map(2, 0.32), 0.0);
        assert_eq!(staircase_map(2, 0.4), 0.5);
        assert_eq!(staircase_map(2, 0.67), 1.0);
        assert_eq!(staircase_map(2, 1.0), 1.0);
    }

    #[test]
    fn discretization_moves_levels_onto_grid() {
        let f = two_step();
        let g = discretize_to_grid(&f, 2).unwrap();
        // 0.2 -> 0, 0.7 -> 1; level at 0 keeps m=0.4 (degenerate at zero),
        // level at 1 keeps m=1.
        for &ql in g.q() {
            let nearest = (ql * 2.0).round() / 2.0;
            assert_eq!(ql, nearest);
        }
        assert!(l1_distance(&f, &g) <= 0.5 + 1e-15);

        let h = discretize_to_grid(&f, 50).unwrap();
        assert!(l1_distance(&f, &h) <= 0.02 + 1e-15);
    }

    #[test]
    fn staircase_sup_distance_bound() {
        for k in 1..=7usize {
            let mut sup: f64 = 0.0;
            for i in 0..=10_000 {
                let t = i as f64 / 10_000.0;
                sup = sup.max((staircase_map(k, t) - t).abs());
            }
            assert!(sup <= 1.0 / k as f64 + 1e-12, "k={k}, sup={sup}");
        }
    }

    fn riemann_l1(a: &FunctionalOrderParameter, b: &FunctionalOrderParameter, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (a.evaluate_cdf(t).unwrap() - b.evaluate_cdf(t).unwrap()).abs() * h
            })
            .sum()
    }

    #[test]
    fn sweep_matches_riemann_sum() {
        let a = two_step();
        let b = FunctionalOrderParameter::new(1, vec![0.0, 1.0], vec![0.0, 0.45, 1.0]).unwrap();
        let exact = l1_distance(&a, &b);
        let approx = riemann_l1(&a, &b, 200_000);
        assert!((exact - approx).abs() < 1e-4, "{exact} vs {approx}");
    }

    fn arb_param() -> impl Strategy<Value = FunctionalOrderParameter> {
        (proptest::collection::vec(0.0f64..1.0, 2), 0.0f64..1.0).prop_map(|(qs, m1)| {
            let (mut q1, mut q2) = (qs[0], qs[1]);
            if q1 > q2 {
                std::mem::swap(&mut q1, &mut q2);
            }
            FunctionalOrderParameter::new(2, vec![0.0, m1, 1.0], vec![0.0, q1, q2, 1.0]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn l1_is_a_pseudometric(a in arb_param(), b in arb_param(), c in arb_param()) {
            let dab = l1_distance(&a, &b);
            let dba = l1_distance(&b, &a);
            prop_assert!((dab - dba).abs() < 1e-15);
            prop_assert!(dab >= 0.0);
            prop_assert!(dab <= l1_distance(&a, &c) + l1_distance(&c, &b) + 1e-12);
            prop_assert_eq!(l1_distance(&a, &a), 0.0);
        }

        #[test]
        fn discretization_l1_bound_holds(f in arb_param(), k in 1usize..12) {
            let g = discretize_to_grid(&f, k).unwrap();
            prop_assert!(l1_distance(&f, &g) <= 1.0 / k as f64 + 1e-12);
            // All new levels sit on the grid.
            for &ql in g.q() {
                let nearest = (ql * k as f64).round() / k as f64;
                prop_assert!((ql - nearest).abs() < 1e-12);
            }
        }
    }
}
