//! Mixed p-spin coupling coefficients and the covariance function ξ.
//!
//! A mixture is a finite list of terms (p, β_p) with p ≥ 1 and β_p ≥ 0. The
//! induced covariance of the energy process on the sphere is N·ξ(R) in the
//! overlap R, with
//!
//!   ξ(x)  = Σ β_p² x^p,
//!   ξ′(x) = Σ β_p² p x^{p-1},
//!   ξ″(x) = Σ β_p² p (p-1) x^{p-2},
//!   θ(x)  = x ξ′(x) − ξ(x) = Σ β_p² (p−1) x^p.
//!
//! Sums are compensated and powers are built by repeated multiplication so
//! the series identities hold to machine precision; θ is evaluated from its
//! own series rather than as a difference. Overlaps are accepted on [-1, 1]
//! with a 1e-12 tolerance for accumulated roundoff and clamped.

use crate::error::{Error, Result};
use crate::numeric::Kahan;

/// One coupling term: interaction order `p` and coefficient `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTerm {
    pub p: u32,
    pub beta: f64,
}

/// A finite mixed p-spin coupling list, sorted by p with distinct orders.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    terms: Vec<MixtureTerm>,
}

const OVERLAP_SLACK: f64 = 1e-12;

impl Mixture {
    /// Builds a mixture from (p, β_p) pairs. Orders must be ≥ 1 and distinct;
    /// coefficients must be finite and ≥ 0. An empty list is the zero mixture.
    pub fn new(terms: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut terms: Vec<MixtureTerm> = terms
            .into_iter()
            .map(|(p, beta)| MixtureTerm { p, beta })
            .collect();
        terms.sort_by_key(|t| t.p);
        for pair in terms.windows(2) {
            if pair[0].p == pair[1].p {
                return Err(Error::Validation(format!(
                    "duplicate interaction order p={}",
                    pair[0].p
                )));
            }
        }
        for t in &terms {
            if t.p < 1 {
                return Err(Error::Validation("interaction order p must be >= 1".into()));
            }
            if !t.beta.is_finite() || t.beta < 0.0 {
                return Err(Error::Validation(format!(
                    "coefficient beta_{} must be finite and >= 0, got {}",
                    t.p, t.beta
                )));
            }
        }
        Ok(Self { terms })
    }

    /// Convenience: a single pure p-spin coupling.
    pub fn pure(p: u32, beta: f64) -> Result<Self> {
        Self::new([(p, beta)])
    }

    /// The empty (zero) mixture.
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[MixtureTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.beta == 0.0)
    }

    /// Largest interaction order present (0 for the zero mixture).
    pub fn max_p(&self) -> u32 {
        self.terms.iter().map(|t| t.p).max().unwrap_or(0)
    }

    fn checked_overlap(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x.abs() > 1.0 + OVERLAP_SLACK {
            return Err(Error::Domain(format!(
                "overlap {x} outside [-1, 1] (tolerance {OVERLAP_SLACK})"
            )));
        }
        Ok(x.clamp(-1.0, 1.0))
    }

    /// Σ β_p² x^p with weights w(p); shared accumulation for the family.
    fn weighted_power_sum(&self, x: f64, weight: impl Fn(f64) -> f64, shift: u32) -> f64 {
        let mut acc = Kahan::new();
        for t in &self.terms {
            if t.p < shift {
                continue;
            }
            let b2 = t.beta * t.beta;
            let mut pow = 1.0;
            for _ in 0..(t.p - shift) {
                pow *= x;
            }
            acc.add(b2 * weight(t.p as f64) * pow);
        }
        acc.total()
    }

    /// ξ(x) = Σ β_p² x^p.
    pub fn xi(&self, x: f64) -> Result<f64> {
        let x = self.checked_overlap(x)?;
        Ok(self.weighted_power_sum(x, |_| 1.0, 0))
    }

    /// ξ′(x) = Σ β_p² p x^{p-1}.
    pub fn xi_prime(&self, x: f64) -> Result<f64> {
        let x = self.checked_overlap(x)?;
        Ok(self.weighted_power_sum(x, |p| p, 1))
    }

    /// ξ″(x) = Σ β_p² p(p-1) x^{p-2}.
    pub fn xi_second(&self, x: f64) -> Result<f64> {
        let x = self.checked_overlap(x)?;
        Ok(self.weighted_power_sum(x, |p| p * (p - 1.0), 2))
    }

    /// θ(x) = x ξ′(x) − ξ(x), evaluated from its own series Σ β_p²(p−1)x^p.
    pub fn theta(&self, x: f64) -> Result<f64> {
        let x = self.checked_overlap(x)?;
        Ok(self.weighted_power_sum(x, |p| p - 1.0, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mix_23() -> Mixture {
        Mixture::new([(2, 1.0), (3, 0.5)]).unwrap()
    }

    #[test]
    fn xi_at_reference_points() {
        let m = mix_23();
        // ξ(x) = x² + 0.25 x³.
        assert_eq!(m.xi(0.0).unwrap(), 0.0);
        assert!((m.xi(1.0).unwrap() - 1.25).abs() < 1e-15);
        assert!((m.xi(0.5).unwrap() - (0.25 + 0.25 * 0.125)).abs() < 1e-15);
        assert!((m.xi(-1.0).unwrap() - (1.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_at_reference_points() {
        let m = mix_23();
        // ξ′(x) = 2x + 0.75x², ξ″(x) = 2 + 1.5x.
        assert!((m.xi_prime(1.0).unwrap() - 2.75).abs() < 1e-15);
        assert!((m.xi_second(1.0).unwrap() - 3.5).abs() < 1e-15);
        assert!((m.xi_prime(0.0).unwrap()).abs() < 1e-15);
        // Pure 1-spin has constant ξ′ and zero ξ″.
        let lin = Mixture::pure(1, 0.7).unwrap();
        assert!((lin.xi_prime(0.3).unwrap() - 0.49).abs() < 1e-15);
        assert_eq!(lin.xi_second(0.9).unwrap(), 0.0);
    }

    #[test]
    fn theta_identity_and_value() {
        let m = mix_23();
        // θ(1) = ξ′(1) − ξ(1) = 2.75 − 1.25.
        assert!((m.theta(1.0).unwrap() - 1.5).abs() < 1e-15);
        for &x in &[-1.0, -0.3, 0.0, 0.2, 0.77, 1.0] {
            let direct = m.theta(x).unwrap();
            let composed = x * m.xi_prime(x).unwrap() - m.xi(x).unwrap();
            assert!((direct - composed).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn zero_mixture_vanishes_identically() {
        let z = Mixture::zero();
        assert!(z.is_zero());
        for &x in &[-1.0, 0.0, 1.0] {
            assert_eq!(z.xi(x).unwrap(), 0.0);
            assert_eq!(z.xi_prime(x).unwrap(), 0.0);
            assert_eq!(z.theta(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn overlap_domain_is_enforced_with_slack() {
        let m = mix_23();
        assert!(m.xi(1.0 + 5e-13).is_ok());
        assert!(m.xi(1.1).is_err());
        assert!(m.xi(-1.1).is_err());
        assert!(m.xi(f64::NAN).is_err());
        // Clamped value equals the endpoint value.
        assert_eq!(m.xi(1.0 + 5e-13).unwrap(), m.xi(1.0).unwrap());
    }

    #[test]
    fn invalid_terms_are_rejected() {
        assert!(Mixture::new([(0, 1.0)]).is_err());
        assert!(Mixture::new([(2, -0.1)]).is_err());
        assert!(Mixture::new([(2, 1.0), (2, 0.5)]).is_err());
        assert!(Mixture::new([(2, f64::INFINITY)]).is_err());
    }

    proptest! {
        #[test]
        fn theta_matches_composition(x in -1.0f64..1.0, b2 in 0.0f64..2.0, b3 in 0.0f64..2.0, b4 in 0.0f64..1.0) {
            let m = Mixture::new([(2, b2), (3, b3), (4, b4)]).unwrap();
            let direct = m.theta(x).unwrap();
            let composed = x * m.xi_prime(x).unwrap() - m.xi(x).unwrap();
            prop_assert!((direct - composed).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn xi_prime_is_monotone_on_unit_interval(x in 0.0f64..1.0, y in 0.0f64..1.0, b2 in 0.0f64..2.0, b3 in 0.0f64..2.0) {
            let m = Mixture::new([(2, b2), (3, b3)]).unwrap();
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(m.xi_prime(lo).unwrap() <= m.xi_prime(hi).unwrap() + 1e-12);
        }
    }
}
