//! Numeric evaluation of the variance-schedule factor
//! `(1/r) Σ_{m<r} Σ_{ℓ≤m} Π_{j=ℓ}^m (1+ε_j)⁻¹` over a backward-sampling
//! schedule indexed by selection count, and its limit for periodic
//! schedules.
//!
//! The factor measures how fast estimator variance accumulates per selection
//! operation: with backward sampling at every selection it tends to 1, with
//! backward sampling every Δ-th selection it tends to `(3Δ−1)/2`, and
//! without backward sampling it diverges as `(r+1)/2`.

use crate::error::{Error, Result};

/// Backward-sampling indicators `ε_{n_j}` indexed by selection count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionSchedule {
    pub epsilon: Vec<bool>,
}

impl SelectionSchedule {
    pub fn new(epsilon: Vec<bool>) -> Self {
        Self { epsilon }
    }

    /// Periodic schedule triggering at every Δ-th selection:
    /// `ε_j = 1` iff `j ≡ Δ−1 (mod Δ)`.
    pub fn periodic(delta: usize, len: usize) -> Self {
        assert!(delta >= 1, "period must be at least 1");
        Self {
            epsilon: (0..len).map(|j| j % delta == delta - 1).collect(),
        }
    }
}

/// Evaluate the schedule factor with the O(r) running-product recursion
/// `S_m = (1 + S_{m−1}) / (1 + ε_m)`, factor `= (Σ_m S_m) / r`.
pub fn schedule_factor(schedule: &SelectionSchedule) -> Result<f64> {
    if schedule.epsilon.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut inner = 0.0f64; // S_{m-1}
    let mut total = 0.0f64;
    for &eps in &schedule.epsilon {
        inner = (1.0 + inner) / if eps { 2.0 } else { 1.0 };
        total += inner;
    }
    Ok(total / schedule.epsilon.len() as f64)
}

/// Schedule factor of the periodic schedule with period `delta`, evaluated
/// over `r` selection operations. Converges to `(3Δ−1)/2` as `r → ∞`.
pub fn periodic_limit(delta: usize, r: usize) -> Result<f64> {
    if delta == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    schedule_factor(&SelectionSchedule::periodic(delta, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Literal triple-loop evaluation, kept deliberately naive as the oracle
    // for the running-product recursion.
    fn schedule_factor_literal(schedule: &SelectionSchedule) -> f64 {
        let r = schedule.epsilon.len();
        let mut total = 0.0;
        for m in 0..r {
            for l in 0..=m {
                let mut prod = 1.0;
                for j in l..=m {
                    prod *= 1.0 / (1.0 + schedule.epsilon[j] as u8 as f64);
                }
                total += prod;
            }
        }
        total / r as f64
    }

    #[test]
    fn all_triggered_tends_to_one() {
        let f = schedule_factor(&SelectionSchedule::new(vec![true; 100_000])).unwrap();
        assert!((f - 1.0).abs() < 1e-3, "factor = {f}");
    }

    #[test]
    fn never_triggered_is_arithmetic_mean() {
        for r in [1usize, 2, 5, 40] {
            let f = schedule_factor(&SelectionSchedule::new(vec![false; r])).unwrap();
            assert_eq!(f, (r as f64 + 1.0) / 2.0);
        }
    }

    #[test]
    fn single_triggered_entry() {
        assert_eq!(schedule_factor(&SelectionSchedule::new(vec![true])).unwrap(), 0.5);
    }

    #[test]
    fn empty_schedule_is_an_error() {
        assert!(matches!(
            schedule_factor(&SelectionSchedule::new(vec![])),
            Err(Error::EmptySchedule)
        ));
    }

    #[test]
    fn periodic_limits_match_closed_form() {
        for delta in [1usize, 2, 3, 5] {
            let expected = (3.0 * delta as f64 - 1.0) / 2.0;
            let got = periodic_limit(delta, 100_000).unwrap();
            assert!((got - expected).abs() < 1e-3, "delta {delta}: {got} vs {expected}");
        }
    }

    #[test]
    fn recursion_matches_literal_exactly_small() {
        // All intermediate values are dyadic rationals, so both evaluation
        // orders are exact in f64 and must agree bit for bit.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 63 == 1
        };
        for len in 1..=50 {
            let schedule = SelectionSchedule::new((0..len).map(|_| next()).collect());
            assert_eq!(
                schedule_factor(&schedule).unwrap(),
                schedule_factor_literal(&schedule),
                "mismatch at len {len}"
            );
        }
    }

    proptest! {
        // Turning on any extra backward-sampling step never increases the factor.
        #[test]
        fn monotone_in_triggers(
            eps in prop::collection::vec(prop::bool::ANY, 1..60),
            flip in 0usize..60,
        ) {
            let flip = flip % eps.len();
            prop_assume!(!eps[flip]);
            let base = schedule_factor(&SelectionSchedule::new(eps.clone())).unwrap();
            let mut more = eps;
            more[flip] = true;
            let improved = schedule_factor(&SelectionSchedule::new(more)).unwrap();
            prop_assert!(improved <= base + 1e-12);
        }
    }
}
