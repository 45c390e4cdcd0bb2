//! Closed-form uniform argument stability bounds.
//!
//! All sums run over the step sizes `eta_1..eta_{T-1}`; every bound is capped
//! at the feasible set's diameter `2R`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub lipschitz: f64,
    pub radius: f64,
    pub n: usize,
    pub iterations: usize,
    pub schedule: StepSchedule,
}

impl BoundInputs {
    pub fn new(lipschitz: f64, radius: f64, n: usize, iterations: usize, schedule: StepSchedule) -> Result<Self> {
        let b = BoundInputs {
            lipschitz,
            radius,
            n,
            iterations,
            schedule,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lipschitz", self.lipschitz), ("radius", self.radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "T must be at least 1"));
        }
        self.schedule.validate(self.iterations - 1)
    }

    /// The same inputs at horizon `iterations`; bounds evaluated this way hold
    /// for every iterate `x^t` with `t <= iterations`.
    pub fn at_iterations(&self, iterations: usize) -> Self {
        BoundInputs {
            iterations,
            ..self.clone()
        }
    }

    fn step_sum(&self) -> f64 {
        self.schedule.sum(1, self.iterations - 1)
    }

    fn step_sq_sum(&self) -> f64 {
        self.schedule.sum_sq(1, self.iterations - 1)
    }

    fn cap(&self, value: f64) -> f64 {
        value.min(2.0 * self.radius)
    }

    fn constant_eta(&self, what: &'static str) -> Result<f64> {
        self.schedule
            .constant_value()
            .ok_or_else(|| Error::precondition(what, "requires a constant step size"))
    }

    fn require_non_increasing(&self) -> Result<()> {
        // only the steps entering the sums matter
        let len = self.iterations - 1;
        if self.schedule.is_non_increasing(len) {
            Ok(())
        } else {
            Err(Error::precondition(
                "fixed-permutation SGD stability requires non-increasing steps",
                "step sizes increase somewhere",
            ))
        }
    }

    fn require_small_horizon(&self) -> Result<()> {
        if self.iterations <= self.n {
            Ok(())
        } else {
            Err(Error::precondition(
                "short-horizon stability bound requires T <= n",
                format!("T = {} > n = {}", self.iterations, self.n),
            ))
        }
    }
}

/// Full-batch GD: `min{2R, 4L((1/n) sum eta + sqrt(sum eta^2))}`.
pub fn bound_gd(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let v = 4.0 * b.lipschitz * (b.step_sum() / b.n as f64 + b.step_sq_sum().sqrt());
    Ok(b.cap(v))
}

/// Sampling-with-replacement SGD, in expectation over the sampled indices.
pub fn bound_rsgd_expectation(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let v = 4.0 * b.lipschitz * (b.step_sq_sum().sqrt() + b.step_sum() / b.n as f64);
    Ok(b.cap(v))
}

/// Sampling-with-replacement SGD with constant step size: returns the bound
/// and the probability `exp(-n/2)` with which it may fail.
pub fn bound_rsgd_highprob(b: &BoundInputs) -> Result<(f64, f64)> {
    b.validate()?;
    let eta = b.constant_eta("high-probability stability bound")?;
    let steps = (b.iterations - 1) as f64;
    let v = 4.0 * b.lipschitz * (eta * steps.sqrt() + eta * steps / b.n as f64);
    Ok((b.cap(v), (-(b.n as f64) / 2.0).exp()))
}

/// Fixed-permutation SGD with non-increasing steps, for any permutation.
pub fn bound_persgd(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    b.require_non_increasing()?;
    let v = 2.0 * b.lipschitz * (b.step_sq_sum().sqrt() + 2.0 * b.step_sum() / b.n as f64);
    Ok(b.cap(v))
}

/// Sampling-with-replacement SGD in expectation when `T <= n`.
pub fn bound_rsgd_small_t(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    b.require_small_horizon()?;
    let frac = (b.iterations - 1) as f64 / b.n as f64;
    let v = 3.0 * b.lipschitz * frac * (b.step_sq_sum().sqrt() + b.step_sum() / b.n as f64);
    Ok(b.cap(v))
}

/// Fixed-permutation SGD with a uniformly random permutation, in expectation,
/// when `T <= n`.
pub fn bound_persgd_small_t(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    b.require_small_horizon()?;
    b.require_non_increasing()?;
    let frac = (b.iterations - 1) as f64 / b.n as f64;
    let v = std::f64::consts::SQRT_2 * b.lipschitz * frac * b.step_sq_sum().sqrt();
    Ok(b.cap(v))
}

/// `L T eta / n`, the shape of the floor any first-order method with rates of
/// gradient descent must pay (unit constant; a reference, not a certificate).
pub fn generic_lower_floor(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let eta = b.constant_eta("generic stability floor")?;
    Ok(lower_floor(b.lipschitz, b.iterations, eta, b.n))
}

pub fn lower_floor(lipschitz: f64, iterations: usize, eta: f64, n: usize) -> f64 {
    lipschitz * iterations as f64 * eta / n as f64
}

/// `min{1, T/n} eta sqrt(T) + eta T / n`, the order of the lower bounds for
/// the stochastic variants.
pub fn lower_bound_reference(eta: f64, iterations: usize, n: usize) -> f64 {
    let t = iterations as f64;
    let ratio = t / n as f64;
    ratio.min(1.0) * eta * t.sqrt() + eta * ratio
}

/// The four upper bounds evaluated at every iterate `t = 1..=upto`, each
/// `None` where its hypotheses fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnytimeBounds {
    pub gd: f64,
    pub rsgd_expectation: f64,
    pub rsgd_highprob: Option<f64>,
    pub persgd: Option<f64>,
}

/// Prefix-sum evaluation of the bounds for every horizon up to `upto`; agrees
/// with calling each bound on `b.at_iterations(t)`.
pub fn anytime_bounds(b: &BoundInputs, upto: usize) -> Result<Vec<AnytimeBounds>> {
    b.at_iterations(upto.max(1)).validate()?;
    let (l, n) = (b.lipschitz, b.n as f64);
    let eta_const = b.schedule.constant_value();
    let mut out = Vec::with_capacity(upto);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut monotone = true;
    for t in 1..=upto {
        if t >= 2 {
            let eta = b.schedule.eta(t - 1);
            sum += eta;
            sum_sq += eta * eta;
            if t >= 3 && eta > b.schedule.eta(t - 2) {
                monotone = false;
            }
        }
        let gd = b.cap(4.0 * l * (sum / n + sum_sq.sqrt()));
        let rsgd_highprob = eta_const.map(|eta| {
            let steps = (t - 1) as f64;
            b.cap(4.0 * l * (eta * steps.sqrt() + eta * steps / n))
        });
        let persgd = monotone.then(|| b.cap(2.0 * l * (sum_sq.sqrt() + 2.0 * sum / n)));
        out.push(AnytimeBounds {
            gd,
            rsgd_expectation: gd,
            rsgd_highprob,
            persgd,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inputs(l: f64, r: f64, n: usize, t: usize, eta: f64) -> BoundInputs {
        BoundInputs::new(l, r, n, t, StepSchedule::Constant(eta)).unwrap()
    }

    #[test]
    fn reference_values() {
        let b = inputs(1.0, 10.0, 10, 101, 0.1);
        // sum eta = 10, sum eta^2 = 1
        assert!((bound_gd(&b).unwrap() - 8.0).abs() < 1e-12);
        assert!((bound_rsgd_expectation(&b).unwrap() - 8.0).abs() < 1e-12);
        let (hp, fail) = bound_rsgd_highprob(&b).unwrap();
        assert!((hp - 8.0).abs() < 1e-12);
        assert!((fail - (-5.0f64).exp()).abs() < 1e-18);
        assert!((fail - 0.006_737_947).abs() < 1e-9);
        assert!((bound_persgd(&b).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn single_iterate_is_zero() {
        let b = inputs(1.0, 10.0, 10, 1, 0.1);
        assert_eq!(bound_gd(&b).unwrap(), 0.0);
        assert_eq!(bound_rsgd_expectation(&b).unwrap(), 0.0);
        assert_eq!(bound_persgd(&b).unwrap(), 0.0);
        assert_eq!(bound_rsgd_small_t(&b).unwrap(), 0.0);
        assert_eq!(bound_persgd_small_t(&b).unwrap(), 0.0);
    }

    #[test]
    fn diameter_cap() {
        let b = inputs(1.0, 0.5, 10, 101, 0.1);
        assert_eq!(bound_gd(&b).unwrap(), 1.0);
        assert_eq!(bound_persgd(&b).unwrap(), 1.0);
    }

    #[test]
    fn large_n_limit() {
        let b = inputs(1.0, 10.0, 1_000_000_000, 101, 0.1);
        assert!((bound_rsgd_expectation(&b).unwrap() - 4.0).abs() < 1e-7);
    }

    #[test]
    fn highprob_failure_probability() {
        let b = inputs(1.0, 10.0, 2, 5, 0.1);
        assert!((bound_rsgd_highprob(&b).unwrap().1 - (-1.0f64).exp()).abs() < 1e-16);
        let explicit = BoundInputs::new(1.0, 10.0, 2, 3, StepSchedule::Explicit(vec![0.1, 0.1])).unwrap();
        assert!(bound_rsgd_highprob(&explicit).is_err());
    }

    #[test]
    fn persgd_requires_non_increasing() {
        let b = BoundInputs::new(1.0, 10.0, 2, 4, StepSchedule::Explicit(vec![0.1, 0.2, 0.3, 0.3])).unwrap();
        assert!(matches!(bound_persgd(&b), Err(Error::Precondition { .. })));
        let ok = BoundInputs::new(1.0, 10.0, 2, 4, StepSchedule::Explicit(vec![0.3, 0.2, 0.1, 0.1])).unwrap();
        assert!(bound_persgd(&ok).is_ok());
    }

    #[test]
    fn small_horizon_values() {
        let b = inputs(1.0, 10.0, 100, 11, 0.1);
        let want = 3.0 * 0.1 * (0.1f64.sqrt() + 0.01);
        assert!((bound_rsgd_small_t(&b).unwrap() - want).abs() < 1e-12);
        assert!((bound_rsgd_small_t(&b).unwrap() - 0.0979).abs() < 1e-4);
        let want = 2f64.sqrt() * 0.1 * 0.1f64.sqrt();
        assert!((bound_persgd_small_t(&b).unwrap() - want).abs() < 1e-12);
        assert!((bound_persgd_small_t(&b).unwrap() - 0.04472).abs() < 1e-5);
        let long = inputs(1.0, 10.0, 10, 11, 0.1);
        assert!(bound_rsgd_small_t(&long).is_err());
        assert!(bound_persgd_small_t(&long).is_err());
    }

    #[test]
    fn floor_values() {
        assert!((generic_lower_floor(&inputs(1.0, 1.0, 10, 100, 0.1)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(lower_floor(1.0, 0, 0.1, 10), 0.0);
        assert!(lower_floor(1.0, 100, 0.1, usize::MAX) < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(BoundInputs::new(0.0, 1.0, 1, 1, StepSchedule::Constant(0.1)).is_err());
        assert!(BoundInputs::new(1.0, -1.0, 1, 1, StepSchedule::Constant(0.1)).is_err());
        assert!(BoundInputs::new(1.0, 1.0, 0, 1, StepSchedule::Constant(0.1)).is_err());
        assert!(BoundInputs::new(1.0, 1.0, 1, 0, StepSchedule::Constant(0.1)).is_err());
        assert!(BoundInputs::new(1.0, 1.0, 1, 5, StepSchedule::Explicit(vec![0.1])).is_err());
    }

    #[test]
    fn anytime_matches_direct_evaluation() {
        let schedule = StepSchedule::Explicit(vec![0.3, 0.2, 0.2, 0.25, 0.1, 0.05, 0.05]);
        let b = BoundInputs::new(1.5, 2.0, 4, 8, schedule).unwrap();
        let rows = anytime_bounds(&b, 8).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let bt = b.at_iterations(i + 1);
            assert!((row.gd - bound_gd(&bt).unwrap()).abs() < 1e-12);
            assert!((row.rsgd_expectation - bound_rsgd_expectation(&bt).unwrap()).abs() < 1e-12);
            assert!(row.rsgd_highprob.is_none());
            assert_eq!(row.persgd.is_some(), bound_persgd(&bt).is_ok(), "t = {}", i + 1);
            if let Some(v) = row.persgd {
                assert!((v - bound_persgd(&bt).unwrap()).abs() < 1e-12);
            }
        }
        let c = inputs(1.0, 10.0, 10, 101, 0.1);
        let rows = anytime_bounds(&c, 101).unwrap();
        assert!((rows[100].rsgd_highprob.unwrap() - bound_rsgd_highprob(&c).unwrap().0).abs() < 1e-12);
        assert_eq!(rows[0].gd, 0.0);
    }

    proptest! {
        #[test]
        fn monotone_in_horizon_and_step(
            n in 1usize..50, t in 1usize..200, eta in 0.001f64..1.0, r in 0.1f64..10.0, dt in 0usize..50, scale in 1.0f64..3.0,
        ) {
            let b = inputs(1.0, r, n, t, eta);
            let longer = inputs(1.0, r, n, t + dt, eta);
            let bigger = inputs(1.0, r, n, t, eta * scale);
            let fns: [fn(&BoundInputs) -> Result<f64>; 3] = [bound_gd, bound_rsgd_expectation, bound_persgd];
            for f in fns {
                let v = f(&b).unwrap();
                prop_assert!(v <= 2.0 * r);
                prop_assert!(f(&longer).unwrap() >= v);
                prop_assert!(f(&bigger).unwrap() >= v);
            }
            let hp = bound_rsgd_highprob(&b).unwrap().0;
            prop_assert!(hp <= 2.0 * r);
            prop_assert!(bound_rsgd_highprob(&longer).unwrap().0 >= hp);
            prop_assert!(bound_rsgd_highprob(&bigger).unwrap().0 >= hp);
            if t + dt <= n {
                prop_assert!(bound_rsgd_small_t(&longer).unwrap() >= bound_rsgd_small_t(&b).unwrap());
                prop_assert!(bound_persgd_small_t(&bigger).unwrap() >= bound_persgd_small_t(&b).unwrap());
            }
        }
    }
}
