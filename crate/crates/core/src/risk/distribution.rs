use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{DataPoint, Dataset, LossOracle};
use crate::rng::RngStream;
use crate::space::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionFamily {
    /// `f(x, z) = |x_1 - z|`.
    AbsoluteDeviation,
    /// `f(x, z) = max(0, 1 - z x_1)`.
    HingeMixture,
}

/// Labels `z = +1` with probability `p_positive` and `z = -1` otherwise, fed to
/// a loss of the given family on the centered ball of radius `radius`.
/// `p_positive = 1` is a point mass at `+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDistribution {
    pub family: DistributionFamily,
    pub p_positive: f64,
    pub dim: usize,
    pub radius: f64,
}

impl SyntheticDistribution {
    pub fn new(family: DistributionFamily, p_positive: f64, dim: usize, radius: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_positive) {
            return Err(Error::invalid(
                "p_positive",
                format!("must lie in [0, 1], got {p_positive}"),
            ));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(SyntheticDistribution {
            family,
            p_positive,
            dim,
            radius,
        })
    }

    pub fn oracle(&self) -> LossOracle {
        match self.family {
            DistributionFamily::AbsoluteDeviation => LossOracle::absolute_deviation(self.dim),
            DistributionFamily::HingeMixture => LossOracle::hinge(self.dim),
        }
        .expect("validated dimension")
    }

    pub fn draw(&self, rng: &mut RngStream) -> DataPoint {
        DataPoint(if rng.bernoulli(self.p_positive) { 1.0 } else { -1.0 })
    }

    /// `m` i.i.d. draws.
    pub fn sample(&self, m: usize, rng: &mut RngStream) -> Result<Dataset> {
        if m == 0 {
            return Err(Error::invalid("m", "sample size must be at least 1"));
        }
        Dataset::new((0..m).map(|_| self.draw(rng)).collect())
    }

    /// Exact `F_D(x)`. Both families depend on `x_1` only.
    pub fn population_risk(&self, x: &[f64]) -> f64 {
        let (p, x1) = (self.p_positive, x[0]);
        match self.family {
            DistributionFamily::AbsoluteDeviation => p * (x1 - 1.0).abs() + (1.0 - p) * (x1 + 1.0).abs(),
            DistributionFamily::HingeMixture => p * (1.0 - x1).max(0.0) + (1.0 - p) * (1.0 + x1).max(0.0),
        }
    }

    /// A minimizer of `F_D` over the ball: `x_1 = min(R, 1) sign(2p - 1)`.
    ///
    /// Both risks are `1 + (1 - 2p) x_1` on `|x_1| <= 1` and grow outside it.
    pub fn known_minimizer(&self) -> Option<Vector> {
        let mut x = Vector::zeros(self.dim);
        let s = 2.0 * self.p_positive - 1.0;
        if s != 0.0 {
            x[0] = self.radius.min(1.0) * s.signum();
        }
        Some(x)
    }

    pub fn known_optimum(&self) -> Option<f64> {
        self.known_minimizer().map(|x| self.population_risk(&x))
    }
}
