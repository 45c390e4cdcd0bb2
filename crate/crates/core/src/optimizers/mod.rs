//! Projected subgradient methods: full-batch GD, sampling-with-replacement
//! SGD, fixed-permutation SGD and noisy SGD, plus a coupled runner that drives
//! two trajectories on neighboring datasets with shared randomness.
//!
//! Iterate indexing is 1-based in the documentation and 0-based in storage:
//! `iterates[0]` is `x^1`.

mod coupled;
mod engine;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{Dataset, LossOracle};
use crate::rng::RngStream;
use crate::space::{Ball, Vector};

pub use coupled::{run_coupled, TrajectoryPair};

/// Default cap on the number of stored iterate vectors.
pub const DEFAULT_STORAGE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Full-batch gradient descent.
    Gd,
    /// Sampling-with-replacement SGD.
    Rsgd,
    /// Fixed-permutation SGD (epochs over a fixed order).
    Persgd,
    /// Noisy SGD with Gaussian gradient perturbation.
    Nsgd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Rsgd => "rsgd",
            Algorithm::Persgd => "persgd",
            Algorithm::Nsgd => "nsgd",
        }
    }

    pub fn is_stochastic(self) -> bool {
        !matches!(self, Algorithm::Gd)
    }

    /// Number of gradient steps for `iterations` = T. Fixed-permutation SGD
    /// performs all `T = nK` steps; the others stop at `x^T`.
    pub fn steps(self, iterations: usize) -> usize {
        match self {
            Algorithm::Persgd => iterations,
            _ => iterations.saturating_sub(1),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Algorithm::Gd),
            "rsgd" => Ok(Algorithm::Rsgd),
            "persgd" => Ok(Algorithm::Persgd),
            "nsgd" => Ok(Algorithm::Nsgd),
            other => Err(Error::invalid("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Step sizes `(eta_t)`, indexed from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant(f64),
    Explicit(Vec<f64>),
}

impl StepSchedule {
    /// `eta_t` for 1-based `t`.
    pub fn eta(&self, t: usize) -> f64 {
        match self {
            StepSchedule::Constant(eta) => *eta,
            StepSchedule::Explicit(list) => list[t - 1],
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            StepSchedule::Constant(eta) => Some(*eta),
            StepSchedule::Explicit(_) => None,
        }
    }

    /// Validates that `eta_1..eta_len` exist and are finite and non-negative.
    pub fn validate(&self, len: usize) -> Result<()> {
        let bad = |v: f64| !(v.is_finite() && v >= 0.0);
        match self {
            StepSchedule::Constant(eta) if bad(*eta) => {
                Err(Error::invalid("eta", format!("must be finite and >= 0, got {eta}")))
            }
            StepSchedule::Constant(_) => Ok(()),
            StepSchedule::Explicit(list) => {
                if list.len() < len {
                    return Err(Error::invalid(
                        "schedule",
                        format!("needs {len} step sizes, got {}", list.len()),
                    ));
                }
                match list.iter().position(|&v| bad(v)) {
                    Some(i) => Err(Error::invalid(
                        "schedule",
                        format!("eta_{} = {} is invalid", i + 1, list[i]),
                    )),
                    None => Ok(()),
                }
            }
        }
    }

    pub fn is_non_increasing(&self, len: usize) -> bool {
        match self {
            StepSchedule::Constant(_) => true,
            StepSchedule::Explicit(list) => list[..len.min(list.len())].windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// `sum_{t=from}^{to} eta_t` (inclusive, 1-based; empty when `to < from`).
    pub fn sum(&self, from: usize, to: usize) -> f64 {
        (from..=to).map(|t| self.eta(t)).sum()
    }

    pub fn sum_sq(&self, from: usize, to: usize) -> f64 {
        (from..=to).map(|t| self.eta(t).powi(2)).sum()
    }
}

/// Data order used by fixed-permutation SGD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Permutation {
    Identity,
    /// `order[p]` is the 0-based data index visited at position `p` of an epoch.
    Explicit(Vec<usize>),
    /// Drawn uniformly from the run's randomness stream before the first step.
    Random,
}

impl Permutation {
    pub(crate) fn resolve(&self, n: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
        match self {
            Permutation::Identity => Ok((0..n).collect()),
            Permutation::Random => Ok(rng.permutation(n)),
            Permutation::Explicit(order) => {
                let mut seen = vec![false; n];
                if order.len() != n {
                    return Err(Error::invalid(
                        "permutation",
                        format!("length {} != n = {n}", order.len()),
                    ));
                }
                for &i in order {
                    if i >= n || seen[i] {
                        return Err(Error::invalid("permutation", "not a permutation of 0..n"));
                    }
                    seen[i] = true;
                }
                Ok(order.clone())
            }
        }
    }
}

/// Everything needed to execute one run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    /// T. For fixed-permutation SGD this is `nK`.
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub ball: Ball,
    pub start: Vector,
    pub permutation: Permutation,
    /// Noise standard deviation; required for noisy SGD only.
    pub sigma: Option<f64>,
    pub rng: RngStream,
    pub storage_cap: usize,
}

impl RunSpec {
    /// A spec starting at the origin with identity permutation and no noise.
    pub fn new(algorithm: Algorithm, iterations: usize, schedule: StepSchedule, ball: Ball, seed: u64) -> Self {
        let start = Vector::zeros(ball.dim());
        RunSpec {
            algorithm,
            iterations,
            schedule,
            ball,
            start,
            permutation: Permutation::Identity,
            sigma: None,
            rng: RngStream::new(seed, 0),
            storage_cap: DEFAULT_STORAGE_CAP,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_permutation(mut self, permutation: Permutation) -> Self {
        self.permutation = permutation;
        self
    }

    pub fn with_start(mut self, start: Vector) -> Self {
        self.start = start;
        self
    }

    pub fn with_rng(mut self, rng: RngStream) -> Self {
        self.rng = rng;
        self
    }

    pub fn with_storage_cap(mut self, cap: usize) -> Self {
        self.storage_cap = cap;
        self
    }

    pub fn dim(&self) -> usize {
        self.ball.dim()
    }

    pub fn steps(&self) -> usize {
        self.algorithm.steps(self.iterations)
    }

    /// Number of stored iterates `x^1..`: T, or T + 1 for fixed-permutation SGD.
    pub fn num_iterates(&self) -> usize {
        self.steps() + 1
    }

    /// Checks every structural precondition of the algorithm against a
    /// dataset of size `n`.
    pub fn validate(&self, oracle: &LossOracle, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "T must be at least 1"));
        }
        if oracle.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: oracle.dim(),
            });
        }
        self.start.check_dim(self.dim())?;
        self.start.check_finite("start point")?;
        if !self.ball.contains(&self.start, 1e-12) {
            return Err(Error::invalid("start", "x^1 must lie in the feasible ball"));
        }
        self.schedule.validate(self.iterations)?;
        match self.algorithm {
            Algorithm::Persgd => {
                if !self.iterations.is_multiple_of(n) {
                    return Err(Error::precondition(
                        "fixed-permutation SGD epoch structure (T = nK)",
                        format!("T = {} is not a multiple of n = {n}", self.iterations),
                    ));
                }
                if !self.schedule.is_non_increasing(self.iterations) {
                    return Err(Error::precondition(
                        "fixed-permutation SGD stability requires non-increasing steps",
                        "step sizes increase somewhere",
                    ));
                }
                if let Permutation::Explicit(order) = &self.permutation {
                    Permutation::Explicit(order.clone()).resolve(n, &mut RngStream::new(0, 0))?;
                }
            }
            Algorithm::Nsgd => {
                let sigma = self
                    .sigma
                    .ok_or_else(|| Error::invalid("sigma", "noisy SGD requires a noise level"))?;
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
                }
                if self.schedule.constant_value().is_none() {
                    return Err(Error::precondition(
                        "noisy SGD uses a constant step size",
                        "explicit schedule given",
                    ));
                }
                if self.iterations != n * n {
                    return Err(Error::precondition(
                        "noisy SGD runs T = n^2 iterations",
                        format!("T = {} but n^2 = {}", self.iterations, n * n),
                    ));
                }
            }
            Algorithm::Gd | Algorithm::Rsgd => {}
        }
        Ok(())
    }

    fn expect(&self, algorithm: Algorithm) -> Result<()> {
        if self.algorithm == algorithm {
            Ok(())
        } else {
            Err(Error::invalid(
                "algorithm",
                format!(
                    "spec is for {} but {} was requested",
                    self.algorithm.name(),
                    algorithm.name()
                ),
            ))
        }
    }
}

/// Summary of the Gaussian perturbations consumed by a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub draws: usize,
    pub sum_sq: f64,
    /// Sum of all drawn coordinates; a cheap fingerprint of the sequence.
    pub checksum: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub algorithm: Algorithm,
    /// Stored iterates `x^1, x^2, ...`, truncated at the storage cap.
    pub iterates: Vec<Vector>,
    pub truncated: bool,
    /// Total number of iterates produced, stored or not.
    pub num_iterates: usize,
    pub final_iterate: Vector,
    pub averaged_output: Vector,
    /// Data index used at each step (stochastic variants only).
    pub sampled_indices: Vec<usize>,
    /// Resolved data order (fixed-permutation SGD only).
    pub permutation: Vec<usize>,
    pub noise: NoiseSummary,
    /// Every iterate stayed inside the ball.
    pub feasible: bool,
}

/// Runs whichever algorithm `spec` names.
pub fn run(spec: &RunSpec, oracle: &LossOracle, s: &Dataset) -> Result<Trajectory> {
    spec.validate(oracle, s.len())?;
    oracle.validate_dataset(s)?;
    engine::run_single(spec, oracle, s)
}

pub fn run_gd(spec: &RunSpec, oracle: &LossOracle, s: &Dataset) -> Result<Trajectory> {
    spec.expect(Algorithm::Gd)?;
    run(spec, oracle, s)
}

pub fn run_rsgd(spec: &RunSpec, oracle: &LossOracle, s: &Dataset) -> Result<Trajectory> {
    spec.expect(Algorithm::Rsgd)?;
    run(spec, oracle, s)
}

pub fn run_persgd(spec: &RunSpec, oracle: &LossOracle, s: &Dataset) -> Result<Trajectory> {
    spec.expect(Algorithm::Persgd)?;
    run(spec, oracle, s)
}

pub fn run_nsgd(spec: &RunSpec, oracle: &LossOracle, s: &Dataset) -> Result<Trajectory> {
    spec.expect(Algorithm::Nsgd)?;
    run(spec, oracle, s)
}
