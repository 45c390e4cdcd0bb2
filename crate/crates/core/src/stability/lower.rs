use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::{lower_bound_dimension, lower_bound_pair, AdversarialMaxLoss, LossOracle};
use crate::optimizers::{run_coupled, Algorithm, Permutation, RunSpec, StepSchedule};
use crate::rng::RngStream;
use crate::space::Ball;
use crate::trials::map_trials;

use super::bounds::lower_bound_reference;
use super::estimate::{mean, TrialStability};

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    /// T; for fixed-permutation SGD a multiple of `n`.
    pub iterations: usize,
    pub n: usize,
    pub dim: usize,
    pub radius: f64,
    pub trials: usize,
    pub seed: u64,
    /// Order for fixed-permutation SGD. `Random` draws a fresh order per trial;
    /// `Identity` visits the replaced point first.
    pub permutation: Permutation,
    pub trace_trials: usize,
}

impl LowerBoundConfig {
    pub fn new(algorithm: Algorithm, eta: f64, iterations: usize, n: usize, dim: usize) -> Self {
        LowerBoundConfig {
            algorithm,
            eta,
            iterations,
            n,
            dim,
            radius: 1.0,
            trials: 1,
            seed: 0,
            permutation: Permutation::Random,
            trace_trials: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub iterations: usize,
    pub n: usize,
    pub dim: usize,
    pub active_dim: usize,
    pub nu: f64,
    pub kappa: f64,
    pub trials: usize,
    pub mean_final_delta: f64,
    pub mean_output_delta: f64,
    /// The level the measured distance must reach.
    pub threshold: f64,
    /// `min{1, T/n} eta sqrt(T) + eta T / n`.
    pub reference: f64,
    pub passed: bool,
    pub per_trial: Vec<TrialStability>,
}

/// Level the measured final distance must reach: `0.4 eta sqrt(D)` for full
/// batch GD, `min{1, T/n} eta sqrt(T) / 8` in mean for the stochastic variants.
pub fn lower_bound_threshold(algorithm: Algorithm, eta: f64, iterations: usize, n: usize) -> Result<f64> {
    let big_d = lower_bound_dimension(eta, iterations)?;
    Ok(match algorithm {
        Algorithm::Gd => 0.4 * eta * (big_d as f64).sqrt(),
        _ => {
            let t = iterations as f64;
            (t / n as f64).min(1.0) * eta * t.sqrt() / 8.0
        }
    })
}

/// Runs the adversarial max-loss construction on `S = (1, 0, ..., 0)` and
/// `S' = (0, ..., 0)` and compares the measured distance with the threshold.
pub fn lower_bound_experiment(cfg: &LowerBoundConfig) -> Result<LowerBoundReport> {
    lower_bound_experiment_jobs(cfg, 1)
}

pub fn lower_bound_experiment_jobs(cfg: &LowerBoundConfig, jobs: usize) -> Result<LowerBoundReport> {
    if cfg.algorithm == Algorithm::Nsgd {
        return Err(Error::invalid(
            "algorithm",
            "the lower-bound construction covers gd, rsgd and persgd",
        ));
    }
    if cfg.n == 0 {
        return Err(Error::EmptyDataset);
    }
    if cfg.trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let big_d = lower_bound_dimension(cfg.eta, cfg.iterations)?;
    if cfg.dim < big_d {
        return Err(Error::precondition(
            "lower-bound construction requires d >= min{T, 1/eta^2}",
            format!("d = {} < {big_d}", cfg.dim),
        ));
    }
    let loss = AdversarialMaxLoss::for_instance(cfg.eta, cfg.n, cfg.iterations)?;
    let oracle = LossOracle::adversarial(loss, cfg.dim)?;
    let pair = lower_bound_pair(cfg.n)?;
    let ball = Ball::centered(cfg.dim, cfg.radius)?;
    let base = RunSpec::new(
        cfg.algorithm,
        cfg.iterations,
        StepSchedule::Constant(cfg.eta),
        ball,
        cfg.seed,
    )
    .with_permutation(cfg.permutation.clone());
    base.validate(&oracle, cfg.n)?;
    let root = RngStream::new(cfg.seed, 0);

    let per_trial = map_trials(cfg.trials, jobs, |trial| {
        let spec = base.clone().with_rng(root.substream(trial as u64));
        let pair = run_coupled(&spec, &oracle, &pair)?;
        Ok(TrialStability::from_pair(trial, &pair, trial < cfg.trace_trials))
    })?;
    let finals: Vec<f64> = per_trial.iter().map(|t| t.final_delta).collect();
    let outputs: Vec<f64> = per_trial.iter().map(|t| t.output_delta).collect();
    let mean_final_delta = mean(&finals);
    let threshold = lower_bound_threshold(cfg.algorithm, cfg.eta, cfg.iterations, cfg.n)?;
    Ok(LowerBoundReport {
        algorithm: cfg.algorithm,
        eta: cfg.eta,
        iterations: cfg.iterations,
        n: cfg.n,
        dim: cfg.dim,
        active_dim: loss.active_dim(),
        nu: loss.nu(),
        kappa: loss.kappa(),
        trials: cfg.trials,
        mean_final_delta,
        mean_output_delta: mean(&outputs),
        threshold,
        reference: lower_bound_reference(cfg.eta, cfg.iterations, cfg.n),
        passed: mean_final_delta >= threshold,
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gd_canonical_instance() {
        let mut cfg = LowerBoundConfig::new(Algorithm::Gd, 0.1, 101, 10, 100);
        cfg.trace_trials = 1;
        let r = lower_bound_experiment(&cfg).unwrap();
        assert_eq!(r.active_dim, 100);
        assert!(r.mean_final_delta >= 0.45, "{}", r.mean_final_delta);
        assert!(r.passed);
        assert!((r.threshold - 0.4).abs() < 1e-12);
        assert_eq!(r.per_trial[0].t0, Some(1));
        assert_eq!(r.per_trial[0].trace.as_ref().unwrap().len(), 101);
    }

    #[test]
    fn dimension_hypothesis_is_checked() {
        let cfg = LowerBoundConfig::new(Algorithm::Gd, 0.1, 101, 10, 50);
        let err = lower_bound_experiment(&cfg).unwrap_err();
        match err {
            Error::Precondition { hypothesis, .. } => assert!(hypothesis.contains("d >= min{T, 1/eta^2}")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn persgd_worst_position() {
        // replaced point visited first: after D steps the distance is about eta sqrt(D) / 2 or more
        let (eta, n) = (0.1, 100);
        let mut cfg = LowerBoundConfig::new(Algorithm::Persgd, eta, n, n, 100);
        cfg.permutation = Permutation::Identity;
        cfg.trace_trials = 1;
        let r = lower_bound_experiment(&cfg).unwrap();
        let trace = r.per_trial[0].trace.as_ref().unwrap();
        let big_d = r.active_dim;
        let delta_after_d = trace[big_d].0;
        assert!(
            delta_after_d >= eta * (big_d as f64).sqrt() / 2.0 - 0.01,
            "{delta_after_d}"
        );
    }

    #[test]
    fn stochastic_variants_clear_threshold() {
        for alg in [Algorithm::Rsgd, Algorithm::Persgd] {
            let mut cfg = LowerBoundConfig::new(alg, 0.05, 200, 50, 200);
            cfg.trials = 40;
            cfg.seed = 3;
            let r = lower_bound_experiment_jobs(&cfg, 2).unwrap();
            assert!(r.passed, "{alg:?}: {} < {}", r.mean_final_delta, r.threshold);
        }
    }

    #[test]
    fn rejects_noisy_sgd() {
        let cfg = LowerBoundConfig::new(Algorithm::Nsgd, 0.1, 100, 10, 100);
        assert!(lower_bound_experiment(&cfg).is_err());
    }
}
