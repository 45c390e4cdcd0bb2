use serde::Serialize;

use crate::error::Result;
use crate::losses::{LossOracle, NeighborPair};
use crate::optimizers::{run_coupled, Algorithm, RunSpec, StepSchedule, TrajectoryPair};
use crate::trials::map_trials;

use super::bounds::{bound_gd, bound_persgd, bound_rsgd_expectation, bound_rsgd_highprob, BoundInputs};

/// Relative slack when comparing a measured distance with a closed-form bound.
pub const BOUND_REL_TOL: f64 = 1e-9;
/// Absolute slack in the per-step recurrence check.
pub const RECURRENCE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundKind {
    /// Holds for every realization.
    Deterministic,
    /// Holds except with the given probability.
    HighProbability { failure: f64 },
    /// Holds for the mean over the algorithm's randomness.
    Expectation,
}

/// The upper bound an algorithm's stability should respect, evaluated at the
/// horizon covering every iterate the run produces.
pub fn matching_bound(spec: &RunSpec, lipschitz: f64, n: usize) -> Result<(f64, BoundKind)> {
    let b = BoundInputs::new(
        lipschitz,
        spec.ball.radius(),
        n,
        spec.num_iterates(),
        spec.schedule.clone(),
    )?;
    match spec.algorithm {
        Algorithm::Gd => Ok((bound_gd(&b)?, BoundKind::Deterministic)),
        Algorithm::Persgd => Ok((bound_persgd(&b)?, BoundKind::Deterministic)),
        Algorithm::Rsgd | Algorithm::Nsgd => match spec.schedule {
            StepSchedule::Constant(_) => {
                let (v, failure) = bound_rsgd_highprob(&b)?;
                Ok((v, BoundKind::HighProbability { failure }))
            }
            StepSchedule::Explicit(_) => Ok((bound_rsgd_expectation(&b)?, BoundKind::Expectation)),
        },
    }
}

pub fn exceeds(value: f64, bound: f64) -> bool {
    value > bound * (1.0 + BOUND_REL_TOL) + 1e-12
}

/// Per-trial stability measurements.
#[derive(Debug, Clone, Serialize)]
pub struct TrialStability {
    pub trial: usize,
    pub final_delta: f64,
    pub output_delta: f64,
    pub t0: Option<usize>,
    pub lemma_bound: f64,
    pub recurrence_violations: usize,
    pub coupling_sound: bool,
    pub feasible: bool,
    /// `(delta_t, a_t)` per iterate when traced; `a_t` is 0 for the final iterate.
    #[serde(skip)]
    pub trace: Option<Vec<(f64, f64)>>,
}

impl TrialStability {
    pub fn from_pair(trial: usize, pair: &TrajectoryPair, keep_trace: bool) -> Self {
        let trace = keep_trace.then(|| {
            pair.deltas
                .iter()
                .enumerate()
                .map(|(i, &d)| (d, pair.a_ts.get(i).copied().unwrap_or(0.0)))
                .collect()
        });
        TrialStability {
            trial,
            final_delta: pair.final_delta(),
            output_delta: pair.output_distance(),
            t0: pair.t0,
            lemma_bound: pair.lemma_bound(),
            recurrence_violations: pair.recurrence_violations(RECURRENCE_SLACK).len(),
            coupling_sound: pair.coupling_sound(),
            feasible: pair.on_s.feasible && pair.on_sprime.feasible,
            trace,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UasEstimate {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub mean_final_delta: f64,
    pub mean_output_delta: f64,
    pub max_final_delta: f64,
    /// `(q, value)` empirical quantiles of the final distance.
    pub quantiles: Vec<(f64, f64)>,
    pub bound: f64,
    pub bound_kind: BoundKind,
    /// Expectation bound for the stochastic variants.
    pub expectation_bound: Option<f64>,
    /// Trials whose final or output distance exceeded `bound`.
    pub bound_exceedances: usize,
    pub lemma_exceedances: usize,
    pub recurrence_violations: usize,
    pub coupling_failures: usize,
    pub infeasible_trials: usize,
    pub per_trial: Vec<TrialStability>,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Nearest-rank quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Runs `trials` coupled pairs on `pair`, each with randomness from
/// `spec.rng.substream(trial)`, and aggregates the distances. Traces are kept
/// for the first `trace_trials` trials.
pub fn estimate_uas(
    spec: &RunSpec,
    oracle: &LossOracle,
    pair: &NeighborPair,
    trials: usize,
    jobs: usize,
    trace_trials: usize,
) -> Result<UasEstimate> {
    let n = pair.n();
    spec.validate(oracle, n)?;
    let (bound, bound_kind) = matching_bound(spec, oracle.lipschitz(), n)?;
    let expectation_bound = match spec.algorithm {
        Algorithm::Rsgd | Algorithm::Nsgd => {
            let b = BoundInputs::new(
                oracle.lipschitz(),
                spec.ball.radius(),
                n,
                spec.num_iterates(),
                spec.schedule.clone(),
            )?;
            Some(bound_rsgd_expectation(&b)?)
        }
        _ => None,
    };
    let per_trial = map_trials(trials, jobs, |trial| {
        let trial_spec = spec.clone().with_rng(spec.rng.substream(trial as u64));
        let pair = run_coupled(&trial_spec, oracle, pair)?;
        Ok(TrialStability::from_pair(trial, &pair, trial < trace_trials))
    })?;
    let finals: Vec<f64> = per_trial.iter().map(|t| t.final_delta).collect();
    let outputs: Vec<f64> = per_trial.iter().map(|t| t.output_delta).collect();
    Ok(UasEstimate {
        algorithm: spec.algorithm,
        trials,
        mean_final_delta: mean(&finals),
        mean_output_delta: mean(&outputs),
        max_final_delta: finals.iter().copied().fold(0.0, f64::max),
        quantiles: [0.5, 0.9, 0.99].iter().map(|&q| (q, quantile(&finals, q))).collect(),
        bound,
        bound_kind,
        expectation_bound,
        bound_exceedances: per_trial
            .iter()
            .filter(|t| exceeds(t.final_delta, bound) || exceeds(t.output_delta, bound))
            .count(),
        lemma_exceedances: per_trial
            .iter()
            .filter(|t| exceeds(t.final_delta, t.lemma_bound))
            .count(),
        recurrence_violations: per_trial.iter().map(|t| t.recurrence_violations).sum(),
        coupling_failures: per_trial.iter().filter(|t| !t.coupling_sound).count(),
        infeasible_trials: per_trial.iter().filter(|t| !t.feasible).count(),
        per_trial,
    })
}
