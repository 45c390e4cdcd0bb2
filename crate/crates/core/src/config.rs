//! Experiment configuration: a TOML document with one section per concern.
//!
//! ```toml
//! experiment = "stability"
//! trials = 20
//!
//! [problem]
//! n = 10
//! iterations = 101
//! dim = 3
//! radius = 1.0
//!
//! [algorithm]
//! name = "gd"
//! eta = 0.1
//!
//! [loss]
//! family = "hinge"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::PrivateSco;
use crate::error::Error;
use crate::losses::{
    lower_bound_pair, make_neighbor_pair, AdversarialMaxLoss, LossFamily, LossOracle, NeighborPair, PairKind,
};
use crate::optimizers::{Algorithm, Permutation, RunSpec, StepSchedule};
use crate::risk::{tuned_gd_eta, DistributionFamily, RiskExperiment, SyntheticDistribution};
use crate::space::{Ball, Vector};
use crate::stability::{matching_bound, LowerBoundConfig};

pub const SEED_ENV: &str = "UASLAB_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Precondition(#[from] Error),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stability,
    LowerBound,
    Risk,
    Multipass,
    Dp,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Stability => "stability",
            ExperimentKind::LowerBound => "lower-bound",
            ExperimentKind::Risk => "risk",
            ExperimentKind::Multipass => "multipass",
            ExperimentKind::Dp => "dp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// `T` as a number, or the rule `"n^2"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Fixed(usize),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PermutationSpec {
    Named(String),
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n: Option<OneOrMany>,
    pub iterations: Option<Horizon>,
    /// Number of passes K; sets `T = K n`.
    pub passes: Option<usize>,
    pub dim: Option<usize>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: Option<String>,
    pub eta: Option<f64>,
    /// Explicit step sizes `eta_1, eta_2, ...`.
    pub schedule: Option<Vec<f64>>,
    /// `"tuned"` selects `R / (4 L sqrt(T n))`.
    pub eta_rule: Option<String>,
    pub permutation: Option<PermutationSpec>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub family: Option<String>,
    /// Scale of the loss, which is its Lipschitz constant (times `||w||` for linear).
    pub lipschitz: Option<f64>,
    pub direction: Option<Vec<f64>>,
    pub active_dim: Option<usize>,
    pub nu: Option<f64>,
    pub kappa: Option<f64>,
    /// `"random"`, `"identical"` or `"lower-bound"`.
    pub pair: Option<String>,
    pub pair_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    pub family: Option<DistributionFamily>,
    pub p_positive: Option<f64>,
    pub fresh_sample: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Replaces the calibrated noise level.
    pub sigma: Option<f64>,
}

/// The config document as written, echoed into the summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output: Option<PathBuf>,
    /// Emit closed-form bound overlay columns.
    pub bounds: Option<bool>,
    /// Trials whose per-step trace is written to the table.
    pub trace_trials: Option<usize>,
    /// Failure probability for the high-probability bounds in `eval-bounds`.
    pub theta: Option<f64>,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub distribution: DistributionSection,
    #[serde(default)]
    pub privacy: PrivacySection,
}

#[derive(Debug, Clone)]
pub struct StabilityJob {
    pub spec: RunSpec,
    pub oracle: LossOracle,
    pub pair: NeighborPair,
    pub trials: usize,
    pub trace_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipassJob {
    pub dist: SyntheticDistribution,
    pub n: usize,
    pub passes: usize,
    pub eta: f64,
    pub trials: usize,
    pub fresh_sample: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum Job {
    Stability(Box<StabilityJob>),
    LowerBound(LowerBoundConfig),
    /// One experiment per sample size.
    Risk(Vec<RiskExperiment>),
    Multipass(Vec<MultipassJob>),
    Dp(Vec<PrivateSco>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub bounds: bool,
    pub job: Job,
}

/// Seed priority: command line, then config, then `UASLAB_SEED`, then 0.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
    if let Some(s) = cli.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        None => Ok(0),
    }
}

pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

/// Parses and validates a config. `seed` overrides the config's seed.
pub fn parse_config(text: &str, seed: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    load_config(text, None, seed, None)
}

/// Parses a config for the subcommand running `expected`, filling in the
/// experiment kind when the config omits it, and resolves the seed.
pub fn load_config(
    text: &str,
    expected: Option<ExperimentKind>,
    cli_seed: Option<u64>,
    env_seed: Option<&str>,
) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = parse_raw(text)?;
    match (raw.experiment, expected) {
        (Some(found), Some(want)) if found != want => {
            return Err(invalid(format!(
                "config describes a {} experiment but the subcommand runs {}",
                found.name(),
                want.name()
            )))
        }
        (None, Some(want)) => raw.experiment = Some(want),
        _ => {}
    }
    let seed = resolve_seed(cli_seed, raw.seed, env_seed)?;
    raw.seed = Some(seed);
    build(raw, seed)
}

fn parse_algorithm(name: &str) -> Result<Algorithm, ConfigError> {
    name.parse()
        .map_err(|_| invalid(format!("unknown algorithm {name:?}; expected gd, rsgd, persgd or nsgd")))
}

fn single_n(p: &ProblemSection) -> Result<usize, ConfigError> {
    match p.n.as_ref().ok_or(ConfigError::Missing("problem.n"))? {
        OneOrMany::One(n) => Ok(*n),
        OneOrMany::Many(_) => Err(invalid("problem.n must be a single value for this experiment")),
    }
}

fn horizon(p: &ProblemSection, n: usize) -> Result<usize, ConfigError> {
    match (&p.iterations, p.passes) {
        (Some(_), Some(_)) => Err(invalid("give either problem.iterations or problem.passes, not both")),
        (Some(Horizon::Fixed(t)), None) => Ok(*t),
        (Some(Horizon::Rule(r)), None) if r == "n^2" => Ok(n * n),
        (Some(Horizon::Rule(r)), None) => Err(invalid(format!("unknown horizon rule {r:?}; expected \"n^2\""))),
        (None, Some(k)) => Ok(k * n),
        (None, None) => Err(ConfigError::Missing("problem.iterations")),
    }
}

fn schedule(a: &AlgorithmSection) -> Result<StepSchedule, ConfigError> {
    match (a.eta, &a.schedule) {
        (Some(_), Some(_)) => Err(invalid("give either algorithm.eta or algorithm.schedule, not both")),
        (Some(eta), None) => Ok(StepSchedule::Constant(eta)),
        (None, Some(list)) => Ok(StepSchedule::Explicit(list.clone())),
        (None, None) => Err(ConfigError::Missing("algorithm.eta")),
    }
}

fn permutation(a: &AlgorithmSection) -> Result<Permutation, ConfigError> {
    match &a.permutation {
        None => Ok(Permutation::Random),
        Some(PermutationSpec::Named(s)) if s == "random" => Ok(Permutation::Random),
        Some(PermutationSpec::Named(s)) if s == "identity" => Ok(Permutation::Identity),
        Some(PermutationSpec::Named(s)) => Err(invalid(format!("unknown permutation {s:?}"))),
        Some(PermutationSpec::Explicit(v)) => Ok(Permutation::Explicit(v.clone())),
    }
}

fn radius(p: &ProblemSection) -> f64 {
    p.radius.unwrap_or(1.0)
}

fn dim(p: &ProblemSection) -> Result<usize, ConfigError> {
    p.dim.ok_or(ConfigError::Missing("problem.dim"))
}

fn distribution(raw: &RawConfig) -> Result<SyntheticDistribution, ConfigError> {
    let d = &raw.distribution;
    Ok(SyntheticDistribution::new(
        d.family.unwrap_or(DistributionFamily::AbsoluteDeviation),
        d.p_positive.unwrap_or(0.9),
        dim(&raw.problem)?,
        radius(&raw.problem),
    )?)
}

fn reject(present: bool, key: &str, kind: ExperimentKind) -> Result<(), ConfigError> {
    if present {
        Err(invalid(format!(
            "`{key}` does not apply to {} experiments",
            kind.name()
        )))
    } else {
        Ok(())
    }
}

fn build(raw: RawConfig, seed: u64) -> Result<ExperimentConfig, ConfigError> {
    let kind = raw.experiment.ok_or(ConfigError::Missing("experiment"))?;
    let trials = raw.trials.unwrap_or(1);
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let trace_trials = raw.trace_trials.unwrap_or(1);
    let job = match kind {
        ExperimentKind::Stability => Job::Stability(Box::new(stability_job(&raw, seed, trials, trace_trials)?)),
        ExperimentKind::LowerBound => Job::LowerBound(lower_bound_job(&raw, seed, trials, trace_trials)?),
        ExperimentKind::Risk => Job::Risk(risk_jobs(&raw, seed, trials)?),
        ExperimentKind::Multipass => Job::Multipass(multipass_jobs(&raw, seed, trials)?),
        ExperimentKind::Dp => Job::Dp(dp_jobs(&raw, seed, trials)?),
    };
    Ok(ExperimentConfig {
        kind,
        seed,
        output: raw.output.clone(),
        bounds: raw.bounds.unwrap_or(true),
        job,
        raw,
    })
}

fn loss_oracle(
    raw: &RawConfig,
    d: usize,
    n: usize,
    iterations: usize,
    eta: Option<f64>,
) -> Result<LossOracle, ConfigError> {
    let l = &raw.loss;
    let scale = l.lipschitz.unwrap_or(1.0);
    let family = match l.family.as_deref().ok_or(ConfigError::Missing("loss.family"))? {
        "hinge" => LossFamily::Hinge,
        "absolute-deviation" => LossFamily::AbsoluteDeviation,
        "linear" => {
            let w = l.direction.clone().ok_or(ConfigError::Missing("loss.direction"))?;
            LossFamily::Linear {
                direction: Vector::from_vec(w)?,
            }
        }
        "adversarial-max" => {
            let loss = match (l.active_dim, l.nu, l.kappa) {
                (None, None, None) => {
                    let eta = eta.ok_or_else(|| invalid("adversarial-max defaults need a constant algorithm.eta"))?;
                    AdversarialMaxLoss::for_instance(eta, n, iterations)?
                }
                (Some(a), Some(nu), Some(kappa)) => AdversarialMaxLoss::new(a, nu, kappa)?,
                _ => return Err(invalid("give all of loss.active_dim, loss.nu and loss.kappa, or none")),
            };
            LossFamily::AdversarialMax(loss)
        }
        other => return Err(invalid(format!("unknown loss family {other:?}"))),
    };
    Ok(LossOracle::new(family, d, scale)?)
}

fn stability_job(raw: &RawConfig, seed: u64, trials: usize, trace_trials: usize) -> Result<StabilityJob, ConfigError> {
    let kind = ExperimentKind::Stability;
    reject(raw.distribution != DistributionSection::default(), "distribution", kind)?;
    reject(raw.privacy != PrivacySection::default(), "privacy", kind)?;
    let p = &raw.problem;
    let a = &raw.algorithm;
    let n = single_n(p)?;
    let t = horizon(p, n)?;
    let d = dim(p)?;
    let algorithm = parse_algorithm(a.name.as_deref().ok_or(ConfigError::Missing("algorithm.name"))?)?;
    let schedule = schedule(a)?;
    let oracle = loss_oracle(raw, d, n, t, schedule.constant_value())?;
    let mut spec =
        RunSpec::new(algorithm, t, schedule, Ball::centered(d, radius(p))?, seed).with_permutation(permutation(a)?);
    spec.sigma = a.sigma;
    reject(a.eta_rule.is_some(), "algorithm.eta_rule", kind)?;
    spec.validate(&oracle, n)?;
    let pair = match raw.loss.pair.as_deref().unwrap_or("random") {
        "random" => make_neighbor_pair(
            PairKind::Random {
                seed: raw.loss.pair_seed.unwrap_or(seed),
            },
            &oracle,
            n,
        )?,
        "identical" => {
            let p = make_neighbor_pair(
                PairKind::Random {
                    seed: raw.loss.pair_seed.unwrap_or(seed),
                },
                &oracle,
                n,
            )?;
            NeighborPair::new(p.base().clone(), 0, p.base().get(0))?
        }
        "lower-bound" => lower_bound_pair(n)?,
        other => return Err(invalid(format!("unknown loss.pair {other:?}"))),
    };
    oracle.validate_dataset(pair.base())?;
    oracle.validate_point(pair.replacement())?;
    matching_bound(&spec, oracle.lipschitz(), n)?;
    Ok(StabilityJob {
        spec,
        oracle,
        pair,
        trials,
        trace_trials,
    })
}

fn lower_bound_job(
    raw: &RawConfig,
    seed: u64,
    trials: usize,
    trace_trials: usize,
) -> Result<LowerBoundConfig, ConfigError> {
    let kind = ExperimentKind::LowerBound;
    reject(raw.loss != LossSection::default(), "loss", kind)?;
    reject(raw.distribution != DistributionSection::default(), "distribution", kind)?;
    reject(raw.privacy != PrivacySection::default(), "privacy", kind)?;
    let p = &raw.problem;
    let a = &raw.algorithm;
    reject(a.schedule.is_some(), "algorithm.schedule", kind)?;
    reject(a.sigma.is_some(), "algorithm.sigma", kind)?;
    reject(a.eta_rule.is_some(), "algorithm.eta_rule", kind)?;
    let n = single_n(p)?;
    let algorithm = parse_algorithm(a.name.as_deref().ok_or(ConfigError::Missing("algorithm.name"))?)?;
    let eta = a.eta.ok_or(ConfigError::Missing("algorithm.eta"))?;
    let mut cfg = LowerBoundConfig::new(algorithm, eta, horizon(p, n)?, n, dim(p)?);
    cfg.radius = radius(p);
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.permutation = permutation(a)?;
    cfg.trace_trials = trace_trials;
    validate_lower_bound(&cfg)?;
    Ok(cfg)
}

/// Every hypothesis the lower-bound driver checks, without running it.
fn validate_lower_bound(cfg: &LowerBoundConfig) -> Result<(), Error> {
    if cfg.algorithm == Algorithm::Nsgd {
        return Err(Error::InvalidParameter {
            name: "algorithm",
            reason: "the lower-bound construction covers gd, rsgd and persgd".into(),
        });
    }
    let big_d = crate::losses::lower_bound_dimension(cfg.eta, cfg.iterations)?;
    if cfg.dim < big_d {
        return Err(Error::Precondition {
            hypothesis: "lower-bound construction requires d >= min{T, 1/eta^2}",
            detail: format!("d = {} < {big_d}", cfg.dim),
        });
    }
    let loss = AdversarialMaxLoss::for_instance(cfg.eta, cfg.n, cfg.iterations)?;
    let oracle = LossOracle::adversarial(loss, cfg.dim)?;
    let spec = RunSpec::new(
        cfg.algorithm,
        cfg.iterations,
        StepSchedule::Constant(cfg.eta),
        Ball::centered(cfg.dim, cfg.radius)?,
        0,
    )
    .with_permutation(cfg.permutation.clone());
    spec.validate(&oracle, cfg.n)
}

fn sample_sizes(p: &ProblemSection) -> Result<Vec<usize>, ConfigError> {
    let ns = p.n.as_ref().ok_or(ConfigError::Missing("problem.n"))?.values();
    if ns.is_empty() {
        return Err(invalid("problem.n must not be empty"));
    }
    Ok(ns)
}

fn risk_jobs(raw: &RawConfig, seed: u64, trials: usize) -> Result<Vec<RiskExperiment>, ConfigError> {
    let kind = ExperimentKind::Risk;
    reject(raw.loss != LossSection::default(), "loss", kind)?;
    reject(raw.privacy != PrivacySection::default(), "privacy", kind)?;
    let a = &raw.algorithm;
    let algorithm = parse_algorithm(a.name.as_deref().ok_or(ConfigError::Missing("algorithm.name"))?)?;
    let dist = distribution(raw)?;
    let mut out = Vec::new();
    for n in sample_sizes(&raw.problem)? {
        let t = horizon(&raw.problem, n)?;
        let schedule = match a.eta_rule.as_deref() {
            Some("tuned") => {
                reject(
                    a.eta.is_some() || a.schedule.is_some(),
                    "algorithm.eta with eta_rule",
                    kind,
                )?;
                StepSchedule::Constant(tuned_gd_eta(dist.radius, dist.oracle().lipschitz(), t, n))
            }
            Some(other) => return Err(invalid(format!("unknown eta_rule {other:?}; expected \"tuned\""))),
            None => schedule(a)?,
        };
        let mut exp = RiskExperiment::new(dist.clone(), algorithm, n, t, schedule);
        exp.sigma = a.sigma;
        exp.permutation = permutation(a)?;
        exp.trials = trials;
        exp.fresh_sample = raw.distribution.fresh_sample;
        exp.seed = seed;
        exp.validate()?;
        out.push(exp);
    }
    Ok(out)
}

fn multipass_jobs(raw: &RawConfig, seed: u64, trials: usize) -> Result<Vec<MultipassJob>, ConfigError> {
    let kind = ExperimentKind::Multipass;
    reject(raw.loss != LossSection::default(), "loss", kind)?;
    reject(raw.privacy != PrivacySection::default(), "privacy", kind)?;
    reject(
        raw.problem.iterations.is_some(),
        "problem.iterations (use problem.passes)",
        kind,
    )?;
    let a = &raw.algorithm;
    if let Some(name) = &a.name {
        if parse_algorithm(name)? != Algorithm::Rsgd {
            return Err(invalid("multipass experiments run rsgd"));
        }
    }
    reject(
        a.schedule.is_some() || a.eta_rule.is_some() || a.sigma.is_some(),
        "algorithm schedule/eta_rule/sigma",
        kind,
    )?;
    let eta = a.eta.ok_or(ConfigError::Missing("algorithm.eta"))?;
    let passes = raw.problem.passes.ok_or(ConfigError::Missing("problem.passes"))?;
    let dist = distribution(raw)?;
    let mut out = Vec::new();
    for n in sample_sizes(&raw.problem)? {
        let job = MultipassJob {
            dist: dist.clone(),
            n,
            passes,
            eta,
            trials,
            fresh_sample: raw.distribution.fresh_sample,
            seed,
        };
        let mut exp = RiskExperiment::new(
            dist.clone(),
            Algorithm::Rsgd,
            n,
            passes * n,
            StepSchedule::Constant(eta),
        );
        exp.fresh_sample = job.fresh_sample;
        exp.trials = trials;
        exp.validate()?;
        out.push(job);
    }
    Ok(out)
}

fn dp_jobs(raw: &RawConfig, seed: u64, trials: usize) -> Result<Vec<PrivateSco>, ConfigError> {
    let kind = ExperimentKind::Dp;
    reject(raw.loss != LossSection::default(), "loss", kind)?;
    reject(
        raw.algorithm != AlgorithmSection::default(),
        "algorithm (noisy SGD is fixed)",
        kind,
    )?;
    reject(raw.problem.passes.is_some(), "problem.passes", kind)?;
    let dist = distribution(raw)?;
    let alpha = raw.privacy.alpha.ok_or(ConfigError::Missing("privacy.alpha"))?;
    let mut out = Vec::new();
    for n in sample_sizes(&raw.problem)? {
        match &raw.problem.iterations {
            None => {}
            Some(Horizon::Rule(r)) if r == "n^2" => {}
            Some(Horizon::Fixed(t)) if *t == n * n => {}
            Some(_) => {
                return Err(Error::Precondition {
                    hypothesis: "noisy SGD runs T = n^2 iterations",
                    detail: format!("n = {n}"),
                }
                .into())
            }
        }
        let mut job = PrivateSco::new(dist.clone(), n, alpha);
        job.beta = raw.privacy.beta;
        job.sigma_override = raw.privacy.sigma;
        job.trials = trials;
        job.fresh_sample = raw.distribution.fresh_sample;
        job.seed = seed;
        job.risk_experiment()?.validate()?;
        out.push(job);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "stability"
[problem]
n = 10
iterations = 20
dim = 3
[algorithm]
name = "gd"
eta = 0.1
[loss]
family = "hinge"
"#;

    #[test]
    fn minimal_stability_defaults() {
        let cfg = parse_config(MINIMAL, None).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.kind, ExperimentKind::Stability);
        assert!(cfg.bounds);
        match cfg.job {
            Job::Stability(job) => {
                assert_eq!(job.trials, 1);
                assert_eq!(job.spec.ball.radius(), 1.0);
                assert_eq!(job.pair.n(), 10);
            }
            _ => panic!("wrong job"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("dim = 3", "dim = 3\ncolour = 1");
        assert!(matches!(parse_config(&text, None), Err(ConfigError::Parse(_))));
        let text = format!("bogus = 1\n{MINIMAL}");
        assert!(matches!(parse_config(&text, None), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn missing_and_mistyped_keys() {
        let text = MINIMAL.replace("eta = 0.1\n", "");
        assert!(matches!(
            parse_config(&text, None),
            Err(ConfigError::Missing("algorithm.eta"))
        ));
        let text = MINIMAL.replace("dim = 3", "dim = \"three\"");
        assert!(matches!(parse_config(&text, None), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn persgd_epoch_structure() {
        let text = MINIMAL
            .replace("name = \"gd\"", "name = \"persgd\"")
            .replace("iterations = 20", "iterations = 25");
        let err = parse_config(&text, None).unwrap_err();
        assert!(err.to_string().contains("epoch structure"), "{err}");
    }

    #[test]
    fn persgd_increasing_steps() {
        let text = MINIMAL.replace("name = \"gd\"", "name = \"persgd\"").replace(
            "eta = 0.1",
            &format!(
                "schedule = [{}]",
                (1..=20).map(|t| format!("{}.0", t)).collect::<Vec<_>>().join(", ")
            ),
        );
        let err = parse_config(&text, None).unwrap_err();
        assert!(err.to_string().contains("non-increasing steps"), "{err}");
    }

    #[test]
    fn lower_bound_dimension_hypothesis() {
        let text = r#"
experiment = "lower-bound"
[problem]
n = 10
iterations = 101
dim = 50
[algorithm]
name = "gd"
eta = 0.1
"#;
        let err = parse_config(text, None).unwrap_err();
        assert!(err.to_string().contains("d >= min{T, 1/eta^2}"), "{err}");
        let ok = text.replace("dim = 50", "dim = 100");
        assert!(parse_config(&ok, None).is_ok());
    }

    #[test]
    fn subcommand_kind() {
        let text = MINIMAL.replace("experiment = \"stability\"\n", "");
        let cfg = load_config(&text, Some(ExperimentKind::Stability), None, Some("9")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.raw.seed, Some(9));
        assert!(load_config(MINIMAL, Some(ExperimentKind::Risk), None, None).is_err());
        assert!(matches!(
            parse_config(&text, None),
            Err(ConfigError::Missing("experiment"))
        ));
    }

    #[test]
    fn seed_priority() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some("3")).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, None).unwrap(), 0);
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }

    #[test]
    fn risk_sweep_and_tuned_eta() {
        let text = r#"
experiment = "risk"
trials = 3
[problem]
n = [16, 64]
iterations = "n^2"
dim = 5
[algorithm]
name = "gd"
eta_rule = "tuned"
[distribution]
family = "absolute-deviation"
p_positive = 0.9
"#;
        let cfg = parse_config(text, Some(4)).unwrap();
        let Job::Risk(exps) = cfg.job else { panic!("wrong job") };
        assert_eq!(exps.len(), 2);
        assert_eq!(exps[1].iterations, 64 * 64);
        let eta = exps[0].schedule.constant_value().unwrap();
        assert!((eta - 1.0 / (4.0 * (256.0f64 * 16.0).sqrt())).abs() < 1e-15);
        assert_eq!(exps[0].seed, 4);
    }

    #[test]
    fn dp_rules() {
        let text = r#"
experiment = "dp"
[problem]
n = [16, 64]
dim = 5
[privacy]
alpha = 1.0
"#;
        let cfg = parse_config(text, None).unwrap();
        assert!(matches!(cfg.job, Job::Dp(ref v) if v.len() == 2));
        let bad = text.replace("dim = 5", "dim = 5\niterations = 100");
        assert!(parse_config(&bad, None).unwrap_err().to_string().contains("T = n^2"));
        let bad_beta = text.replace("alpha = 1.0", "alpha = 1.0\nbeta = 0.5");
        assert!(parse_config(&bad_beta, None)
            .unwrap_err()
            .to_string()
            .contains("beta < 1/n"));
    }

    #[test]
    fn sections_must_apply() {
        let text = format!("{MINIMAL}\n[privacy]\nalpha = 1.0\n");
        assert!(matches!(parse_config(&text, None), Err(ConfigError::Invalid(_))));
    }
}
