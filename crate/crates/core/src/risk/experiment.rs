use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::{Dataset, LossOracle};
use crate::optimizers::{run, Algorithm, Permutation, RunSpec, StepSchedule};
use crate::rng::RngStream;
use crate::space::{Ball, Vector};
use crate::stability::mean;
use crate::trials::map_trials;

use super::bounds::multipass_gen_bound;
use super::distribution::SyntheticDistribution;

/// Steps of the fallback GD used when no closed-form ERM exists.
pub const ERM_GD_STEPS: usize = 100_000;
/// Tolerance below zero at which an optimization error is reported as 0.
pub const OPT_ERROR_TOL: f64 = 1e-9;

const DATA_STREAM: u64 = 0;
const ALGORITHM_STREAM: u64 = 1;
const FRESH_STREAM: u64 = 2;

/// A high-accuracy empirical risk minimizer and its objective value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmReference {
    pub point: Vector,
    pub value: f64,
    /// `true` for a closed-form minimizer, `false` for the GD fallback.
    pub exact: bool,
}

/// Closed-form ERM where the family admits one, otherwise the best iterate
/// or average of `ERM_GD_STEPS` GD steps with `eta = R / (100 L sqrt(steps))`.
pub fn erm_reference(oracle: &LossOracle, s: &Dataset, ball: &Ball) -> Result<ErmReference> {
    oracle.validate_dataset(s)?;
    if ball.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: ball.dim(),
        });
    }
    if let Some(point) = oracle.closed_form_erm(s, ball) {
        let value = oracle.empirical_risk_unchecked(s, &point);
        return Ok(ErmReference {
            point,
            value,
            exact: true,
        });
    }
    Ok(gd_erm(oracle, s, ball, ERM_GD_STEPS))
}

pub(crate) fn gd_erm(oracle: &LossOracle, s: &Dataset, ball: &Ball, steps: usize) -> ErmReference {
    let l = oracle.lipschitz().max(f64::MIN_POSITIVE);
    let eta = ball.radius() / (100.0 * l * (steps as f64).sqrt());
    let mut x = ball.center().clone();
    let mut g = vec![0.0; x.dim()];
    let mut avg = Vector::zeros(x.dim());
    let mut best = (x.clone(), oracle.empirical_risk_unchecked(s, &x));
    for t in 1..=steps {
        g.fill(0.0);
        oracle.add_empirical_subgradient(s, &x, &mut g);
        x.axpy(-eta, &g);
        ball.project_in_place(&mut x);
        avg.axpy(1.0 / steps as f64, &x);
        let v = oracle.empirical_risk_unchecked(s, &x);
        if v < best.1 {
            best = (x.clone(), v);
        }
        if t == steps {
            let va = oracle.empirical_risk_unchecked(s, &avg);
            if va < best.1 {
                best = (avg.clone(), va);
            }
        }
    }
    ErmReference {
        point: best.0,
        value: best.1,
        exact: false,
    }
}

/// `F_S(output) - F_S(erm_reference)`.
pub fn optimization_error(oracle: &LossOracle, s: &Dataset, output: &[f64], erm_reference: &[f64]) -> Result<f64> {
    Ok(oracle.empirical_risk(s, output)? - oracle.empirical_risk(s, erm_reference)?)
}

/// Monte-Carlo estimate of `F_D(output) - F_S(output)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate {
    pub gap: f64,
    pub fresh_sample_size: usize,
    /// `L R sqrt(2 / m)`.
    pub standard_error: f64,
}

/// Estimates the generalization gap of `output` using `fresh`, a sample drawn
/// independently of `s`.
pub fn generalization_gap(
    oracle: &LossOracle,
    fresh: &Dataset,
    s: &Dataset,
    output: &[f64],
    radius: f64,
) -> Result<GapEstimate> {
    let m = fresh.len();
    let gap = oracle.empirical_risk(fresh, output)? - oracle.empirical_risk(s, output)?;
    Ok(GapEstimate {
        gap,
        fresh_sample_size: m,
        standard_error: oracle.lipschitz() * radius * (2.0 / m as f64).sqrt(),
    })
}

/// Per-trial risk decomposition. `eps_risk` and its three terms are all
/// computed against the same fresh sample, so they telescope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub trial: usize,
    pub n: usize,
    pub eps_gen: f64,
    pub eps_opt: f64,
    pub eps_approx: f64,
    pub eps_risk: f64,
    /// `eps_risk - (eps_gen + eps_opt + eps_approx)`.
    pub residual: f64,
    pub fresh_sample_size: usize,
    pub gen_standard_error: f64,
    /// `F_D(output) - min F_D` from the exact population risk.
    pub excess_risk: f64,
    /// `F_D(output) - F_S(output)` from the exact population risk.
    pub gen_gap_exact: f64,
    pub erm_exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskExperiment {
    pub dist: SyntheticDistribution,
    pub algorithm: Algorithm,
    pub n: usize,
    /// T; `nK` for fixed-permutation SGD and `n^2` for noisy SGD.
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub sigma: Option<f64>,
    pub permutation: Permutation,
    pub trials: usize,
    /// Fresh-sample size; `10 n` when unset.
    pub fresh_sample: Option<usize>,
    pub seed: u64,
}

impl RiskExperiment {
    pub fn new(
        dist: SyntheticDistribution,
        algorithm: Algorithm,
        n: usize,
        iterations: usize,
        schedule: StepSchedule,
    ) -> Self {
        RiskExperiment {
            dist,
            algorithm,
            n,
            iterations,
            schedule,
            sigma: None,
            permutation: Permutation::Random,
            trials: 1,
            fresh_sample: None,
            seed: 0,
        }
    }

    pub fn fresh_sample_size(&self) -> usize {
        self.fresh_sample.unwrap_or(10 * self.n)
    }

    pub fn ball(&self) -> Result<Ball> {
        Ball::centered(self.dist.dim, self.dist.radius)
    }

    fn base_spec(&self) -> Result<RunSpec> {
        let mut spec = RunSpec::new(
            self.algorithm,
            self.iterations,
            self.schedule.clone(),
            self.ball()?,
            self.seed,
        )
        .with_permutation(self.permutation.clone());
        spec.sigma = self.sigma;
        Ok(spec)
    }

    /// Checks every precondition before any trial runs.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.fresh_sample_size() == 0 {
            return Err(Error::invalid("fresh_sample", "m must be at least 1"));
        }
        if self.dist.known_minimizer().is_none() {
            return Err(Error::invalid(
                "distribution",
                "excess risk needs a known population minimizer",
            ));
        }
        self.base_spec()?.validate(&self.dist.oracle(), self.n)
    }
}

/// `R / (4 L sqrt(T n))`, the step size that balances stability against
/// optimization error for full-batch GD.
pub fn tuned_gd_eta(radius: f64, lipschitz: f64, iterations: usize, n: usize) -> f64 {
    radius / (4.0 * lipschitz * ((iterations * n) as f64).sqrt())
}

/// Draws `S` per trial, runs the algorithm and decomposes its excess risk.
pub fn risk_experiment(exp: &RiskExperiment, jobs: usize) -> Result<Vec<RiskReport>> {
    exp.validate()?;
    let oracle = exp.dist.oracle();
    let ball = exp.ball()?;
    let spec = exp.base_spec()?;
    let x_star = exp.dist.known_minimizer().expect("validated");
    let optimum = exp.dist.population_risk(&x_star);
    let root = RngStream::new(exp.seed, 0);
    let m = exp.fresh_sample_size();

    map_trials(exp.trials, jobs, |trial| {
        let stream = root.substream(trial as u64);
        let s = exp.dist.sample(exp.n, &mut stream.substream(DATA_STREAM))?;
        let fresh = exp.dist.sample(m, &mut stream.substream(FRESH_STREAM))?;
        let trial_spec = spec.clone().with_rng(stream.substream(ALGORITHM_STREAM));
        let traj = run(&trial_spec, &oracle, &s)?;
        let out = &traj.averaged_output;
        let erm = erm_reference(&oracle, &s, &ball)?;

        let f_s_out = oracle.empirical_risk_unchecked(&s, out);
        let f_s_erm = oracle.empirical_risk_unchecked(&s, &erm.point);
        let f_d_out = oracle.empirical_risk_unchecked(&fresh, out);
        let f_d_star = oracle.empirical_risk_unchecked(&fresh, &x_star);
        let eps_gen = f_d_out - f_s_out;
        let eps_opt = f_s_out - f_s_erm;
        let eps_approx = f_s_erm - f_d_star;
        let eps_risk = f_d_out - f_d_star;
        let population_out = exp.dist.population_risk(out);
        Ok(RiskReport {
            trial,
            n: exp.n,
            eps_gen,
            eps_opt,
            eps_approx,
            eps_risk,
            residual: eps_risk - (eps_gen + eps_opt + eps_approx),
            fresh_sample_size: m,
            gen_standard_error: oracle.lipschitz() * ball.radius() * (2.0 / m as f64).sqrt(),
            excess_risk: population_out - optimum,
            gen_gap_exact: population_out - f_s_out,
            erm_exact: erm.exact,
        })
    })
}

/// Aggregates over the trials of one risk experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskSummary {
    pub n: usize,
    pub trials: usize,
    pub mean_excess_risk: f64,
    pub mean_eps_risk: f64,
    pub mean_eps_gen: f64,
    pub mean_eps_opt: f64,
    pub mean_eps_approx: f64,
    pub mean_gen_gap: f64,
    /// Standard error of `mean_gen_gap` across trials.
    pub gen_gap_standard_error: f64,
    pub max_abs_residual: f64,
}

pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

pub fn summarize(reports: &[RiskReport]) -> RiskSummary {
    let col = |f: fn(&RiskReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let gaps = col(|r| r.gen_gap_exact);
    RiskSummary {
        n: reports.first().map_or(0, |r| r.n),
        trials: reports.len(),
        mean_excess_risk: mean(&col(|r| r.excess_risk)),
        mean_eps_risk: mean(&col(|r| r.eps_risk)),
        mean_eps_gen: mean(&col(|r| r.eps_gen)),
        mean_eps_opt: mean(&col(|r| r.eps_opt)),
        mean_eps_approx: mean(&col(|r| r.eps_approx)),
        mean_gen_gap: mean(&gaps),
        gen_gap_standard_error: sample_std(&gaps) / (reports.len().max(1) as f64).sqrt(),
        max_abs_residual: reports.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid(
            "points",
            "need at least two (x, y) pairs of equal length",
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(
            "points",
            "log-log regression needs positive finite values",
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "x values must not all coincide"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultipassSummary {
    pub passes: usize,
    pub eta: f64,
    pub risk: RiskSummary,
    pub bound: f64,
    /// `bound + 3 * standard error`.
    pub threshold: f64,
    pub passed: bool,
}

/// K-pass sampling-with-replacement SGD (`T = K n`) and its mean
/// generalization gap against the expectation bound.
#[allow(clippy::too_many_arguments)]
pub fn multipass_experiment(
    dist: &SyntheticDistribution,
    n: usize,
    passes: usize,
    eta: f64,
    trials: usize,
    fresh_sample: Option<usize>,
    seed: u64,
    jobs: usize,
) -> Result<(MultipassSummary, Vec<RiskReport>)> {
    if passes == 0 {
        return Err(Error::invalid("passes", "K must be at least 1"));
    }
    let mut exp = RiskExperiment::new(
        dist.clone(),
        Algorithm::Rsgd,
        n,
        passes * n,
        StepSchedule::Constant(eta),
    );
    exp.trials = trials;
    exp.fresh_sample = fresh_sample;
    exp.seed = seed;
    let reports = risk_experiment(&exp, jobs)?;
    let risk = summarize(&reports);
    let bound = multipass_gen_bound(dist.oracle().lipschitz(), eta, passes, n)?;
    let threshold = bound + 3.0 * risk.gen_gap_standard_error;
    let passed = risk.mean_gen_gap.abs() <= threshold;
    Ok((
        MultipassSummary {
            passes,
            eta,
            risk,
            bound,
            threshold,
            passed,
        },
        reports,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{AdversarialMaxLoss, DataPoint};
    use crate::risk::{online_to_batch_bound, DistributionFamily};

    fn absdev(p: f64) -> SyntheticDistribution {
        SyntheticDistribution::new(DistributionFamily::AbsoluteDeviation, p, 2, 1.0).unwrap()
    }

    #[test]
    fn optimization_error_examples() {
        let oracle = LossOracle::absolute_deviation(1).unwrap();
        let s = Dataset::from_tags(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!(optimization_error(&oracle, &s, &[0.3], &[0.3]).unwrap(), 0.0);
        let ball = Ball::centered(1, 2.0).unwrap();
        let erm = erm_reference(&oracle, &s, &ball).unwrap();
        assert!(erm.exact);
        assert_eq!(erm.point[0], 0.0);
        assert_eq!(optimization_error(&oracle, &s, &[0.0], &erm.point).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_erm_agrees_with_long_gd() {
        let mut rng = RngStream::new(11, 0);
        let ball = Ball::centered(2, 1.0).unwrap();
        for oracle in [
            LossOracle::absolute_deviation(2).unwrap(),
            LossOracle::hinge(2).unwrap(),
        ] {
            let s = Dataset::new((0..15).map(|_| oracle.random_point(&mut rng)).collect()).unwrap();
            let exact = erm_reference(&oracle, &s, &ball).unwrap();
            let gd = gd_erm(&oracle, &s, &ball, ERM_GD_STEPS);
            assert!(gd.value >= exact.value - 1e-12);
            assert!(
                gd.value - exact.value < 1e-4,
                "{:?}: {} vs {}",
                oracle.family(),
                gd.value,
                exact.value
            );
        }
    }

    #[test]
    fn adversarial_family_uses_gd_fallback() {
        let oracle = LossOracle::adversarial(AdversarialMaxLoss::new(3, 0.01, 2.0).unwrap(), 4).unwrap();
        let s = Dataset::from_tags(&[1.0, 0.0, 0.0]).unwrap();
        let ball = Ball::centered(4, 1.0).unwrap();
        let erm = erm_reference(&oracle, &s, &ball).unwrap();
        assert!(!erm.exact);
        assert!(ball.contains(&erm.point, 1e-12));
        assert!(erm.value <= oracle.empirical_risk(&s, &[0.0; 4]).unwrap());
    }

    #[test]
    fn gap_examples() {
        let oracle = LossOracle::absolute_deviation(1).unwrap();
        let point_mass = Dataset::from_tags(&[1.0; 5]).unwrap();
        let fresh = Dataset::from_tags(&[1.0; 50]).unwrap();
        let g = generalization_gap(&oracle, &fresh, &point_mass, &[0.4], 1.0).unwrap();
        assert!(g.gap.abs() < 1e-15);
        assert!((g.standard_error - (2.0f64 / 50.0).sqrt()).abs() < 1e-15);

        let constant = LossOracle::linear(Vector::zeros(2)).unwrap();
        let s = Dataset::from_tags(&[0.3, -0.2]).unwrap();
        let fresh = Dataset::from_tags(&[1.0, -1.0, 0.5]).unwrap();
        assert_eq!(
            generalization_gap(&constant, &fresh, &s, &[0.7, 0.1], 1.0).unwrap().gap,
            0.0
        );

        // symmetric +-1 distribution has F_D(0) = 1 exactly
        let d = absdev(0.5);
        let s = Dataset::from_tags(&[1.0, 1.0, -1.0, 0.5]).unwrap();
        let f_s0 = oracle.empirical_risk(&s, &[0.0]).unwrap();
        assert!((d.population_risk(&[0.0, 0.0]) - f_s0 - (1.0 - 0.875)).abs() < 1e-15);
        let big = d.sample(40_000, &mut RngStream::new(2, 0)).unwrap();
        let est = generalization_gap(&oracle, &big, &s, &[0.0], 1.0).unwrap();
        assert!(
            (est.gap - (1.0 - f_s0)).abs() < 1e-12,
            "abs-dev at 0 is 1 for every +-1 draw"
        );
        let _ = DataPoint(0.0);
    }

    #[test]
    fn decomposition_telescopes() {
        for alg in [Algorithm::Gd, Algorithm::Rsgd, Algorithm::Persgd, Algorithm::Nsgd] {
            let n = 12;
            let t = match alg {
                Algorithm::Nsgd => n * n,
                Algorithm::Persgd => 3 * n,
                _ => 50,
            };
            let mut exp = RiskExperiment::new(absdev(0.8), alg, n, t, StepSchedule::Constant(0.02));
            exp.trials = 8;
            exp.seed = 4;
            if alg == Algorithm::Nsgd {
                exp.sigma = Some(0.5);
            }
            let reports = risk_experiment(&exp, 2).unwrap();
            for r in &reports {
                assert!(r.residual.abs() <= 1e-12, "{alg:?}: {}", r.residual);
                assert!(r.eps_opt >= -OPT_ERROR_TOL);
                assert!(r.excess_risk >= -1e-15);
                assert_eq!(r.fresh_sample_size, 120);
            }
        }
    }

    #[test]
    fn point_mass_gd_converges() {
        let d = absdev(1.0);
        let mut exp = RiskExperiment::new(d, Algorithm::Gd, 5, 2000, StepSchedule::Constant(0.01));
        exp.trials = 2;
        let reports = risk_experiment(&exp, 1).unwrap();
        for r in reports {
            assert!(r.eps_risk.abs() < 0.05, "{}", r.eps_risk);
            assert!(r.excess_risk < 0.05);
            assert_eq!(r.eps_gen, 0.0);
        }
    }

    #[test]
    fn tuned_gd_excess_risk_below_envelope() {
        for n in [16usize, 64] {
            let t = n * n;
            let eta = tuned_gd_eta(1.0, 1.0, t, n);
            let mut exp = RiskExperiment::new(absdev(0.9), Algorithm::Gd, n, t, StepSchedule::Constant(eta));
            exp.trials = 50;
            exp.seed = 1;
            let s = summarize(&risk_experiment(&exp, 4).unwrap());
            assert!(
                s.mean_excess_risk <= 4.0 / (n as f64).sqrt(),
                "n={n}: {}",
                s.mean_excess_risk
            );
        }
    }

    #[test]
    fn rsgd_optimization_error_within_online_to_batch_bound() {
        let (n, t, eta, dim) = (20usize, 200usize, 0.05, 2usize);
        let theta = 0.5;
        let bound = online_to_batch_bound(1.0, 1.0, 0.0, dim, eta, t, theta).unwrap();
        let mut exp = RiskExperiment::new(absdev(0.7), Algorithm::Rsgd, n, t, StepSchedule::Constant(eta));
        exp.trials = 100;
        let reports = risk_experiment(&exp, 4).unwrap();
        let exceed = reports.iter().filter(|r| r.eps_opt > bound).count() as f64;
        let p = theta;
        let slack = 3.0 * (100.0 * p * (1.0 - p)).sqrt();
        assert!(exceed <= p * 100.0 + slack, "{exceed}");
    }

    #[test]
    fn slope_regression() {
        let xs = [16.0, 64.0, 256.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn multipass_small() {
        let (summary, reports) = multipass_experiment(&absdev(0.9), 25, 4, 0.01, 30, None, 0, 2).unwrap();
        assert_eq!(reports.len(), 30);
        assert!((summary.bound - 0.56).abs() < 1e-12);
        assert!(summary.passed);
    }

    #[test]
    fn rejects_bad_experiments() {
        let mut exp = RiskExperiment::new(absdev(0.9), Algorithm::Persgd, 10, 25, StepSchedule::Constant(0.1));
        assert!(matches!(risk_experiment(&exp, 1), Err(Error::Precondition { .. })));
        exp.iterations = 30;
        exp.trials = 0;
        assert!(risk_experiment(&exp, 1).is_err());
        exp.trials = 1;
        exp.fresh_sample = Some(0);
        assert!(risk_experiment(&exp, 1).is_err());
    }
}
