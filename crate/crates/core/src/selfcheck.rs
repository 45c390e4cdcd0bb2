//! Randomized property suites shared by the `selfcheck` subcommand and the
//! acceptance tests.

use serde::Serialize;

use crate::dp::{calibrate_sigma, PrivacyParams};
use crate::error::Result;
use crate::losses::{random_pair, AdversarialMaxLoss, LossOracle};
use crate::optimizers::{run_coupled, Algorithm, Permutation, RunSpec, StepSchedule};
use crate::rng::RngStream;
use crate::space::{distance, dot, Ball, Vector};

/// A named pass/fail outcome. Hard checks are invariants that must hold on
/// every run; soft checks are statistical comparisons that are only reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub hard: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            hard: true,
            detail: detail.into(),
        }
    }

    pub fn soft(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            hard: false,
            ..Check::new(name, passed, detail)
        }
    }

    /// `PASS name: detail`, marking soft checks.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let tag = if self.hard { "" } else { " (statistical)" };
        format!("{verdict} {}{tag}: {}", self.name, self.detail)
    }
}

fn random_vector(rng: &mut RngStream, d: usize, scale: f64) -> Vector {
    Vector::from((0..d).map(|_| rng.uniform(-scale, scale)).collect::<Vec<_>>())
}

fn random_ball(rng: &mut RngStream, d: usize) -> Ball {
    Ball::new(random_vector(rng, d, 2.0), rng.uniform(0.1, 3.0)).expect("positive radius")
}

fn random_oracle(rng: &mut RngStream, d: usize) -> LossOracle {
    match rng.index(4) {
        0 => LossOracle::hinge(d),
        1 => LossOracle::absolute_deviation(d),
        2 => LossOracle::linear(random_vector(rng, d, 1.0)),
        _ => {
            let active = 1 + rng.index(d);
            let kappa = (active as f64).sqrt() * rng.uniform(1.0, 10.0);
            let loss = AdversarialMaxLoss::new(active, rng.uniform(0.0, 0.1), kappa).expect("kappa >= sqrt(D)");
            LossOracle::adversarial(loss, d)
        }
    }
    .expect("valid oracle")
}

/// Nonexpansiveness, idempotence and feasibility of ball projection.
pub fn projection_suite(cases: usize, seed: u64) -> Check {
    let mut rng = RngStream::new(seed, 0x70726f6a);
    let mut failures = 0;
    for _ in 0..cases {
        let d = 1 + rng.index(8);
        let ball = random_ball(&mut rng, d);
        let x = random_vector(&mut rng, d, 10.0);
        let y = random_vector(&mut rng, d, 10.0);
        let (px, py) = (ball.project(&x).expect("finite"), ball.project(&y).expect("finite"));
        let ppx = ball.project(&px).expect("finite");
        let ok =
            distance(&px, &py) <= distance(&x, &y) + 1e-12 && distance(&ppx, &px) <= 1e-12 && ball.contains(&px, 1e-12);
        failures += usize::from(!ok);
    }
    Check::new(
        "projection nonexpansive",
        failures == 0,
        format!("{failures} failures in {cases} cases"),
    )
}

/// `f(y) >= f(x) + <g(x), y - x>` and `||g(x)|| <= L` for the selected
/// subgradients of every loss family.
pub fn subgradient_suite(cases: usize, seed: u64) -> Check {
    let mut rng = RngStream::new(seed, 0x73756267);
    let mut failures = 0;
    for _ in 0..cases {
        let d = 1 + rng.index(6);
        let oracle = random_oracle(&mut rng, d);
        let z = oracle.random_point(&mut rng);
        let x = random_vector(&mut rng, d, 3.0);
        let y = random_vector(&mut rng, d, 3.0);
        let g = oracle.subgradient(&x, z).expect("valid input");
        let (fx, fy) = (oracle.eval(&x, z).expect("valid"), oracle.eval(&y, z).expect("valid"));
        let diff: Vec<f64> = y.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let tol = 1e-12 * (1.0 + fx.abs() + fy.abs());
        let ok = fy >= fx + dot(&g, &diff) - tol && g.norm() <= oracle.lipschitz() * (1.0 + 1e-12) + 1e-15;
        failures += usize::from(!ok);
    }
    Check::new(
        "subgradient inequality",
        failures == 0,
        format!("{failures} failures in {cases} cases"),
    )
}

/// Coupled-run measurements for one random instance of mixed algorithm,
/// family and schedule: `(recurrence violations, final delta, closed-form bound)`.
pub fn random_coupled_instance(rng: &mut RngStream) -> Result<(usize, f64, f64)> {
    let algorithm = [Algorithm::Gd, Algorithm::Rsgd, Algorithm::Persgd, Algorithm::Nsgd][rng.index(4)];
    let d = 2 + rng.index(5);
    let n = 2 + rng.index(8);
    let oracle = if rng.bernoulli(0.5) {
        LossOracle::hinge(d)?
    } else {
        let active = 1 + rng.index(d);
        let kappa = (active as f64).sqrt() * rng.uniform(1.0, 20.0);
        LossOracle::adversarial(AdversarialMaxLoss::new(active, rng.uniform(0.0, 0.05), kappa)?, d)?
    };
    let iterations = match algorithm {
        Algorithm::Persgd => n * (1 + rng.index(4)),
        Algorithm::Nsgd => n * n,
        _ => 2 + rng.index(60),
    };
    let schedule = match (algorithm, rng.index(3)) {
        (Algorithm::Nsgd, _) | (_, 0) => StepSchedule::Constant(rng.uniform(0.001, 0.3)),
        (_, 1) => {
            let mut v: Vec<f64> = (0..iterations).map(|_| rng.uniform(0.001, 0.3)).collect();
            v.sort_by(|a, b| b.total_cmp(a));
            StepSchedule::Explicit(v)
        }
        _ if algorithm == Algorithm::Persgd => {
            let eta0 = rng.uniform(0.01, 0.5);
            StepSchedule::Explicit((1..=iterations).map(|t| eta0 / (t as f64).sqrt()).collect())
        }
        _ => StepSchedule::Explicit((0..iterations).map(|_| rng.uniform(0.0, 0.3)).collect()),
    };
    let ball = Ball::centered(d, rng.uniform(0.2, 3.0))?;
    let mut spec = RunSpec::new(algorithm, iterations, schedule, ball, rng.index(1 << 20) as u64)
        .with_permutation(Permutation::Random);
    if algorithm == Algorithm::Nsgd {
        spec = spec.with_sigma(rng.uniform(0.0, 1.0));
    }
    let pair = random_pair(&oracle, n, rng)?;
    let tp = run_coupled(&spec, &oracle, &pair)?;
    Ok((tp.recurrence_violations(1e-9).len(), tp.final_delta(), tp.lemma_bound()))
}

/// The per-step recurrence and its closed-form conclusion on random coupled runs.
pub fn recurrence_suite(runs: usize, seed: u64) -> Result<Check> {
    let mut rng = RngStream::new(seed, 0x72656375);
    let (mut steps_failed, mut closed_failed) = (0, 0);
    for _ in 0..runs {
        let (violations, delta, bound) = random_coupled_instance(&mut rng)?;
        steps_failed += violations;
        closed_failed += usize::from(delta > bound + 1e-9);
    }
    Ok(Check::new(
        "stability recurrence",
        steps_failed == 0 && closed_failed == 0,
        format!("{steps_failed} step violations, {closed_failed} closed-form violations in {runs} runs"),
    ))
}

/// Noise calibration against hand-computed values.
pub fn sigma_suite() -> Check {
    let cases = [
        (2.0, (-8.0f64).exp(), 1.0, 16.0),
        (1.0, (-1.0f64).exp(), 1.0, 8f64.sqrt()),
        (1.0, (-1.0f64).exp(), 0.5, 2.0 * 8f64.sqrt()),
    ];
    let worst = cases
        .iter()
        .map(|&(l, beta, alpha, want)| {
            let p = PrivacyParams::new(alpha, beta).expect("valid");
            (calibrate_sigma(l, &p).expect("valid") - want).abs() / want
        })
        .fold(0.0, f64::max);
    Check::new(
        "noise calibration",
        worst <= 4.0 * f64::EPSILON,
        format!("max relative error {worst:e}"),
    )
}

pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        projection_suite(10_000, seed),
        subgradient_suite(10_000, seed),
        recurrence_suite(200, seed)?,
        sigma_suite(),
    ])
}
