//! Runs a validated configuration and renders its result table and summary.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, Job, MultipassJob, RawConfig, StabilityJob};
use crate::dp::{calibrate_sigma, run_private_sco, tuned_eta, PrivacyParams, PrivateScoReport};
use crate::error::Result;
use crate::optimizers::{Algorithm, StepSchedule};
use crate::risk::{
    approx_error_bound, loglog_slope, multipass_experiment, multipass_gen_bound, online_to_batch_bound,
    persgd_opt_bound, risk_experiment, summarize, RiskReport, RiskSummary, OPT_ERROR_TOL,
};
use crate::selfcheck::Check;
use crate::stability::{
    anytime_bounds, bound_gd, bound_persgd, bound_persgd_small_t, bound_rsgd_expectation, bound_rsgd_highprob,
    bound_rsgd_small_t, estimate_uas, generic_lower_floor, lower_bound_experiment_jobs, AnytimeBounds, BoundInputs,
    BoundKind, LowerBoundReport, TrialStability,
};

pub const STABILITY_COLUMNS: [&str; 10] = [
    "experiment",
    "trial",
    "step",
    "delta",
    "a_t",
    "bound_gd",
    "bound_rsgd_exp",
    "bound_rsgd_hp",
    "bound_persgd",
    "notes",
];

pub const RISK_COLUMNS: [&str; 11] = [
    "experiment",
    "trial",
    "n",
    "eps_gen",
    "eps_opt",
    "eps_approx",
    "eps_risk",
    "residual",
    "excess_risk",
    "bound",
    "notes",
];

/// Rows under a fixed header. Rows are appended in (trial, step) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(header: &[&'static str]) -> Self {
        ResultTable {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

pub fn columns_for(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Stability | ExperimentKind::LowerBound => &STABILITY_COLUMNS,
        _ => &RISK_COLUMNS,
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub kind: ExperimentKind,
    pub table: ResultTable,
    pub aggregates: Value,
    pub checks: Vec<Check>,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
}

impl Outcome {
    /// All hard invariants held.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(|c| c.passed)
    }

    /// The JSON summary; the timestamp lives only in `header`.
    pub fn summary(&self, cfg: &ExperimentConfig, timestamp: Option<u64>) -> Value {
        json!({
            "header": {
                "tool": "uaslab",
                "version": env!("CARGO_PKG_VERSION"),
                "generated_at_unix": timestamp,
            },
            "experiment": self.kind.name(),
            "seed": cfg.seed,
            "config": cfg.raw,
            "aggregates": self.aggregates,
            "checks": self.checks,
            "passed": self.passed(),
        })
    }
}

pub fn unix_now() -> Option<u64> {
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

/// Writes `results.csv` and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), outcome.table.to_csv())?;
    let summary = serde_json::to_string_pretty(&outcome.summary(cfg, unix_now())).map_err(io::Error::other)?;
    fs::write(dir.join("summary.json"), summary + "\n")
}

pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    match &cfg.job {
        Job::Stability(job) => run_stability(job, cfg.bounds, jobs),
        Job::LowerBound(lb) => run_lower_bound(lb, cfg.bounds, jobs),
        Job::Risk(exps) => run_risk(exps, &cfg.raw, jobs),
        Job::Multipass(list) => run_multipass(list, jobs),
        Job::Dp(list) => run_dp(list, jobs),
    }
}

fn bound_cells(b: Option<&AnytimeBounds>) -> [String; 4] {
    match b {
        Some(b) => [num(b.gd), num(b.rsgd_expectation), opt(b.rsgd_highprob), opt(b.persgd)],
        None => Default::default(),
    }
}

fn push_trial_rows(
    table: &mut ResultTable,
    experiment: &str,
    trial: &TrialStability,
    bounds: &[AnytimeBounds],
    final_notes: String,
) {
    let at = |t: usize| bounds.get(t.wrapping_sub(1));
    let mut row = |step: String, delta: f64, a_t: String, b: Option<&AnytimeBounds>, notes: String| {
        let mut r = vec![experiment.to_string(), trial.trial.to_string(), step, num(delta), a_t];
        r.extend(bound_cells(b));
        r.push(notes);
        table.push(r);
    };
    if let Some(trace) = &trial.trace {
        let last = trace.len();
        for (i, &(delta, a_t)) in trace.iter().enumerate() {
            let a = if i + 1 < last { num(a_t) } else { String::new() };
            row((i + 1).to_string(), delta, a, at(i + 1), String::new());
        }
    }
    let horizon = bounds.len();
    row(
        "final".into(),
        trial.final_delta,
        String::new(),
        at(horizon),
        final_notes,
    );
    row(
        "output".into(),
        trial.output_delta,
        String::new(),
        at(horizon),
        String::new(),
    );
}

fn trial_notes(t: &TrialStability) -> String {
    let t0 = t.t0.map_or("none".to_string(), |v| v.to_string());
    format!("t0={t0};lemma_bound={}", t.lemma_bound)
}

/// `ceil(trials p) + 3 sqrt(trials p)`.
pub fn binomial_allowance(trials: usize, p: f64) -> f64 {
    let mean = trials as f64 * p;
    mean.ceil() + 3.0 * mean.sqrt()
}

fn stability_invariants(per_trial: &[TrialStability], checks: &mut Vec<Check>) {
    let steps: usize = per_trial.iter().map(|t| t.recurrence_violations).sum();
    let closed = per_trial
        .iter()
        .filter(|t| crate::stability::exceeds(t.final_delta, t.lemma_bound))
        .count();
    let coupling = per_trial.iter().filter(|t| !t.coupling_sound).count();
    let infeasible = per_trial.iter().filter(|t| !t.feasible).count();
    checks.push(Check::new(
        "per-step recurrence",
        steps == 0,
        format!("{steps} violating steps"),
    ));
    checks.push(Check::new(
        "closed-form recurrence bound",
        closed == 0,
        format!("{closed} trials above bound"),
    ));
    checks.push(Check::new(
        "shared randomness",
        coupling == 0,
        format!("{coupling} trials with diverging randomness"),
    ));
    checks.push(Check::new(
        "feasibility",
        infeasible == 0,
        format!("{infeasible} trials left the ball"),
    ));
}

fn run_stability(job: &StabilityJob, overlay: bool, jobs: usize) -> Result<Outcome> {
    let spec = &job.spec;
    let n = job.pair.n();
    let est = estimate_uas(spec, &job.oracle, &job.pair, job.trials, jobs, job.trace_trials)?;
    let horizon = spec.num_iterates();
    let bounds = if overlay {
        BoundInputs::new(
            job.oracle.lipschitz(),
            spec.ball.radius(),
            n,
            horizon,
            spec.schedule.clone(),
        )
        .and_then(|b| anytime_bounds(&b, horizon))
        .unwrap_or_default()
    } else {
        Vec::new()
    };
    let mut table = ResultTable::new(&STABILITY_COLUMNS);
    for t in &est.per_trial {
        push_trial_rows(&mut table, "stability", t, &bounds, trial_notes(t));
    }

    let mut checks = Vec::new();
    stability_invariants(&est.per_trial, &mut checks);
    let detail = format!("{} of {} trials above {}", est.bound_exceedances, est.trials, est.bound);
    match est.bound_kind {
        BoundKind::Deterministic => checks.push(Check::new("upper bound", est.bound_exceedances == 0, detail)),
        BoundKind::HighProbability { failure } => {
            let allowed = binomial_allowance(est.trials, failure);
            checks.push(Check::soft(
                "high-probability upper bound",
                est.bound_exceedances as f64 <= allowed,
                format!("{detail}, allowed {allowed:.2}"),
            ));
        }
        BoundKind::Expectation => {}
    }
    if let Some(eb) = est.expectation_bound {
        let limit = eb * (1.0 + 3.0 / (est.trials as f64).sqrt());
        checks.push(Check::soft(
            "expectation upper bound",
            est.mean_final_delta <= limit,
            format!("mean delta_T {} vs {limit}", est.mean_final_delta),
        ));
    }
    let mut lines = vec![format!(
        "stability {}: mean delta_T = {:.6}, max = {:.6}, bound = {:.6} over {} trials",
        spec.algorithm.name(),
        est.mean_final_delta,
        est.max_final_delta,
        est.bound,
        est.trials
    )];
    lines.extend(checks.iter().map(Check::line));
    let aggregates = json!({
        "algorithm": spec.algorithm,
        "n": n,
        "iterations": spec.iterations,
        "trials": est.trials,
        "mean_final_delta": est.mean_final_delta,
        "mean_output_delta": est.mean_output_delta,
        "max_final_delta": est.max_final_delta,
        "quantiles": est.quantiles,
        "bound": est.bound,
        "bound_kind": est.bound_kind,
        "expectation_bound": est.expectation_bound,
        "bound_exceedances": est.bound_exceedances,
    });
    Ok(Outcome {
        kind: ExperimentKind::Stability,
        table,
        aggregates,
        checks,
        lines,
    })
}

fn run_lower_bound(cfg: &crate::stability::LowerBoundConfig, overlay: bool, jobs: usize) -> Result<Outcome> {
    let report: LowerBoundReport = lower_bound_experiment_jobs(cfg, jobs)?;
    let horizon = cfg.algorithm.steps(cfg.iterations) + 1;
    let bounds = if overlay {
        BoundInputs::new(1.0, cfg.radius, cfg.n, horizon, StepSchedule::Constant(cfg.eta))
            .and_then(|b| anytime_bounds(&b, horizon))
            .unwrap_or_default()
    } else {
        Vec::new()
    };
    let mut table = ResultTable::new(&STABILITY_COLUMNS);
    for t in &report.per_trial {
        let notes = format!("{};threshold={}", trial_notes(t), report.threshold);
        push_trial_rows(&mut table, "lower-bound", t, &bounds, notes);
    }
    let mut checks = Vec::new();
    stability_invariants(&report.per_trial, &mut checks);
    let rule = match cfg.algorithm {
        Algorithm::Gd => "0.4 eta sqrt(D)",
        _ => "min{1, T/n} eta sqrt(T) / 8",
    };
    let detail = format!(
        "measured delta_T = {:.6} vs threshold {:.6} ({rule})",
        report.mean_final_delta, report.threshold
    );
    let threshold_check = if cfg.algorithm == Algorithm::Gd {
        Check::new("lower-bound threshold", report.passed, detail)
    } else {
        Check::soft("lower-bound threshold", report.passed, detail)
    };
    checks.push(threshold_check);
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    let mut lines = vec![format!(
        "lower-bound {}: measured delta_T = {:.6} vs threshold {:.6} ({rule}) {verdict}",
        cfg.algorithm.name(),
        report.mean_final_delta,
        report.threshold
    )];
    lines.extend(checks.iter().map(Check::line));
    let aggregates = json!({
        "algorithm": report.algorithm,
        "eta": report.eta,
        "iterations": report.iterations,
        "n": report.n,
        "dim": report.dim,
        "active_dim": report.active_dim,
        "nu": report.nu,
        "kappa": report.kappa,
        "trials": report.trials,
        "mean_final_delta": report.mean_final_delta,
        "mean_output_delta": report.mean_output_delta,
        "threshold": report.threshold,
        "reference": report.reference,
        "passed": report.passed,
    });
    Ok(Outcome {
        kind: ExperimentKind::LowerBound,
        table,
        aggregates,
        checks,
        lines,
    })
}

fn push_risk_rows(
    table: &mut ResultTable,
    experiment: &str,
    reports: &[RiskReport],
    s: &RiskSummary,
    bound: f64,
    notes: &str,
) {
    for r in reports {
        table.push(vec![
            experiment.to_string(),
            r.trial.to_string(),
            r.n.to_string(),
            num(r.eps_gen),
            num(r.eps_opt),
            num(r.eps_approx),
            num(r.eps_risk),
            num(r.residual),
            num(r.excess_risk),
            num(bound),
            format!("gen_gap_exact={};m={}", r.gen_gap_exact, r.fresh_sample_size),
        ]);
    }
    table.push(vec![
        experiment.to_string(),
        "mean".into(),
        s.n.to_string(),
        num(s.mean_eps_gen),
        num(s.mean_eps_opt),
        num(s.mean_eps_approx),
        num(s.mean_eps_risk),
        num(s.max_abs_residual),
        num(s.mean_excess_risk),
        num(bound),
        notes.to_string(),
    ]);
}

fn decomposition_checks(all: &[RiskReport], checks: &mut Vec<Check>) {
    let worst = all.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    checks.push(Check::new(
        "decomposition identity",
        worst <= 1e-12,
        format!("max |residual| = {worst:e}"),
    ));
    let negative = all.iter().filter(|r| r.erm_exact && r.eps_opt < -OPT_ERROR_TOL).count();
    checks.push(Check::new(
        "optimization error against exact ERM",
        negative == 0,
        format!("{negative} negative values"),
    ));
}

fn run_risk(exps: &[crate::risk::RiskExperiment], raw: &RawConfig, jobs: usize) -> Result<Outcome> {
    let mut table = ResultTable::new(&RISK_COLUMNS);
    let mut checks = Vec::new();
    let mut all = Vec::new();
    let mut per_n = Vec::new();
    let mut lines = Vec::new();
    for exp in exps {
        let reports = risk_experiment(exp, jobs)?;
        let s = summarize(&reports);
        let l = exp.dist.oracle().lipschitz();
        let envelope = 4.0 * l * exp.dist.radius / (exp.n as f64).sqrt();
        push_risk_rows(&mut table, "risk", &reports, &s, envelope, "bound=4LR/sqrt(n)");
        lines.push(format!(
            "risk {} n={}: mean excess risk {:.6} (envelope 4LR/sqrt(n) = {:.6})",
            exp.algorithm.name(),
            exp.n,
            s.mean_excess_risk,
            envelope
        ));
        if raw.algorithm.eta_rule.as_deref() == Some("tuned") {
            checks.push(Check::soft(
                format!("excess risk envelope n={}", exp.n),
                s.mean_excess_risk <= envelope,
                format!("{:.6} <= {:.6}", s.mean_excess_risk, envelope),
            ));
        }
        per_n.push(json!({"n": exp.n, "iterations": exp.iterations, "summary": s, "envelope": envelope}));
        all.extend(reports);
    }
    decomposition_checks(&all, &mut checks);
    let mut aggregates = json!({ "per_n": per_n });
    if exps.len() >= 2 {
        let xs: Vec<f64> = exps.iter().map(|e| e.n as f64).collect();
        let ys: Vec<f64> = per_n
            .iter()
            .map(|v| v["summary"]["mean_excess_risk"].as_f64().unwrap_or(0.0))
            .collect();
        if let Ok(slope) = loglog_slope(&xs, &ys) {
            aggregates["loglog_slope"] = json!(slope);
            lines.push(format!("risk: log-log slope of mean excess risk vs n = {slope:.4}"));
            if raw.algorithm.eta_rule.as_deref() == Some("tuned") {
                checks.push(Check::soft(
                    "excess risk slope",
                    (-0.65..=-0.35).contains(&slope),
                    format!("{slope:.4} in [-0.65, -0.35]"),
                ));
            }
        }
    }
    lines.extend(checks.iter().map(Check::line));
    Ok(Outcome {
        kind: ExperimentKind::Risk,
        table,
        aggregates,
        checks,
        lines,
    })
}

fn run_multipass(list: &[MultipassJob], jobs: usize) -> Result<Outcome> {
    let mut table = ResultTable::new(&RISK_COLUMNS);
    let mut checks = Vec::new();
    let mut all = Vec::new();
    let mut per_n = Vec::new();
    let mut lines = Vec::new();
    for job in list {
        let (summary, reports) = multipass_experiment(
            &job.dist,
            job.n,
            job.passes,
            job.eta,
            job.trials,
            job.fresh_sample,
            job.seed,
            jobs,
        )?;
        push_risk_rows(
            &mut table,
            "multipass",
            &reports,
            &summary.risk,
            summary.bound,
            "bound=4L^2 eta (sqrt(Kn) + K)",
        );
        let detail = format!(
            "|mean gap| {:.6} <= {:.6} (bound {:.6} + 3 SE)",
            summary.risk.mean_gen_gap.abs(),
            summary.threshold,
            summary.bound
        );
        lines.push(format!("multipass K={} n={}: {detail}", job.passes, job.n));
        checks.push(Check::soft(
            format!("multipass generalization n={}", job.n),
            summary.passed,
            detail,
        ));
        per_n.push(json!(summary));
        all.extend(reports);
    }
    decomposition_checks(&all, &mut checks);
    lines.extend(checks.iter().map(Check::line));
    Ok(Outcome {
        kind: ExperimentKind::Multipass,
        table,
        aggregates: json!({ "per_n": per_n }),
        checks,
        lines,
    })
}

fn run_dp(list: &[crate::dp::PrivateSco], jobs: usize) -> Result<Outcome> {
    let mut table = ResultTable::new(&RISK_COLUMNS);
    let mut checks = Vec::new();
    let mut all = Vec::new();
    let mut reports: Vec<PrivateScoReport> = Vec::new();
    let mut lines = Vec::new();
    for job in list {
        let r = run_private_sco(job, jobs)?;
        let notes = format!(
            "bound=RL max(1/sqrt(n), sqrt(d ln(1/beta))/(alpha n));sigma={};eta={}",
            r.sigma, r.eta
        );
        push_risk_rows(&mut table, "dp", &r.reports, &r.summary, r.envelope, &notes);
        lines.push(format!(
            "dp n={}: sigma = {:.6}, eta = {:.6e}, mean excess risk {:.6} (envelope {:.6})",
            r.n, r.sigma, r.eta, r.summary.mean_excess_risk, r.envelope
        ));
        all.extend(r.reports.iter().cloned());
        reports.push(r);
    }
    decomposition_checks(&all, &mut checks);
    for w in reports.windows(2) {
        let (a, b) = (&w[0].summary, &w[1].summary);
        if b.n > a.n {
            let se = |s: &RiskSummary, r: &PrivateScoReport| {
                let v: Vec<f64> = r.reports.iter().map(|x| x.excess_risk).collect();
                crate::risk::sample_std(&v) / (s.trials as f64).sqrt()
            };
            let slack = 2.0 * (se(a, &w[0]).powi(2) + se(b, &w[1]).powi(2)).sqrt();
            checks.push(Check::soft(
                format!("excess risk decreases n={}->{}", a.n, b.n),
                b.mean_excess_risk <= a.mean_excess_risk + slack,
                format!(
                    "{:.6} -> {:.6} (ratio {:.4})",
                    a.mean_excess_risk,
                    b.mean_excess_risk,
                    b.mean_excess_risk / a.mean_excess_risk
                ),
            ));
        }
    }
    lines.extend(checks.iter().map(Check::line));
    let aggregates = json!({
        "per_n": reports.iter().map(|r| json!({
            "n": r.n,
            "dim": r.dim,
            "privacy": r.privacy,
            "sigma": r.sigma,
            "eta": r.eta,
            "iterations": r.iterations,
            "envelope": r.envelope,
            "summary": r.summary,
        })).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        kind: ExperimentKind::Dp,
        table,
        aggregates,
        checks,
        lines,
    })
}

/// Every closed form for the parameters in `raw`, as `(name, value or reason)`.
pub fn eval_bounds(raw: &RawConfig) -> Vec<(String, std::result::Result<f64, String>)> {
    let p = &raw.problem;
    let a = &raw.algorithm;
    let mut out: Vec<(String, std::result::Result<f64, String>)> = Vec::new();
    let n = match &p.n {
        Some(crate::config::OneOrMany::One(n)) => *n,
        _ => {
            out.push(("inputs".into(), Err("problem.n must be a single value".into())));
            return out;
        }
    };
    let t = match (&p.iterations, p.passes) {
        (Some(crate::config::Horizon::Fixed(t)), _) => *t,
        (Some(crate::config::Horizon::Rule(r)), _) if r == "n^2" => n * n,
        (None, Some(k)) => k * n,
        _ => {
            out.push((
                "inputs".into(),
                Err("problem.iterations or problem.passes required".into()),
            ));
            return out;
        }
    };
    let l = raw.loss.lipschitz.unwrap_or(1.0);
    let r = p.radius.unwrap_or(1.0);
    let d = p.dim.unwrap_or(1);
    let theta = raw.theta.unwrap_or(0.1);
    let schedule = match (a.eta, &a.schedule) {
        (Some(eta), _) => StepSchedule::Constant(eta),
        (None, Some(list)) => StepSchedule::Explicit(list.clone()),
        (None, None) => {
            out.push((
                "inputs".into(),
                Err("algorithm.eta or algorithm.schedule required".into()),
            ));
            return out;
        }
    };
    let e = |r: Result<f64>| r.map_err(|e| e.to_string());
    match BoundInputs::new(l, r, n, t, schedule.clone()) {
        Ok(b) => {
            out.push(("bound_gd".into(), e(bound_gd(&b))));
            out.push(("bound_rsgd_expectation".into(), e(bound_rsgd_expectation(&b))));
            match bound_rsgd_highprob(&b) {
                Ok((v, fail)) => {
                    out.push(("bound_rsgd_highprob".into(), Ok(v)));
                    out.push(("bound_rsgd_highprob_failure_probability".into(), Ok(fail)));
                }
                Err(err) => out.push(("bound_rsgd_highprob".into(), Err(err.to_string()))),
            }
            out.push(("bound_persgd".into(), e(bound_persgd(&b))));
            out.push(("bound_rsgd_small_t".into(), e(bound_rsgd_small_t(&b))));
            out.push(("bound_persgd_small_t".into(), e(bound_persgd_small_t(&b))));
            out.push(("generic_lower_floor".into(), e(generic_lower_floor(&b))));
        }
        Err(err) => out.push(("stability bounds".into(), Err(err.to_string()))),
    }
    out.push(("approx_error_bound".into(), e(approx_error_bound(r, l, n, theta))));
    if let Some(eta) = schedule.constant_value() {
        if let Some(k) = p.passes {
            out.push(("multipass_gen_bound".into(), e(multipass_gen_bound(l, eta, k, n))));
            out.push((
                "persgd_opt_bound".into(),
                e(persgd_opt_bound(r, l, n, k, &vec![eta; k], r)),
            ));
        }
        let sigma = a.sigma.unwrap_or(0.0);
        out.push((
            "online_to_batch_bound".into(),
            e(online_to_batch_bound(l, r, sigma, d, eta, t, theta)),
        ));
    }
    if let Some(alpha) = raw.privacy.alpha {
        let params = match raw.privacy.beta {
            Some(beta) => PrivacyParams::new(alpha, beta),
            None => PrivacyParams::with_default_beta(alpha, n),
        };
        match params {
            Ok(pp) => {
                out.push(("dp_sigma".into(), e(calibrate_sigma(l, &pp))));
                out.push(("dp_tuned_eta".into(), e(tuned_eta(r, l, n, d, &pp))));
                out.push(("dp_risk_envelope".into(), Ok(crate::dp::risk_envelope(r, l, n, d, &pp))));
            }
            Err(err) => out.push(("privacy".into(), Err(err.to_string()))),
        }
    }
    out
}
