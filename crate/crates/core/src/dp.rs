//! Differentially private noisy SGD: noise calibration, the tuned step size
//! and private stochastic convex optimization experiments.
//!
//! Only the calibration inputs are provided here; no privacy accounting or
//! empirical auditing is performed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizers::{Algorithm, Permutation, StepSchedule};
use crate::risk::{risk_experiment, summarize, RiskExperiment, RiskReport, RiskSummary, SyntheticDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyParams {
    alpha: f64,
    beta: f64,
}

impl PrivacyParams {
    /// `alpha` in `(0, 1]`, `beta` in `(0, 1)`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")));
        }
        Ok(PrivacyParams { alpha, beta })
    }

    /// `beta = 1 / n^2`.
    pub fn with_default_beta(alpha: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", "default beta = 1/n^2 needs n >= 2"));
        }
        Self::new(alpha, 1.0 / (n as f64 * n as f64))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Typical privacy settings need `beta < 1/n`.
    pub fn check_for_dataset(&self, n: usize) -> Result<()> {
        if self.beta * (n as f64) < 1.0 {
            Ok(())
        } else {
            Err(Error::precondition(
                "private SCO requires beta < 1/n",
                format!("beta = {} with n = {n}", self.beta),
            ))
        }
    }

    fn log_inv_beta(&self) -> f64 {
        (1.0 / self.beta).ln()
    }
}

/// `sigma = sqrt(8 L^2 ln(1/beta)) / alpha`.
pub fn calibrate_sigma(lipschitz: f64, p: &PrivacyParams) -> Result<f64> {
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(
            "lipschitz",
            format!("must be finite and >= 0, got {lipschitz}"),
        ));
    }
    Ok((8.0 * lipschitz * lipschitz * p.log_inv_beta()).sqrt() / p.alpha)
}

/// `eta = R / (L n max(sqrt(n), sqrt(d ln(1/beta)) / alpha))`.
pub fn tuned_eta(radius: f64, lipschitz: f64, n: usize, dim: usize, p: &PrivacyParams) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(
            "lipschitz",
            format!("must be positive, got {lipschitz}"),
        ));
    }
    if n == 0 || dim == 0 {
        return Err(Error::invalid("n", "n and d must be at least 1"));
    }
    let nf = n as f64;
    let scale = nf.sqrt().max((dim as f64 * p.log_inv_beta()).sqrt() / p.alpha);
    Ok(radius / (lipschitz * nf * scale))
}

/// `R L max(1/sqrt(n), sqrt(d ln(1/beta)) / (alpha n))`, the shape of the
/// expected excess risk.
pub fn risk_envelope(radius: f64, lipschitz: f64, n: usize, dim: usize, p: &PrivacyParams) -> f64 {
    let nf = n as f64;
    radius * lipschitz * (1.0 / nf.sqrt()).max((dim as f64 * p.log_inv_beta()).sqrt() / (p.alpha * nf))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivateSco {
    pub dist: SyntheticDistribution,
    pub n: usize,
    pub alpha: f64,
    /// Defaults to `1 / n^2`.
    pub beta: Option<f64>,
    pub trials: usize,
    pub fresh_sample: Option<usize>,
    pub seed: u64,
    /// Replaces the calibrated noise level (for example 0 to drop the noise).
    pub sigma_override: Option<f64>,
}

impl PrivateSco {
    pub fn new(dist: SyntheticDistribution, n: usize, alpha: f64) -> Self {
        PrivateSco {
            dist,
            n,
            alpha,
            beta: None,
            trials: 1,
            fresh_sample: None,
            seed: 0,
            sigma_override: None,
        }
    }

    pub fn privacy(&self) -> Result<PrivacyParams> {
        let p = match self.beta {
            Some(beta) => PrivacyParams::new(self.alpha, beta)?,
            None => PrivacyParams::with_default_beta(self.alpha, self.n)?,
        };
        p.check_for_dataset(self.n)?;
        Ok(p)
    }

    /// The underlying noisy-SGD risk experiment with `T = n^2`.
    pub fn risk_experiment(&self) -> Result<RiskExperiment> {
        let p = self.privacy()?;
        let l = self.dist.oracle().lipschitz();
        let sigma = match self.sigma_override {
            Some(s) => s,
            None => calibrate_sigma(l, &p)?,
        };
        let eta = tuned_eta(self.dist.radius, l, self.n, self.dist.dim, &p)?;
        let mut exp = RiskExperiment::new(
            self.dist.clone(),
            Algorithm::Nsgd,
            self.n,
            self.n * self.n,
            StepSchedule::Constant(eta),
        );
        exp.sigma = Some(sigma);
        exp.permutation = Permutation::Identity;
        exp.trials = self.trials;
        exp.fresh_sample = self.fresh_sample;
        exp.seed = self.seed;
        Ok(exp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivateScoReport {
    pub n: usize,
    pub dim: usize,
    pub privacy: PrivacyParams,
    pub sigma: f64,
    pub eta: f64,
    pub iterations: usize,
    pub envelope: f64,
    pub summary: RiskSummary,
    pub reports: Vec<RiskReport>,
}

pub fn run_private_sco(cfg: &PrivateSco, jobs: usize) -> Result<PrivateScoReport> {
    let privacy = cfg.privacy()?;
    let exp = cfg.risk_experiment()?;
    let reports = risk_experiment(&exp, jobs)?;
    let eta = exp.schedule.constant_value().expect("constant schedule");
    Ok(PrivateScoReport {
        n: cfg.n,
        dim: cfg.dist.dim,
        privacy,
        sigma: exp.sigma.expect("noise level set"),
        eta,
        iterations: exp.iterations,
        envelope: risk_envelope(
            cfg.dist.radius,
            cfg.dist.oracle().lipschitz(),
            cfg.n,
            cfg.dist.dim,
            &privacy,
        ),
        summary: summarize(&reports),
        reports,
    })
}
