//! Closed-form generalization, approximation and optimization error bounds.

use crate::error::{Error, Result};

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

fn at_least_one(name: &'static str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be at least 1"))
    }
}

/// `R L sqrt(2 ln(1/theta)) / sqrt(n)`, the approximation error bound holding
/// with probability `1 - theta`.
pub fn approx_error_bound(radius: f64, lipschitz: f64, n: usize, theta: f64) -> Result<f64> {
    positive("radius", radius)?;
    non_negative("lipschitz", lipschitz)?;
    at_least_one("n", n)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::invalid("theta", format!("must lie in (0, 1], got {theta}")));
    }
    Ok(radius * lipschitz * (2.0 * (1.0 / theta).ln()).sqrt() / (n as f64).sqrt())
}

/// `4 L^2 eta (sqrt(K n) + K)`, bounding the expected generalization gap of
/// K-pass sampling-with-replacement SGD.
pub fn multipass_gen_bound(lipschitz: f64, eta: f64, passes: usize, n: usize) -> Result<f64> {
    non_negative("lipschitz", lipschitz)?;
    non_negative("eta", eta)?;
    at_least_one("passes", passes)?;
    at_least_one("n", n)?;
    let k = passes as f64;
    Ok(4.0 * lipschitz * lipschitz * eta * ((k * n as f64).sqrt() + k))
}

/// Optimization error of averaged SGD with a noisy oracle, holding with
/// probability `1 - theta`:
/// `(LR + sigma (R + eta L)) sqrt(2 ln(4/theta) / T) + R^2 / (2 eta T) + eta (L^2/2 + d sigma^2)`.
///
/// Requires `theta` in `(4 exp(-T/32), 1)`.
#[allow(clippy::too_many_arguments)]
pub fn online_to_batch_bound(
    lipschitz: f64,
    radius: f64,
    sigma: f64,
    dim: usize,
    eta: f64,
    iterations: usize,
    theta: f64,
) -> Result<f64> {
    non_negative("lipschitz", lipschitz)?;
    positive("radius", radius)?;
    non_negative("sigma", sigma)?;
    positive("eta", eta)?;
    at_least_one("iterations", iterations)?;
    let t = iterations as f64;
    let floor = 4.0 * (-t / 32.0).exp();
    if !(theta > floor && theta < 1.0) {
        return Err(Error::precondition(
            "noisy online-to-batch bound requires theta in (4 exp(-T/32), 1)",
            format!("theta = {theta}, lower end {floor}"),
        ));
    }
    let (l, r) = (lipschitz, radius);
    let concentration = (l * r + sigma * (r + eta * l)) * (2.0 * (4.0 / theta).ln() / t).sqrt();
    Ok(concentration + r * r / (2.0 * eta * t) + eta * (l * l / 2.0 + dim as f64 * sigma * sigma))
}

/// Empirical-risk bound for fixed-permutation SGD with per-epoch steps
/// `eta_per_epoch` (length `K`) and any permutation:
/// `x1_dist^2 / (2 n sum eta_k) + L^2 (n + 2) / 2 * sum eta_k^2 / sum eta_k`.
pub fn persgd_opt_bound(
    radius: f64,
    lipschitz: f64,
    n: usize,
    passes: usize,
    eta_per_epoch: &[f64],
    x1_dist: f64,
) -> Result<f64> {
    positive("radius", radius)?;
    non_negative("lipschitz", lipschitz)?;
    at_least_one("n", n)?;
    at_least_one("passes", passes)?;
    if eta_per_epoch.len() != passes {
        return Err(Error::invalid(
            "eta_per_epoch",
            format!("expected {passes} entries, got {}", eta_per_epoch.len()),
        ));
    }
    for &eta in eta_per_epoch {
        non_negative("eta_per_epoch", eta)?;
    }
    non_negative("x1_dist", x1_dist)?;
    if x1_dist > 2.0 * radius * (1.0 + 1e-12) {
        return Err(Error::invalid("x1_dist", "cannot exceed the diameter 2R"));
    }
    let sum: f64 = eta_per_epoch.iter().sum();
    if sum <= 0.0 {
        return Err(Error::invalid("eta_per_epoch", "step sum must be positive"));
    }
    let sum_sq: f64 = eta_per_epoch.iter().map(|e| e * e).sum();
    let nf = n as f64;
    Ok(x1_dist * x1_dist / (2.0 * nf * sum) + lipschitz * lipschitz * (nf + 2.0) / 2.0 * sum_sq / sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approximation_error() {
        let v = approx_error_bound(1.0, 1.0, 100, (-2.0f64).exp()).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        assert_eq!(approx_error_bound(1.0, 1.0, 100, 1.0).unwrap(), 0.0);
        let quarter = approx_error_bound(1.0, 1.0, 400, (-2.0f64).exp()).unwrap();
        assert!((quarter - 0.1).abs() < 1e-12);
        assert!(approx_error_bound(1.0, 1.0, 100, 0.0).is_err());
        assert!(approx_error_bound(1.0, 1.0, 100, 1.5).is_err());
    }

    #[test]
    fn multipass() {
        assert!((multipass_gen_bound(1.0, 0.01, 4, 25).unwrap() - 0.56).abs() < 1e-12);
        assert_eq!(multipass_gen_bound(1.0, 0.0, 4, 25).unwrap(), 0.0);
        assert!((multipass_gen_bound(2.0, 0.1, 1, 1).unwrap() - 8.0 * 4.0 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn online_to_batch() {
        let theta = 4.0 * (-2.0f64).exp();
        let v = online_to_batch_bound(1.0, 1.0, 0.0, 3, 0.1, 100, theta).unwrap();
        assert!((v - 0.3).abs() < 1e-12, "{v}");
        let mut prev = 0.0;
        for eta in [1.0, 10.0, 100.0, 1000.0] {
            let v = online_to_batch_bound(1.0, 1.0, 0.0, 3, eta, 100, theta).unwrap();
            assert!(v > prev);
            assert!(v >= eta / 2.0);
            prev = v;
        }
        assert!(online_to_batch_bound(1.0, 1.0, 0.0, 3, 0.1, 100, 0.1).is_err());
        assert!(online_to_batch_bound(1.0, 1.0, 0.0, 3, 0.1, 100, 1.0).is_err());
        // noise enters through both the concentration and the variance term
        let noisy = online_to_batch_bound(1.0, 1.0, 0.5, 3, 0.1, 100, theta).unwrap();
        let want = (1.0 + 0.5 * 1.1) * 0.2 + 0.05 + 0.1 * (0.5 + 3.0 * 0.25);
        assert!((noisy - want).abs() < 1e-12);
    }

    #[test]
    fn fixed_permutation_optimization() {
        assert!((persgd_opt_bound(1.0, 1.0, 1, 1, &[1.0], 1.0).unwrap() - 2.0).abs() < 1e-12);
        // constant steps: x1_dist^2 / (2 n K eta) + L^2 (n + 2) eta / 2
        let (r, l, n, k, eta) = (1.5, 2.0, 10usize, 4usize, 0.01);
        let (nk, tail) = (n as f64 * k as f64, l * l * (n as f64 + 2.0) * eta / 2.0);
        let v = persgd_opt_bound(r, l, n, k, &[eta; 4], 2.0 * r).unwrap();
        assert!((v - (2.0 * r * r / (nk * eta) + tail)).abs() < 1e-12);
        let v = persgd_opt_bound(r, l, n, k, &[eta; 4], 2f64.sqrt() * r).unwrap();
        assert!((v - (r * r / (nk * eta) + tail)).abs() < 1e-12);
        assert!(persgd_opt_bound(1.0, 1.0, 1, 2, &[0.0, 0.0], 1.0).is_err());
        assert!(persgd_opt_bound(1.0, 1.0, 1, 2, &[0.1], 1.0).is_err());
        assert!(persgd_opt_bound(1.0, 1.0, 1, 1, &[0.1], 3.0).is_err());
        let small = persgd_opt_bound(1.0, 1.0, 5, 1, &[1e-6], 1.0).unwrap();
        assert!(small > 1e4);
    }
}
