use crate::error::Result;
use crate::losses::{LossOracle, NeighborPair};
use crate::space::{distance, norm};

use super::engine::{add_direction, descend, Recorder, Sampler, Source};
use super::{RunSpec, Trajectory};

/// Two runs of the same algorithm on `S` and `S'` that consumed identical
/// randomness, with per-step stability measurements.
#[derive(Debug, Clone)]
pub struct TrajectoryPair {
    pub on_s: Trajectory,
    pub on_sprime: Trajectory,
    /// `deltas[t - 1] = ||x^t - y^t||` for every iterate.
    pub deltas: Vec<f64>,
    /// `a_ts[t - 1] = ||g_t(x^t) - g'_t(x^t)||` for every step, evaluated at
    /// the `S`-trajectory point.
    pub a_ts: Vec<f64>,
    /// `step_sizes[t - 1] = eta_t` for every step.
    pub step_sizes: Vec<f64>,
    /// First 1-based step whose losses differ between the two runs.
    pub t0: Option<usize>,
    pub lipschitz: f64,
}

impl TrajectoryPair {
    pub fn final_delta(&self) -> f64 {
        *self.deltas.last().expect("at least one iterate")
    }

    /// `||A(S) - A(S')||` for the averaged outputs.
    pub fn output_distance(&self) -> f64 {
        self.on_s.averaged_output.distance(&self.on_sprime.averaged_output)
    }

    /// 1-based steps `t` where
    /// `delta_{t+1}^2 <= delta_t^2 + 4 L^2 eta_t^2 + 2 eta_t a_t delta_t + slack` fails.
    pub fn recurrence_violations(&self, slack: f64) -> Vec<usize> {
        let l = self.lipschitz;
        (0..self.a_ts.len())
            .filter(|&i| {
                let (d, d_next) = (self.deltas[i], self.deltas[i + 1]);
                let (eta, a) = (self.step_sizes[i], self.a_ts[i]);
                d_next * d_next > d * d + 4.0 * l * l * eta * eta + 2.0 * eta * a * d + slack
            })
            .map(|i| i + 1)
            .collect()
    }

    /// `2L sqrt(sum_{s=t0}^{t-1} eta_s^2) + 2 sum_{s=t0+1}^{t-1} eta_s a_s`, the
    /// recurrence's closed-form bound on `delta_t` for 1-based iterate `t`.
    pub fn lemma_bound_at(&self, t: usize) -> f64 {
        let Some(t0) = self.t0 else { return 0.0 };
        if t <= t0 {
            return 0.0;
        }
        let sq: f64 = (t0..t).map(|s| self.step_sizes[s - 1].powi(2)).sum();
        let drift: f64 = (t0 + 1..t).map(|s| self.step_sizes[s - 1] * self.a_ts[s - 1]).sum();
        2.0 * self.lipschitz * sq.sqrt() + 2.0 * drift
    }

    pub fn lemma_bound(&self) -> f64 {
        self.lemma_bound_at(self.deltas.len())
    }

    /// Both runs used the same indices, order and noise.
    pub fn coupling_sound(&self) -> bool {
        self.on_s.sampled_indices == self.on_sprime.sampled_indices
            && self.on_s.permutation == self.on_sprime.permutation
            && self.on_s.noise == self.on_sprime.noise
    }
}

/// Runs `spec` on both datasets of `pair` from the same start, replaying the
/// same randomness, and records `delta_t` and `a_t` at every step.
pub fn run_coupled(spec: &RunSpec, oracle: &LossOracle, pair: &NeighborPair) -> Result<TrajectoryPair> {
    let n = pair.n();
    spec.validate(oracle, n)?;
    oracle.validate_dataset(pair.base())?;
    oracle.validate_point(pair.replacement())?;
    let (s, s_prime) = (pair.base(), pair.neighbor());
    let differs = pair.differs();
    let k = pair.replaced_index();
    let (z, z_prime) = (s.get(k), pair.replacement());

    let mut sampler = Sampler::new(spec, n)?;
    let mut rec_x = Recorder::new(spec, n);
    let mut rec_y = Recorder::new(spec, n);
    let d = spec.dim();
    let mut x = spec.start.clone();
    let mut y = spec.start.clone();
    let (mut gx, mut gy, mut diff) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);

    let steps = spec.steps();
    let mut deltas = Vec::with_capacity(steps + 1);
    let mut a_ts = Vec::with_capacity(steps);
    let mut step_sizes = Vec::with_capacity(steps);
    let mut t0 = None;

    rec_x.push(1, &x);
    rec_y.push(1, &y);
    deltas.push(0.0);
    for t in 1..=steps {
        let source = sampler.draw(t);
        let eta = spec.schedule.eta(t);

        let weight = match source {
            Source::Batch => Some(1.0 / n as f64),
            Source::Point(i) if i == k => Some(1.0),
            Source::Point(_) => None,
        };
        let a_t = match weight {
            Some(w) if differs => {
                if t0.is_none() {
                    t0 = Some(t);
                }
                diff.fill(0.0);
                oracle.add_subgradient(&x, z, w, &mut diff);
                oracle.add_subgradient(&x, z_prime, -w, &mut diff);
                norm(&diff)
            }
            _ => 0.0,
        };

        gx.fill(0.0);
        gy.fill(0.0);
        add_direction(oracle, s, &x, source, &mut gx);
        add_direction(oracle, s_prime, &y, source, &mut gy);
        descend(&mut x, eta, &gx, sampler.noise());
        descend(&mut y, eta, &gy, sampler.noise());
        spec.ball.project_in_place(&mut x);
        spec.ball.project_in_place(&mut y);

        rec_x.push(t + 1, &x);
        rec_y.push(t + 1, &y);
        deltas.push(distance(&x, &y));
        a_ts.push(a_t);
        step_sizes.push(eta);
    }

    Ok(TrajectoryPair {
        on_s: rec_x.finish(x, &sampler),
        on_sprime: rec_y.finish(y, &sampler),
        deltas,
        a_ts,
        step_sizes,
        t0,
        lipschitz: oracle.lipschitz(),
    })
}
