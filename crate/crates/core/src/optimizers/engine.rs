use crate::error::Result;
use crate::losses::{Dataset, LossOracle};
use crate::rng::RngStream;
use crate::space::Vector;

use super::{Algorithm, NoiseSummary, RunSpec, Trajectory};

const NOISE_STREAM: u64 = 0x6e_6f69_7365;

/// Which loss a step differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Source {
    /// The empirical risk `F_S`.
    Batch,
    /// A single data point, by 0-based index.
    Point(usize),
}

/// Produces the per-step randomness of a run: sampled indices, the epoch
/// order and Gaussian noise. Its output does not depend on the data, so one
/// sampler can drive both sides of a coupled run.
pub(crate) struct Sampler {
    algorithm: Algorithm,
    n: usize,
    order: Vec<usize>,
    rng: RngStream,
    noise_rng: RngStream,
    sigma: f64,
    noise: Vec<f64>,
    pub(crate) summary: NoiseSummary,
    pub(crate) indices: Vec<usize>,
}

impl Sampler {
    pub(crate) fn new(spec: &RunSpec, n: usize) -> Result<Self> {
        let mut rng = spec.rng.clone();
        // noise has its own stream so the index sequence does not depend on sigma
        let noise_rng = spec.rng.substream(NOISE_STREAM);
        let order = match spec.algorithm {
            Algorithm::Persgd => spec.permutation.resolve(n, &mut rng)?,
            _ => Vec::new(),
        };
        let (sigma, noise) = match spec.algorithm {
            Algorithm::Nsgd => (spec.sigma.unwrap_or(0.0), vec![0.0; spec.dim()]),
            _ => (0.0, Vec::new()),
        };
        Ok(Sampler {
            algorithm: spec.algorithm,
            n,
            order,
            rng,
            noise_rng,
            sigma,
            noise,
            summary: NoiseSummary::default(),
            indices: Vec::new(),
        })
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// Randomness for 1-based step `t`.
    pub(crate) fn draw(&mut self, t: usize) -> Source {
        match self.algorithm {
            Algorithm::Gd => Source::Batch,
            Algorithm::Rsgd => {
                let i = self.rng.index(self.n);
                self.indices.push(i);
                Source::Point(i)
            }
            Algorithm::Persgd => {
                let i = self.order[(t - 1) % self.n];
                self.indices.push(i);
                Source::Point(i)
            }
            Algorithm::Nsgd => {
                let i = self.rng.index(self.n);
                self.indices.push(i);
                self.noise_rng.fill_gaussian(&mut self.noise, self.sigma);
                self.summary.draws += 1;
                self.summary.sum_sq += self.noise.iter().map(|v| v * v).sum::<f64>();
                self.summary.checksum += self.noise.iter().sum::<f64>();
                Source::Point(i)
            }
        }
    }

    pub(crate) fn noise(&self) -> Option<&[f64]> {
        (self.algorithm == Algorithm::Nsgd).then_some(self.noise.as_slice())
    }
}

pub(crate) fn add_direction(oracle: &LossOracle, s: &Dataset, x: &[f64], source: Source, out: &mut [f64]) {
    match source {
        Source::Batch => oracle.add_empirical_subgradient(s, x, out),
        Source::Point(i) => oracle.add_subgradient(x, s.get(i), 1.0, out),
    }
}

/// `x <- x - eta (g + noise)`, then the caller projects.
pub(crate) fn descend(x: &mut [f64], eta: f64, g: &[f64], noise: Option<&[f64]>) {
    match noise {
        Some(noise) => {
            for ((xi, gi), ni) in x.iter_mut().zip(g).zip(noise) {
                *xi -= eta * (gi + ni);
            }
        }
        None => {
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi -= eta * gi;
            }
        }
    }
}

/// Weight of 1-based iterate `t` in the algorithm's averaged output.
pub(crate) fn output_weight(spec: &RunSpec, n: usize, t: usize) -> f64 {
    match spec.algorithm {
        Algorithm::Gd | Algorithm::Rsgd => spec.schedule.eta(t),
        Algorithm::Nsgd => 1.0,
        Algorithm::Persgd => {
            // epoch-start iterates x_1^k = x^{(k-1)n+1}, weighted by the epoch's step sum
            if (t - 1).is_multiple_of(n) && t <= spec.iterations {
                let k = (t - 1) / n + 1;
                spec.schedule.sum((k - 1) * n + 1, k * n)
            } else {
                0.0
            }
        }
    }
}

/// Accumulates stored iterates, the weighted output and feasibility.
pub(crate) struct Recorder<'a> {
    spec: &'a RunSpec,
    n: usize,
    iterates: Vec<Vector>,
    truncated: bool,
    weighted: Vec<f64>,
    total_weight: f64,
    feasible: bool,
    count: usize,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(spec: &'a RunSpec, n: usize) -> Self {
        Recorder {
            spec,
            n,
            iterates: Vec::new(),
            truncated: false,
            weighted: vec![0.0; spec.dim()],
            total_weight: 0.0,
            feasible: true,
            count: 0,
        }
    }

    /// Records 1-based iterate `t`.
    pub(crate) fn push(&mut self, t: usize, x: &[f64]) {
        self.count += 1;
        if self.iterates.len() < self.spec.storage_cap {
            self.iterates.push(Vector::from(x.to_vec()));
        } else {
            self.truncated = true;
        }
        if !self.spec.ball.contains(x, 1e-12) {
            self.feasible = false;
        }
        let w = output_weight(self.spec, self.n, t);
        if w != 0.0 {
            for (a, b) in self.weighted.iter_mut().zip(x) {
                *a += w * b;
            }
            self.total_weight += w;
        }
    }

    pub(crate) fn finish(self, final_iterate: Vector, sampler: &Sampler) -> Trajectory {
        let averaged_output = if self.total_weight > 0.0 {
            let mut v = Vector::from(self.weighted);
            v.scale(1.0 / self.total_weight);
            v
        } else {
            // every weight vanished (all step sizes zero): nothing moved
            self.spec.start.clone()
        };
        Trajectory {
            algorithm: self.spec.algorithm,
            iterates: self.iterates,
            truncated: self.truncated,
            num_iterates: self.count,
            final_iterate,
            averaged_output,
            permutation: sampler.order().to_vec(),
            sampled_indices: sampler.indices.clone(),
            noise: sampler.summary,
            feasible: self.feasible,
        }
    }
}

pub(crate) fn run_single(spec: &RunSpec, oracle: &LossOracle, s: &Dataset) -> Result<Trajectory> {
    let n = s.len();
    let mut sampler = Sampler::new(spec, n)?;
    let mut recorder = Recorder::new(spec, n);
    let mut x = spec.start.clone();
    let mut g = vec![0.0; spec.dim()];
    recorder.push(1, &x);
    for t in 1..=spec.steps() {
        let source = sampler.draw(t);
        g.fill(0.0);
        add_direction(oracle, s, &x, source, &mut g);
        descend(&mut x, spec.schedule.eta(t), &g, sampler.noise());
        spec.ball.project_in_place(&mut x);
        recorder.push(t + 1, &x);
    }
    Ok(recorder.finish(x, &sampler))
}
