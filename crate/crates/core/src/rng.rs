//! Seeded randomness shared by every algorithm and experiment.
//!
//! A stream is identified by `(seed, stream_id)`; two streams built from the
//! same pair produce bit-identical draws on every platform (ChaCha8).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::space::Vector;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream for sub-task `index` (e.g. a trial), independent of the
    /// parent's consumption state.
    pub fn substream(&self, index: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1)));
        RngStream::new(self.seed, id)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        self.rng.random_range(low..high)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut self.rng);
        p
    }

    /// `d` i.i.d. draws from N(0, sigma^2).
    pub fn gaussian_vector(&mut self, d: usize, sigma: f64) -> Result<Vector> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        let mut v = Vector::zeros(d);
        self.fill_gaussian(&mut v, sigma);
        Ok(v)
    }

    /// Fills `out` with N(0, sigma^2) draws. Consumes `out.len()` normals even
    /// when `sigma == 0` so that the stream position does not depend on sigma.
    pub(crate) fn fill_gaussian(&mut self, out: &mut [f64], sigma: f64) {
        for o in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *o = sigma * z;
        }
    }
}

/// Free-function form of [`RngStream::gaussian_vector`].
pub fn gaussian_vector(rng: &mut RngStream, d: usize, sigma: f64) -> Result<Vector> {
    rng.gaussian_vector(d, sigma)
}
