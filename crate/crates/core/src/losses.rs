//! Convex Lipschitz loss oracles with a deterministic subgradient selection
//! rule, datasets, and neighboring-dataset pairs.
//!
//! Every piecewise-max loss exposes its branches in a fixed order and the
//! oracle returns the gradient of the lowest-index branch attaining the max.
//! Comparisons are exact (tolerance 0): a later branch is selected only when it
//! is strictly larger than every earlier one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::space::{dot, Ball, Vector};

/// A single data point `z`. The tag's meaning depends on the loss family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint(pub f64);

impl DataPoint {
    pub fn tag(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset { points })
    }

    pub fn from_tags(tags: &[f64]) -> Result<Self> {
        Self::new(tags.iter().map(|&t| DataPoint(t)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn get(&self, i: usize) -> DataPoint {
        self.points[i]
    }
}

/// Two datasets `S` and `S'` that differ only at `replaced_index` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    base: Dataset,
    neighbor: Dataset,
    replaced_index: usize,
    replacement: DataPoint,
}

impl NeighborPair {
    pub fn new(base: Dataset, replaced_index: usize, replacement: DataPoint) -> Result<Self> {
        let n = base.len();
        if replaced_index >= n {
            return Err(Error::IndexOutOfRange {
                index: replaced_index,
                n,
            });
        }
        let mut points = base.points.clone();
        points[replaced_index] = replacement;
        let neighbor = Dataset { points };
        Ok(NeighborPair {
            base,
            neighbor,
            replaced_index,
            replacement,
        })
    }

    /// `S`.
    pub fn base(&self) -> &Dataset {
        &self.base
    }

    /// `S'`.
    pub fn neighbor(&self) -> &Dataset {
        &self.neighbor
    }

    pub fn replaced_index(&self) -> usize {
        self.replaced_index
    }

    pub fn replacement(&self) -> DataPoint {
        self.replacement
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    /// Whether `S` and `S'` actually differ.
    pub fn differs(&self) -> bool {
        self.base.get(self.replaced_index) != self.replacement
    }
}

/// Parameters of the adversarial max loss used by the lower-bound instances:
///
/// ```text
/// f(x, 0) = max{0, x_1 - nu, ..., x_D - nu}
/// f(x, 1) = <r, x> / kappa,   r = (-1, ..., -1, 0, ..., 0)  (D ones)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialMaxLoss {
    active_dim: usize,
    nu: f64,
    kappa: f64,
}

impl AdversarialMaxLoss {
    pub fn new(active_dim: usize, nu: f64, kappa: f64) -> Result<Self> {
        if active_dim == 0 {
            return Err(Error::invalid("active_dim", "must be at least 1"));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid("nu", format!("must be positive, got {nu}")));
        }
        let min_kappa = (active_dim as f64).sqrt();
        if !(kappa.is_finite() && kappa >= min_kappa) {
            return Err(Error::invalid(
                "kappa",
                format!("must be >= sqrt(D) = {min_kappa}, got {kappa}"),
            ));
        }
        Ok(AdversarialMaxLoss { active_dim, nu, kappa })
    }

    /// Instance parameters for step size `eta`, sample size `n` and horizon
    /// `iterations`: `D = min(T, floor(1/eta^2))`, `kappa = max(sqrt D, 100 T sqrt D)`,
    /// `nu = eta / (2 n kappa)`.
    pub fn for_instance(eta: f64, n: usize, iterations: usize) -> Result<Self> {
        let active_dim = lower_bound_dimension(eta, iterations)?;
        let root = (active_dim as f64).sqrt();
        let kappa = root.max(100.0 * iterations as f64 * root);
        let nu = eta / (2.0 * n as f64 * kappa);
        Self::new(active_dim, nu, kappa)
    }

    pub fn active_dim(&self) -> usize {
        self.active_dim
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// The drift vector `r` in ambient dimension `d`.
    pub fn drift(&self, d: usize) -> Vector {
        let mut r = Vector::zeros(d);
        r[..self.active_dim].fill(-1.0);
        r
    }
}

/// `min(T, floor(1/eta^2))`, guarding against `1/0.1^2 = 99.999...` rounding.
pub fn lower_bound_dimension(eta: f64, iterations: usize) -> Result<usize> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    let inv = 1.0 / (eta * eta);
    let inv_floor = (inv * (1.0 + 1e-12)).floor();
    let cap = if inv_floor >= usize::MAX as f64 {
        usize::MAX
    } else {
        inv_floor as usize
    };
    Ok(iterations.min(cap).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossFamily {
    /// Lower-bound construction; tags in {0, 1}.
    AdversarialMax(AdversarialMaxLoss),
    /// `max(0, 1 - z x_1)`, tags in [-1, 1].
    Hinge,
    /// `|x_1 - z|`, any finite tag.
    AbsoluteDeviation,
    /// `z <w, x>`, tags in [-1, 1].
    Linear { direction: Vector },
}

impl LossFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LossFamily::AdversarialMax(_) => "adversarial-max",
            LossFamily::Hinge => "hinge",
            LossFamily::AbsoluteDeviation => "absolute-deviation",
            LossFamily::Linear { .. } => "linear",
        }
    }
}

/// A loss family `f(., z)` on R^d, scaled by a positive factor.
///
/// The Lipschitz constant is `scale` for the adversarial, hinge and
/// absolute-deviation families and `scale * ||w||` for the linear family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossOracle {
    family: LossFamily,
    dim: usize,
    scale: f64,
}

impl LossOracle {
    pub fn new(family: LossFamily, dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
        }
        match &family {
            LossFamily::AdversarialMax(adv) if adv.active_dim > dim => {
                return Err(Error::precondition(
                    "d >= min{T, 1/eta^2}",
                    format!("active dimension {} exceeds ambient dimension {dim}", adv.active_dim),
                ));
            }
            LossFamily::Linear { direction } => {
                direction.check_dim(dim)?;
                direction.check_finite("linear direction")?;
            }
            _ => {}
        }
        Ok(LossOracle { family, dim, scale })
    }

    pub fn adversarial(loss: AdversarialMaxLoss, dim: usize) -> Result<Self> {
        Self::new(LossFamily::AdversarialMax(loss), dim, 1.0)
    }

    pub fn hinge(dim: usize) -> Result<Self> {
        Self::new(LossFamily::Hinge, dim, 1.0)
    }

    pub fn absolute_deviation(dim: usize) -> Result<Self> {
        Self::new(LossFamily::AbsoluteDeviation, dim, 1.0)
    }

    pub fn linear(direction: Vector) -> Result<Self> {
        let d = direction.dim();
        Self::new(LossFamily::Linear { direction }, d, 1.0)
    }

    pub fn family(&self) -> &LossFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        match &self.family {
            LossFamily::Linear { direction } => self.scale * direction.norm(),
            _ => self.scale,
        }
    }

    pub fn validate_point(&self, z: DataPoint) -> Result<()> {
        let t = z.tag();
        let ok = t.is_finite()
            && match self.family {
                LossFamily::AdversarialMax(_) => t == 0.0 || t == 1.0,
                LossFamily::Hinge | LossFamily::Linear { .. } => (-1.0..=1.0).contains(&t),
                LossFamily::AbsoluteDeviation => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDataPoint {
                family: self.family.name(),
                tag: t,
            })
        }
    }

    pub fn validate_dataset(&self, s: &Dataset) -> Result<()> {
        s.points().iter().try_for_each(|&z| self.validate_point(z))
    }

    fn check(&self, x: &[f64], z: DataPoint) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "loss argument" });
        }
        self.validate_point(z)
    }

    pub fn eval(&self, x: &[f64], z: DataPoint) -> Result<f64> {
        self.check(x, z)?;
        Ok(self.eval_unchecked(x, z))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], z: DataPoint) -> f64 {
        let t = z.tag();
        let raw = match &self.family {
            LossFamily::AdversarialMax(adv) => {
                if t == 1.0 {
                    -x[..adv.active_dim].iter().sum::<f64>() / adv.kappa
                } else {
                    x[..adv.active_dim].iter().fold(0.0f64, |m, &xi| m.max(xi - adv.nu))
                }
            }
            LossFamily::Hinge => (1.0 - t * x[0]).max(0.0),
            LossFamily::AbsoluteDeviation => (x[0] - t).abs(),
            LossFamily::Linear { direction } => t * dot(direction, x),
        };
        self.scale * raw
    }

    pub fn subgradient(&self, x: &[f64], z: DataPoint) -> Result<Vector> {
        self.check(x, z)?;
        let mut g = Vector::zeros(self.dim);
        self.add_subgradient(x, z, 1.0, &mut g);
        Ok(g)
    }

    /// `out += weight * g(x, z)` where `g` is the selected extreme-point
    /// subgradient.
    pub(crate) fn add_subgradient(&self, x: &[f64], z: DataPoint, weight: f64, out: &mut [f64]) {
        let t = z.tag();
        let w = weight * self.scale;
        match &self.family {
            LossFamily::AdversarialMax(adv) => {
                if t == 1.0 {
                    let c = -w / adv.kappa;
                    out[..adv.active_dim].iter_mut().for_each(|o| *o += c);
                } else if let Some(k) = adversarial_active_branch(&x[..adv.active_dim], adv.nu) {
                    out[k] += w;
                }
            }
            LossFamily::Hinge => {
                if 1.0 - t * x[0] > 0.0 {
                    out[0] -= w * t;
                }
            }
            LossFamily::AbsoluteDeviation => {
                // branches: [x_1 - z, z - x_1]
                if t - x[0] > x[0] - t {
                    out[0] -= w;
                } else {
                    out[0] += w;
                }
            }
            LossFamily::Linear { direction } => {
                for (o, d) in out.iter_mut().zip(direction.iter()) {
                    *o += w * t * d;
                }
            }
        }
    }

    pub fn empirical_risk(&self, s: &Dataset, x: &[f64]) -> Result<f64> {
        if s.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for &z in s.points() {
            total += self.eval(x, z)?;
        }
        Ok(total / s.len() as f64)
    }

    pub(crate) fn empirical_risk_unchecked(&self, s: &Dataset, x: &[f64]) -> f64 {
        s.points().iter().map(|&z| self.eval_unchecked(x, z)).sum::<f64>() / s.len() as f64
    }

    pub fn empirical_risk_subgradient(&self, s: &Dataset, x: &[f64]) -> Result<Vector> {
        if s.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for &z in s.points() {
            self.check(x, z)?;
        }
        let mut g = Vector::zeros(self.dim);
        self.add_empirical_subgradient(s, x, &mut g);
        Ok(g)
    }

    pub(crate) fn add_empirical_subgradient(&self, s: &Dataset, x: &[f64], out: &mut [f64]) {
        let w = 1.0 / s.len() as f64;
        for &z in s.points() {
            self.add_subgradient(x, z, w, out);
        }
    }

    /// A data point drawn at random from the family's natural tag range.
    pub fn random_point(&self, rng: &mut RngStream) -> DataPoint {
        match self.family {
            LossFamily::AdversarialMax(_) => DataPoint(if rng.bernoulli(0.5) { 1.0 } else { 0.0 }),
            LossFamily::Hinge => DataPoint(if rng.bernoulli(0.5) { 1.0 } else { -1.0 }),
            LossFamily::AbsoluteDeviation => DataPoint(rng.uniform(-2.0, 2.0)),
            LossFamily::Linear { .. } => DataPoint(rng.uniform(-1.0, 1.0)),
        }
    }

    /// Exact empirical risk minimizer over `ball` when the family admits one
    /// in closed form.
    pub fn closed_form_erm(&self, s: &Dataset, ball: &Ball) -> Option<Vector> {
        let c = ball.center();
        let r = ball.radius();
        let (lo, hi) = (c[0] - r, c[0] + r);
        match &self.family {
            LossFamily::AbsoluteDeviation => {
                let mut tags: Vec<f64> = s.points().iter().map(|z| z.tag()).collect();
                tags.sort_by(f64::total_cmp);
                let n = tags.len();
                let median = if n % 2 == 1 {
                    tags[n / 2]
                } else {
                    0.5 * (tags[n / 2 - 1] + tags[n / 2])
                };
                let mut x = c.clone();
                x[0] = median.clamp(lo, hi);
                Some(x)
            }
            LossFamily::Hinge => {
                let mut candidates = vec![lo, hi];
                candidates.extend(
                    s.points()
                        .iter()
                        .filter(|z| z.tag() != 0.0)
                        .map(|z| (1.0 / z.tag()).clamp(lo, hi)),
                );
                let mut x = c.clone();
                let best = candidates
                    .into_iter()
                    .map(|v| {
                        x[0] = v;
                        (v, self.empirical_risk_unchecked(s, &x))
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1))?;
                x[0] = best.0;
                Some(x)
            }
            LossFamily::Linear { direction } => {
                let mean = s.points().iter().map(|z| z.tag()).sum::<f64>() / s.len() as f64;
                let mut x = c.clone();
                let g = mean * direction.norm();
                if g != 0.0 {
                    x.axpy(-r * mean.signum() / direction.norm(), direction);
                }
                Some(x)
            }
            LossFamily::AdversarialMax(_) => None,
        }
    }
}

/// Index of the active coordinate branch of `max{0, x_k - nu}`, or `None`
/// when the constant branch wins (including ties with it).
fn adversarial_active_branch(x: &[f64], nu: f64) -> Option<usize> {
    let mut best = 0.0;
    let mut arg = None;
    for (k, &xk) in x.iter().enumerate() {
        let v = xk - nu;
        if v > best {
            best = v;
            arg = Some(k);
        }
    }
    arg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// `S = (1, 0, ..., 0)`, `S' = (0, ..., 0)`.
    LowerBound,
    /// `S` drawn i.i.d. from the oracle's tag range, one uniformly chosen index
    /// replaced by a fresh draw.
    Random { seed: u64 },
}

pub fn make_neighbor_pair(kind: PairKind, oracle: &LossOracle, n: usize) -> Result<NeighborPair> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    match kind {
        PairKind::LowerBound => lower_bound_pair(n),
        PairKind::Random { seed } => random_pair(oracle, n, &mut RngStream::new(seed, 0)),
    }
}

pub fn lower_bound_pair(n: usize) -> Result<NeighborPair> {
    let mut tags = vec![0.0; n];
    tags[0] = 1.0;
    NeighborPair::new(Dataset::from_tags(&tags)?, 0, DataPoint(0.0))
}

pub fn random_pair(oracle: &LossOracle, n: usize, rng: &mut RngStream) -> Result<NeighborPair> {
    let points: Vec<DataPoint> = (0..n).map(|_| oracle.random_point(rng)).collect();
    let base = Dataset::new(points)?;
    let index = rng.index(n);
    let replacement = oracle.random_point(rng);
    NeighborPair::new(base, index, replacement)
}
