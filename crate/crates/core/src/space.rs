//! Dense vectors and the Euclidean-ball feasible set.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real vector of fixed ambient dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(d: usize) -> Self {
        Vector(vec![0.0; d])
    }

    /// Standard basis vector `e_k` (0-based `k`).
    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = Self::zeros(d);
        v.0[k] = 1.0;
        v
    }

    pub fn from_vec(entries: Vec<f64>) -> Result<Self> {
        let v = Vector(entries);
        v.check_finite("vector")?;
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { what })
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() == d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: d,
                got: self.dim(),
            })
        }
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        distance(&self.0, &other.0)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn fill(&mut self, value: f64) {
        self.0.iter_mut().for_each(|a| *a = value);
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Closed Euclidean ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(
                "radius",
                format!("must be positive and finite, got {radius}"),
            ));
        }
        center.check_finite("ball center")?;
        Ok(Ball { center, radius })
    }

    /// `B(0, radius)` in dimension `d`.
    pub fn centered(d: usize, radius: f64) -> Result<Self> {
        Self::new(Vector::zeros(d), radius)
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &[f64], rel_tol: f64) -> bool {
        distance(x, &self.center) <= self.radius * (1.0 + rel_tol)
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        x.check_finite("projection input")?;
        let mut out = x.clone();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Projection without validation; the caller guarantees a finite input of
    /// the right dimension.
    pub fn project_in_place(&self, x: &mut [f64]) {
        let dist = distance(x, &self.center);
        if dist <= self.radius {
            return;
        }
        let s = self.radius / dist;
        for (xi, ci) in x.iter_mut().zip(self.center.iter()) {
            *xi = ci + s * (*xi - ci);
        }
    }
}
