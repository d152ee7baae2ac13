//! Dense real vectors with dimension-checked arithmetic.

use crate::error::{check_dim, Error, Result};
use std::ops::Index;

#[derive(Clone, Debug, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting non-finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let v = Vector(coords);
        v.check_finite()?;
        Ok(v)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.0.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical("non-finite coordinate".into()))
        }
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|c| s * c).collect())
    }

    /// Returns `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Vector) -> Result<Vector> {
        check_dim(self.dim(), other.dim())?;
        Ok(Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.add_scaled(-1.0, other)
    }

    /// In-place `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Vector) -> Result<()> {
        check_dim(self.dim(), other.dim())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
        Ok(())
    }

    /// Unit vector in the direction of `self`; `DegenerateStep` for the zero vector.
    pub fn normalized(&self) -> Result<Vector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateStep);
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Clamps negative coordinates to zero.
    pub fn clamp_nonnegative(&mut self) {
        for c in &mut self.0 {
            if *c < 0.0 {
                *c = 0.0;
            }
        }
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

/// Dot product of two equal-length slices, accumulated in four fixed lanes
/// so the result is deterministic for a given length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0_f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
