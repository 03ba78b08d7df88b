use std::ops::{Deref, DerefMut};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A point or direction in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// Standard basis vector `e_axis` (zero-based).
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(Vector(self.0.iter().map(|c| c / n).collect()))
    }

    pub fn scaled(&self, k: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * k).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Uniform draw from the unit sphere `S^{d-1}`.
    pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
        loop {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Some(u) = Vector(g).normalized() {
                return u;
            }
        }
    }

    /// Uniform draw from the ball of the given radius.
    pub fn random_in_ball<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Vector {
        let u = Self::random_unit(dim, rng);
        let r: f64 = rng.random::<f64>().powf(1.0 / dim as f64) * radius;
        u.scaled(r)
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

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, scaled to stay finite for large entries.
pub fn norm(a: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = a.iter().map(|c| (c / scale) * (c / scale)).sum();
    scale * s.sqrt()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|c| c * c).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Volume of the Euclidean unit ball `κ_d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // κ_0 = 1, κ_1 = 2, κ_d = 2π/d · κ_{d−2}
    let mut even = 1.0;
    let mut odd = 2.0;
    let mut d = 1;
    while d < dim {
        d += 1;
        if d % 2 == 0 {
            even *= 2.0 * std::f64::consts::PI / d as f64;
        } else {
            odd *= 2.0 * std::f64::consts::PI / d as f64;
        }
    }
    if dim == 0 {
        1.0
    } else if dim % 2 == 0 {
        even
    } else {
        odd
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - pi).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * pi).abs() < 1e-12);
        assert!((unit_ball_volume(4) - pi * pi / 2.0).abs() < 1e-12);
    }

    #[test]
    fn norm_does_not_overflow() {
        let v = vec![1e200; 64];
        assert!((norm(&v) - 8e200).abs() / 8e200 < 1e-12);
    }
}
