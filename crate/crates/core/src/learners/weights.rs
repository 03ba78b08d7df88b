use serde::{Deserialize, Serialize};

use crate::Sign;

/// A normalized weight function over a finite carrier.
///
/// Weights are stored as logarithms normalized so that `Σ exp(log_w) = 1`,
/// which keeps every entry strictly positive however many multiplicative
/// penalties it receives (linear weights would underflow to zero after a
/// thousand or so rounds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightField {
    log_w: Vec<f64>,
}

impl WeightField {
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "weight field needs a nonempty carrier");
        WeightField {
            log_w: vec![-(n as f64).ln(); n],
        }
    }

    /// Field proportional to `w`; every entry must be positive and finite.
    pub fn from_weights(w: &[f64]) -> Option<Self> {
        if w.is_empty() || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return None;
        }
        let mut f = WeightField {
            log_w: w.iter().map(|v| v.ln()).collect(),
        };
        f.normalize();
        Some(f)
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_w[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_w[i].exp()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_w.iter().map(|l| l.exp()).collect()
    }

    pub fn total(&self) -> f64 {
        self.log_w.iter().map(|l| l.exp()).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.log_w
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            .exp()
    }

    fn normalize(&mut self) {
        let top = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self.log_w.iter().map(|l| (l - top).exp()).sum();
        let shift = top + s.ln();
        self.log_w.iter_mut().for_each(|l| *l -= shift);
    }

    /// Multiplies entry `i` by `factor(i)` (positive) and renormalizes.
    pub fn multiply(&mut self, factor: impl Fn(usize) -> f64) {
        for (i, l) in self.log_w.iter_mut().enumerate() {
            let f = factor(i);
            debug_assert!(f > 0.0);
            *l += f.ln();
        }
        self.normalize();
    }

    /// Feedback update over carrier values `values[i] = f_i(x)`: entries with
    /// `σ·(y − f(x)) < 0` are multiplied by `bad`, the others by `good`.
    pub fn update(&mut self, values: &[f64], y: f64, sigma: Sign, bad: f64, good: f64) {
        assert_eq!(values.len(), self.len());
        let s = sigma.value();
        let (lb, lg) = (bad.ln(), good.ln());
        for (l, v) in self.log_w.iter_mut().zip(values) {
            *l += if s * (y - v) < 0.0 { lb } else { lg };
        }
        self.normalize();
    }

    /// Smallest value `m` with at least half the mass at or below it.
    pub fn weighted_median(&self, values: &[f64]) -> f64 {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        let mut acc = 0.0;
        for &i in &order {
            acc += self.weight(i);
            if acc >= 0.5 * (1.0 - 1e-12) {
                return values[i];
            }
        }
        values[*order.last().expect("nonempty carrier")]
    }

    /// Mass of entries with `a ≤ values[i] ≤ b`.
    pub fn mass_between(&self, values: &[f64], a: f64, b: f64) -> f64 {
        values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= a && **v <= b)
            .map(|(i, _)| self.weight(i))
            .sum()
    }

    /// Largest mass of a window `[a, a + width]` over the values; `order` must
    /// sort the carrier by value.
    pub fn max_strip_mass(&self, values: &[f64], order: &[usize], width: f64) -> f64 {
        let w: Vec<f64> = order.iter().map(|&i| self.weight(i)).collect();
        let v: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let mut best = 0.0f64;
        let mut acc = 0.0;
        let mut lo = 0;
        for hi in 0..v.len() {
            acc += w[hi];
            while v[hi] - v[lo] > width {
                acc -= w[lo];
                lo += 1;
            }
            best = best.max(acc);
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atom_update() {
        let mut w = WeightField::uniform(2);
        let p = 1.0 / 3.0;
        // Values 0 and 1, guess 0.5 above the first: σ = −1 says u ≥ 0.5.
        w.update(&[0.0, 1.0], 0.5, Sign::Minus, p, 1.0 - p);
        assert!((w.weight(0) - p).abs() < 1e-15);
        assert!((w.weight(1) - (1.0 - p)).abs() < 1e-15);
        assert!((w.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stays_positive() {
        let mut w = WeightField::uniform(3);
        let vals = [0.0, 0.5, 1.0];
        for _ in 0..5000 {
            w.update(&vals, 0.75, Sign::Minus, 0.25, 0.75);
        }
        assert!(w.log_weight(0).is_finite());
        assert!((w.total() - 1.0).abs() < 1e-9);
        assert!((w.weight(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn medians_and_strips() {
        let w = WeightField::from_weights(&[0.2, 0.2, 0.1, 0.5]).unwrap();
        let v = [0.3, 0.1, 0.2, 0.9];
        assert_eq!(w.weighted_median(&v), 0.3);
        let order = [1, 2, 0, 3];
        assert!((w.max_strip_mass(&v, &order, 0.2) - 0.5).abs() < 1e-12);
        assert!((w.max_strip_mass(&v, &order, 0.05) - 0.5).abs() < 1e-12);
        assert!((w.mass_between(&v, 0.1, 0.3) - 0.5).abs() < 1e-12);
        let u = WeightField::uniform(4);
        assert_eq!(u.weighted_median(&[3.0, 1.0, 2.0, 4.0]), 2.0);
    }
}
