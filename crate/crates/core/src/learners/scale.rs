use serde::{Deserialize, Serialize};

/// Scale chosen for a round: index, the width bucket `(lo, hi]` it covers and
/// the inflation radius or net scale `z` used at that index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleIndex {
    pub i: i32,
    pub bucket_lo: f64,
    pub bucket_hi: f64,
    pub z: f64,
}

/// Largest `i ≥ lowest` with `width ≤ bound(i)` for a strictly decreasing
/// `bound`; `None` when even `bound(lowest)` is exceeded. Capped at `highest`.
fn largest_index(width: f64, lowest: i32, highest: i32, bound: impl Fn(i32) -> f64) -> Option<i32> {
    if width > bound(lowest) {
        return None;
    }
    let mut i = lowest;
    while i < highest && width <= bound(i + 1) {
        i += 1;
    }
    Some(i)
}

/// Index for the symmetric-loss learner: the largest `i ≥ −1` with
/// `width ≤ 2^{−i}`, and `z_i = 2^{−i}/(8d)`.
pub fn symmetric_scale(width: f64, d: usize) -> ScaleIndex {
    let b = |i: i32| 2f64.powi(-i);
    let i = largest_index(width, -1, 1000, b).unwrap_or(-1);
    ScaleIndex {
        i,
        bucket_lo: b(i + 1),
        bucket_hi: b(i),
        z: b(i) / (8.0 * d as f64),
    }
}

/// Index for the pricing learner: the largest `i ≥ 0` with
/// `width ≤ 2^{−2^i}`, clamped to 0 above 1/2, and `z_i = 2^{−3·2^i}/(16d)`.
pub fn pricing_scale(width: f64, d: usize) -> ScaleIndex {
    let b = |i: i32| 2f64.powf(-(2f64.powi(i)));
    let i = largest_index(width, 0, 10, b).unwrap_or(0);
    ScaleIndex {
        i,
        bucket_lo: b(i + 1),
        bucket_hi: if i == 0 { f64::INFINITY } else { b(i) },
        z: 2f64.powf(-3.0 * 2f64.powi(i)) / (16.0 * d as f64),
    }
}

/// Median fraction `2^{−2^{i−1}}` of the pricing learner (`2^{−1/2}` at 0).
pub fn pricing_fraction(i: i32) -> f64 {
    2f64.powf(-(2f64.powi(i - 1)))
}

/// Index for the general multi-scale learner: the largest `i ≥ 0` with
/// `width ≤ 10·2^{−i}` (0 for wider sets), capped at `max_index`; `z` is
/// filled in by the caller's ladder.
pub fn general_scale(width: f64, max_index: i32, z: impl Fn(i32) -> f64) -> ScaleIndex {
    let b = |i: i32| 10.0 * 2f64.powi(-i);
    let i = largest_index(width, 0, max_index, b).unwrap_or(0);
    ScaleIndex {
        i,
        bucket_lo: if i == max_index { 0.0 } else { b(i + 1) },
        bucket_hi: if i == 0 { f64::INFINITY } else { b(i) },
        z: z(i),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_indices() {
        let s = symmetric_scale(2.0, 2);
        assert_eq!(s.i, -1);
        assert!((s.z - 0.125).abs() < 1e-15);
        let s = symmetric_scale(0.3, 2);
        assert_eq!(s.i, 1);
        assert!((s.z - 1.0 / 32.0).abs() < 1e-15);
        assert!(s.bucket_lo < 0.3 && 0.3 <= s.bucket_hi);
        assert_eq!(symmetric_scale(0.5, 2).i, 1);
        assert_eq!(symmetric_scale(1.0, 2).i, 0);
    }

    #[test]
    fn pricing_indices() {
        let s = pricing_scale(0.2, 2);
        assert_eq!(s.i, 1);
        assert!((s.z - 1.0 / 2048.0).abs() < 1e-18);
        assert_eq!(pricing_scale(0.9, 2).i, 0);
        assert_eq!(pricing_scale(0.26, 2).i, 0);
        assert_eq!(pricing_scale(0.25, 2).i, 1);
        assert_eq!(pricing_scale(2f64.powi(-4), 2).i, 2);
        assert!((pricing_fraction(0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((pricing_fraction(1) - 0.5).abs() < 1e-15);
        assert!((pricing_fraction(3) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn general_indices() {
        let s = general_scale(2.0, 30, |i| 2f64.powi(-(i + 3)));
        assert_eq!(s.i, 2);
        assert!(s.bucket_lo < 2.0 && 2.0 <= s.bucket_hi);
        assert_eq!(general_scale(11.0, 30, |_| 0.0).i, 0);
        assert_eq!(general_scale(0.0, 30, |_| 0.0).i, 30);
    }
}
