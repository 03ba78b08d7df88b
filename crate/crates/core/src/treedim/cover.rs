use super::FiniteClass;

/// Default radii for [`cdim_estimate`].
pub const DEFAULT_EPS_GRID: [f64; 5] = [0.5, 0.25, 0.125, 0.0625, 0.03125];

/// Size of a greedy cover of the class by closed `d∞` balls of radius `eps`
/// centred at members.
pub fn greedy_cover(class: &FiniteClass, eps: f64) -> usize {
    let n = class.len();
    let near: Vec<Vec<bool>> = (0..n)
        .map(|c| (0..n).map(|g| class.distance(c, g) <= eps).collect())
        .collect();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut centres = 0;
    while left > 0 {
        let gain = |c: usize| (0..n).filter(|&g| near[c][g] && !covered[g]).count();
        let mut best = 0;
        let mut best_gain = gain(0);
        for c in 1..n {
            let g = gain(c);
            if g > best_gain {
                best = c;
                best_gain = g;
            }
        }
        for g in 0..n {
            if near[best][g] && !covered[g] {
                covered[g] = true;
                left -= 1;
            }
        }
        centres += 1;
    }
    centres
}

/// `max over ε of log N_ε / log(1/ε)`, with `N_ε` from a greedy cover.
///
/// Greedy covers overshoot the smallest cover, so this is an estimate from
/// above rather than the covering dimension itself.
pub fn cdim_estimate(class: &FiniteClass, grid: &[f64]) -> f64 {
    grid.iter()
        .filter(|e| **e > 0.0 && **e < 1.0)
        .map(|&e| (greedy_cover(class, e) as f64).ln() / (1.0 / e).ln())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treedim::all_functions;

    #[test]
    fn boolean_cube_has_dimension_three() {
        let c = all_functions(3, &[0.0, 1.0]);
        assert_eq!(greedy_cover(&c, 0.5), 8);
        assert!((cdim_estimate(&c, &DEFAULT_EPS_GRID) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_hypothesis_is_zero() {
        let c = FiniteClass::new(vec![0.0], vec![vec![0]], None).unwrap();
        assert_eq!(cdim_estimate(&c, &DEFAULT_EPS_GRID), 0.0);
    }

    #[test]
    fn cover_of_a_chain() {
        // Distances 0.1 apart: radius 0.1 balls centred at members cover
        // three points each.
        let c = FiniteClass::new(
            vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            (0..6).map(|h| vec![h]).collect(),
            None,
        )
        .unwrap();
        assert_eq!(greedy_cover(&c, 0.1 + 1e-12), 2);
        assert_eq!(greedy_cover(&c, 1.0), 1);
    }
}
