use std::collections::BTreeSet;

use rand::{Rng, RngCore};

use super::FiniteClass;

/// Every function from `n` contexts to `outcomes`, with `|·|` loss.
///
/// Hypothesis `h` takes outcome `(h / k^x) mod k` at context `x`, where
/// `k = outcomes.len()`.
pub fn all_functions(n: usize, outcomes: &[f64]) -> FiniteClass {
    let k = outcomes.len();
    let count = k.pow(n as u32);
    let table = (0..count)
        .map(|h| (0..n).map(|x| (h / k.pow(x as u32)) % k).collect())
        .collect();
    FiniteClass::new(outcomes.to_vec(), table, None).expect("well-formed class")
}

/// `f_i(x) = 1{x = i}` for `i < n`, with `|·|` loss.
pub fn indicators(n: usize) -> FiniteClass {
    let table = (0..n)
        .map(|i| (0..n).map(|x| usize::from(x == i)).collect())
        .collect();
    FiniteClass::new(vec![0.0, 1.0], table, None).expect("well-formed class")
}

/// `f:[n] → {0, 1/n, …, (n−1)/n}`, `10n` of them drawn at random (all of
/// them when there are fewer), with `|·|` loss.
///
/// Hypothesis `h` is shifted by `(h + 1) / ((10n + 1) n³)`, so two members
/// never share a value at any context.
pub fn separation_fixture(n: usize, rng: &mut dyn RngCore) -> FiniteClass {
    assert!(n >= 2, "separation fixture needs n >= 2");
    let want = 10 * n;
    let total = (n as f64).powi(n as i32);
    let mut rows: Vec<Vec<usize>> = Vec::new();
    if total <= want as f64 {
        rows = (0..n.pow(n as u32))
            .map(|h| (0..n).map(|x| (h / n.pow(x as u32)) % n).collect())
            .collect();
    } else {
        let mut seen = BTreeSet::new();
        while rows.len() < want {
            let row: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            if seen.insert(row.clone()) {
                rows.push(row);
            }
        }
    }
    let scale = ((want + 1) * n.pow(3)) as f64;
    let values: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(h, row)| {
            let shift = (h + 1) as f64 / scale;
            row.iter().map(|&k| k as f64 / n as f64 + shift).collect()
        })
        .collect();
    let table = crate::hypothesis::FiniteTable {
        contexts: (0..n).map(|x| serde_json::Value::from(x as u64)).collect(),
        values,
    };
    FiniteClass::from_table(&table).expect("well-formed class")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn all_functions_layout() {
        let c = all_functions(2, &[0.0, 1.0]);
        assert_eq!(
            c.table,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]
        );
    }

    #[test]
    fn separation_members_differ_everywhere() {
        for n in [2, 3, 4, 8] {
            let c = separation_fixture(n, &mut stream(7, 0));
            assert_eq!(c.len(), (10 * n).min(n.pow(n as u32)));
            for x in 0..n {
                let mut seen: Vec<usize> = (0..c.len()).map(|h| c.at(h, x)).collect();
                seen.sort();
                seen.dedup();
                assert_eq!(seen.len(), c.len());
            }
            for h in 0..c.len() {
                for x in 0..n {
                    let base = (c.value(h, x) * n as f64).floor() / n as f64;
                    let shift = c.value(h, x) - base;
                    assert!(shift > 0.0 && shift <= 1.0 / (n as f64).powi(3));
                }
            }
        }
    }
}
