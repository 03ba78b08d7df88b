use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{EnvironmentError, Result};

/// `ℓ(y, u) = u − y·1{y ≤ u}`: a sale earns the price, a refusal loses the
/// whole value.
pub fn pricing_loss(y: f64, u: f64) -> f64 {
    if y <= u {
        u - y
    } else {
        u
    }
}

/// Loss over a finite outcome set given as a matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub outcomes: Vec<f64>,
    /// `matrix[a][b] = ℓ(outcomes[a], outcomes[b])`.
    pub matrix: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn new(outcomes: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 || matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(EnvironmentError::InvalidLoss(format!(
                "metric table must be {n}×{n}"
            )));
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EnvironmentError::InvalidLoss(
                "non-finite metric entry".into(),
            ));
        }
        Ok(MetricTable { outcomes, matrix })
    }

    /// Index of the outcome nearest `y`.
    pub fn index(&self, y: f64) -> usize {
        let mut best = 0;
        for (i, o) in self.outcomes.iter().enumerate() {
            if (o - y).abs() < (self.outcomes[best] - y).abs() {
                best = i;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFunction {
    Symmetric,
    Pricing,
    /// `|y − u|^α`, a metric for `0 < α ≤ 1`.
    Power {
        alpha: f64,
    },
    /// Values are snapped to the nearest outcome before the lookup.
    Table(MetricTable),
}

impl LossFunction {
    pub fn name(&self) -> &'static str {
        match self {
            LossFunction::Symmetric => "symmetric",
            LossFunction::Pricing => "pricing",
            LossFunction::Power { .. } => "power",
            LossFunction::Table(_) => "table",
        }
    }

    /// `ℓ(y, u)` for guess `y` and hidden value `u`.
    pub fn eval(&self, y: f64, u: f64) -> f64 {
        match self {
            LossFunction::Symmetric => (y - u).abs(),
            LossFunction::Pricing => pricing_loss(y, u),
            LossFunction::Power { alpha } => (y - u).abs().powf(*alpha),
            LossFunction::Table(t) => t.matrix[t.index(y)][t.index(u)],
        }
    }

    /// Samples triples and checks reflexivity, symmetry, the triangle
    /// inequality, order consistency and continuity.
    ///
    /// Triples are drawn from `[−1, 1]`, or from the outcomes of a table
    /// (where continuity is vacuous).
    pub fn check_axioms(&self, samples: usize, rng: &mut dyn RngCore) -> AxiomReport {
        const TOL: f64 = 1e-12;
        const STEP: f64 = 1e-9;
        const JUMP: f64 = 1e-3;
        let table = match self {
            LossFunction::Table(t) => Some(t),
            _ => None,
        };
        let draw = |rng: &mut dyn RngCore| match table {
            Some(t) => t.outcomes[rng.random_range(0..t.outcomes.len())],
            None => rng.random_range(-1.0..=1.0),
        };
        let mut report = AxiomReport {
            samples,
            axioms: Axiom::ALL
                .iter()
                .map(|&axiom| AxiomResult {
                    axiom,
                    violations: 0,
                    worst: 0.0,
                    example: None,
                })
                .collect(),
        };
        let l = |a: f64, b: f64| self.eval(a, b);
        for _ in 0..samples {
            let (a, b, c) = (draw(rng), draw(rng), draw(rng));
            let mut s = [a, b, c];
            s.sort_by(f64::total_cmp);
            let [lo, mid, hi] = s;
            let gaps = [
                (Axiom::Reflexive, l(a, a).abs()),
                (Axiom::Symmetry, (l(a, b) - l(b, a)).abs()),
                (Axiom::Triangle, l(a, c) - l(a, b) - l(b, c)),
                (
                    Axiom::OrderConsistency,
                    (l(lo, mid) - l(lo, hi)).max(l(mid, hi) - l(lo, hi)),
                ),
                (
                    Axiom::Continuity,
                    if table.is_some() {
                        0.0
                    } else {
                        // A jump larger than JUMP across a step of STEP,
                        // probed both at the sample and at the diagonal.
                        let at = |y: f64, u: f64| (l(y + STEP, u) - l(y, u)).abs();
                        at(a, b).max(at(b, b)).max(at(b - STEP, b)) - JUMP
                    },
                ),
            ];
            for (axiom, gap) in gaps {
                if gap > TOL {
                    let r = report
                        .axioms
                        .iter_mut()
                        .find(|r| r.axiom == axiom)
                        .expect("every axiom has a slot");
                    r.violations += 1;
                    if gap > r.worst {
                        r.worst = gap;
                        r.example = Some([a, b, c]);
                    }
                }
            }
        }
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    /// `ℓ(a, a) = 0`.
    Reflexive,
    /// `ℓ(a, b) = ℓ(b, a)`.
    Symmetry,
    /// `ℓ(a, c) ≤ ℓ(a, b) + ℓ(b, c)`.
    Triangle,
    /// `a ≤ b ≤ c ⇒ ℓ(a, b), ℓ(b, c) ≤ ℓ(a, c)`.
    OrderConsistency,
    /// No jump across a tiny step.
    Continuity,
}

impl Axiom {
    pub const ALL: [Axiom; 5] = [
        Axiom::Reflexive,
        Axiom::Symmetry,
        Axiom::Triangle,
        Axiom::OrderConsistency,
        Axiom::Continuity,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub axiom: Axiom,
    pub violations: usize,
    /// Largest excess over the tolerance.
    pub worst: f64,
    /// The triple that produced `worst`.
    pub example: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub samples: usize,
    pub axioms: Vec<AxiomResult>,
}

impl AxiomReport {
    pub fn passes(&self, axiom: Axiom) -> bool {
        self.axioms
            .iter()
            .find(|r| r.axiom == axiom)
            .is_some_and(|r| r.violations == 0)
    }

    pub fn all_pass(&self) -> bool {
        self.axioms.iter().all(|r| r.violations == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn pricing_values() {
        assert!((pricing_loss(0.5, 0.8) - 0.3).abs() < 1e-15);
        assert_eq!(pricing_loss(0.9, 0.8), 0.8);
        assert_eq!(pricing_loss(0.8, 0.8), 0.0);
        for k in 1..=15 {
            let eps = 10f64.powi(-k);
            assert_eq!(pricing_loss(0.6 + eps, 0.6), 0.6);
        }
    }

    #[test]
    fn symmetric_passes_every_axiom() {
        let r = LossFunction::Symmetric.check_axioms(10_000, &mut stream(1, 0));
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn pricing_fails_symmetry() {
        let l = LossFunction::Pricing;
        assert!((l.eval(0.5, 0.8) - 0.3).abs() < 1e-15);
        assert_eq!(l.eval(0.8, 0.5), 0.5);
        let r = l.check_axioms(10_000, &mut stream(2, 0));
        assert!(!r.passes(Axiom::Symmetry));
        assert!(r.passes(Axiom::Reflexive));
        assert!(!r.passes(Axiom::Continuity));
    }

    #[test]
    fn square_root_metric_passes() {
        let r = LossFunction::Power { alpha: 0.5 }.check_axioms(10_000, &mut stream(3, 0));
        assert!(r.all_pass(), "{r:?}");
        let r = LossFunction::Power { alpha: 2.0 }.check_axioms(10_000, &mut stream(3, 0));
        assert!(!r.passes(Axiom::Triangle));
    }

    #[test]
    fn table_metric() {
        let t = MetricTable::new(vec![0.0, 1.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let l = LossFunction::Table(t);
        assert_eq!(l.eval(0.2, 0.9), 1.0);
        assert!(l.check_axioms(1000, &mut stream(4, 0)).all_pass());
        assert!(MetricTable::new(vec![0.0], vec![vec![0.0, 1.0]]).is_err());
    }
}
