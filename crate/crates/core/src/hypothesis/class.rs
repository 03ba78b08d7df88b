use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{HypothesisError, Result};
use crate::geometry::{dot, Vector};

/// What the adversary presents: a unit vector for the parametric classes or
/// a column index for finite tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Context {
    Vector(Vector),
    Index(usize),
}

impl Context {
    pub fn as_vector(&self) -> Option<&Vector> {
        match self {
            Context::Vector(v) => Some(v),
            Context::Index(_) => None,
        }
    }

    pub fn as_index(&self) -> Option<usize> {
        match self {
            Context::Index(j) => Some(*j),
            Context::Vector(_) => None,
        }
    }
}

/// Explicit value table `values[h][x]` over a finite context set.
///
/// JSON form: `{"contexts": [...], "hypotheses": [[v₁, …, v_|X|], …]}`; the
/// context entries are opaque labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteTable {
    pub contexts: Vec<serde_json::Value>,
    #[serde(rename = "hypotheses")]
    pub values: Vec<Vec<f64>>,
}

impl FiniteTable {
    pub fn new(contexts: Vec<serde_json::Value>, values: Vec<Vec<f64>>) -> Result<Self> {
        let t = FiniteTable { contexts, values };
        t.validate()?;
        Ok(t)
    }

    /// Table with contexts labelled `0..n`.
    pub fn from_rows(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        FiniteTable::new((0..n).map(serde_json::Value::from).collect(), values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(HypothesisError::InvalidTable("no hypotheses".into()));
        }
        let n = self.contexts.len();
        for (h, row) in self.values.iter().enumerate() {
            if row.len() != n {
                return Err(HypothesisError::InvalidTable(format!(
                    "hypothesis {h} has {} values for {n} contexts",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(HypothesisError::InvalidTable(format!(
                    "hypothesis {h} has a non-finite value"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: FiniteTable =
            serde_json::from_str(text).map_err(|e| HypothesisError::InvalidTable(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HypothesisError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn context_count(&self) -> usize {
        self.contexts.len()
    }

    pub fn value(&self, h: usize, x: usize) -> f64 {
        self.values[h][x]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HypothesisClass {
    /// `f_v(x) = ⟨v, x⟩`, `v` in the unit ball.
    Linear {
        dim: usize,
    },
    /// Linear with `‖v‖₀ ≤ sparsity`.
    SparseLinear {
        dim: usize,
        sparsity: usize,
    },
    /// `f_w(x) = max_i w_i x_i`, `w ∈ [0, 1]^d`.
    UnitDemand {
        dim: usize,
    },
    FiniteTable(Arc<FiniteTable>),
}

/// A single member of a class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Linear(Vector),
    UnitDemand(Vector),
    Row(usize),
}

impl HypothesisClass {
    pub fn finite(table: FiniteTable) -> Self {
        HypothesisClass::FiniteTable(Arc::new(table))
    }

    /// Dimension of vector contexts, `None` for tables.
    pub fn dim(&self) -> Option<usize> {
        match self {
            HypothesisClass::Linear { dim }
            | HypothesisClass::SparseLinear { dim, .. }
            | HypothesisClass::UnitDemand { dim } => Some(*dim),
            HypothesisClass::FiniteTable(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HypothesisClass::Linear { .. } => "linear",
            HypothesisClass::SparseLinear { .. } => "sparse_linear",
            HypothesisClass::UnitDemand { .. } => "unit_demand",
            HypothesisClass::FiniteTable(_) => "finite_table",
        }
    }

    pub fn contains(&self, h: &Hypothesis) -> bool {
        match (self, h) {
            (HypothesisClass::Linear { dim }, Hypothesis::Linear(v)) => {
                v.dim() == *dim && v.norm() <= 1.0 + 1e-12
            }
            (HypothesisClass::SparseLinear { dim, sparsity }, Hypothesis::Linear(v)) => {
                v.dim() == *dim
                    && v.norm() <= 1.0 + 1e-12
                    && v.iter().filter(|c| **c != 0.0).count() <= *sparsity
            }
            (HypothesisClass::UnitDemand { dim }, Hypothesis::UnitDemand(w)) => {
                w.dim() == *dim && w.iter().all(|c| (0.0..=1.0).contains(c))
            }
            (HypothesisClass::FiniteTable(t), Hypothesis::Row(r)) => *r < t.len(),
            _ => false,
        }
    }

    pub fn evaluate(&self, h: &Hypothesis, x: &Context) -> Result<f64> {
        match (h, x) {
            (Hypothesis::Linear(v), Context::Vector(x)) if v.dim() == x.dim() => Ok(dot(v, x)),
            (Hypothesis::UnitDemand(w), Context::Vector(x)) if w.dim() == x.dim() => {
                Ok(unit_demand_value(w, x))
            }
            (Hypothesis::Row(r), Context::Index(j)) => match self {
                HypothesisClass::FiniteTable(t) if *r < t.len() && *j < t.context_count() => {
                    Ok(t.value(*r, *j))
                }
                _ => Err(HypothesisError::ContextMismatch(format!(
                    "row {r} / context {j} outside the table"
                ))),
            },
            _ => Err(HypothesisError::ContextMismatch(format!(
                "{} hypothesis cannot evaluate this context",
                self.name()
            ))),
        }
    }

    /// Checks that `x` is a context of this class.
    pub fn check_context(&self, x: &Context) -> Result<()> {
        match (self, x) {
            (HypothesisClass::FiniteTable(t), Context::Index(j)) if *j < t.context_count() => {
                Ok(())
            }
            (c, Context::Vector(v)) if c.dim() == Some(v.dim()) => Ok(()),
            _ => Err(HypothesisError::ContextMismatch(format!(
                "context incompatible with {} class",
                self.name()
            ))),
        }
    }
}

#[inline]
pub(crate) fn unit_demand_value(w: &[f64], x: &[f64]) -> f64 {
    w.iter()
        .zip(x)
        .map(|(a, b)| a * b)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_json_round_trip() {
        let t =
            FiniteTable::from_json(r#"{"contexts": ["a", "b"], "hypotheses": [[0, 1], [1, 0.5]]}"#)
                .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.value(1, 1), 0.5);
        assert_eq!(FiniteTable::from_json(&t.to_json()).unwrap(), t);
        assert!(FiniteTable::from_json(r#"{"contexts": [1], "hypotheses": [[0, 1]]}"#).is_err());
    }

    #[test]
    fn evaluation() {
        let x = Context::Vector(Vector::new(vec![0.6, 0.8]));
        let lin = HypothesisClass::Linear { dim: 2 };
        let v = Hypothesis::Linear(Vector::new(vec![1.0, 0.0]));
        assert!((lin.evaluate(&v, &x).unwrap() - 0.6).abs() < 1e-15);
        let ud = HypothesisClass::UnitDemand { dim: 2 };
        let w = Hypothesis::UnitDemand(Vector::new(vec![1.0, 0.5]));
        assert!((ud.evaluate(&w, &x).unwrap() - 0.6).abs() < 1e-15);
        assert!(lin.evaluate(&v, &Context::Index(0)).is_err());
        let sparse = HypothesisClass::SparseLinear {
            dim: 3,
            sparsity: 1,
        };
        assert!(sparse.contains(&Hypothesis::Linear(Vector::new(vec![0.0, 0.4, 0.0]))));
        assert!(!sparse.contains(&Hypothesis::Linear(Vector::new(vec![0.1, 0.4, 0.0]))));
    }
}
