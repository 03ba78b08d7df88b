use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Result, TreeDimError};
use crate::hypothesis::{FiniteTable, HypothesisClass};

/// Finite hypothesis class over finite contexts and outcomes.
///
/// JSON form: `{"contexts": [...], "outcomes": [y₀, …], "table": [[j, …], …],
/// "metric": [[…], …]}` where `table[h][x]` indexes `outcomes`; a missing
/// `metric` means `|y₁ − y₂|`. The value-table format of
/// [`FiniteTable`] is accepted too.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteClass {
    #[serde(default)]
    pub contexts: Vec<serde_json::Value>,
    pub outcomes: Vec<f64>,
    pub table: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
}

/// Slack allowed in the metric checks.
const METRIC_TOL: f64 = 1e-12;

impl FiniteClass {
    pub fn new(
        outcomes: Vec<f64>,
        table: Vec<Vec<usize>>,
        metric: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let width = table.first().map_or(0, Vec::len);
        let c = FiniteClass {
            contexts: (0..width)
                .map(|i| serde_json::Value::from(i as u64))
                .collect(),
            outcomes,
            table,
            metric,
        };
        c.validate()?;
        Ok(c)
    }

    /// Absolute-value metric over the distinct values of `t`.
    pub fn from_table(t: &FiniteTable) -> Result<Self> {
        let mut outcomes: Vec<f64> = t.values.iter().flatten().copied().collect();
        outcomes.sort_by(f64::total_cmp);
        outcomes.dedup();
        let index = |v: f64| {
            outcomes
                .binary_search_by(|o| o.total_cmp(&v))
                .expect("value was collected")
        };
        let table = t
            .values
            .iter()
            .map(|row| row.iter().map(|&v| index(v)).collect())
            .collect();
        let c = FiniteClass {
            contexts: t.contexts.clone(),
            outcomes,
            table,
            metric: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TreeDimError::InvalidClass(m));
        if self.table.is_empty() {
            return bad("class has no hypothesis".into());
        }
        let width = self.contexts.len();
        if width == 0 {
            return bad("class has no context".into());
        }
        if self.outcomes.is_empty() || self.outcomes.iter().any(|o| !o.is_finite()) {
            return bad("outcomes must be finite and nonempty".into());
        }
        for (h, row) in self.table.iter().enumerate() {
            if row.len() != width {
                return bad(format!(
                    "row {h} has {} entries, expected {width}",
                    row.len()
                ));
            }
            if let Some(j) = row.iter().find(|j| **j >= self.outcomes.len()) {
                return bad(format!(
                    "row {h} names outcome {j} of {}",
                    self.outcomes.len()
                ));
            }
        }
        if let Some(m) = &self.metric {
            let n = self.outcomes.len();
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return bad(format!("metric must be {n}×{n}"));
            }
            for a in 0..n {
                if m[a][a].abs() > METRIC_TOL {
                    return bad(format!("metric diagonal entry {a} is {}", m[a][a]));
                }
                for b in 0..n {
                    if !(m[a][b] >= 0.0) || !m[a][b].is_finite() {
                        return bad(format!("metric entry ({a}, {b}) is {}", m[a][b]));
                    }
                    if (m[a][b] - m[b][a]).abs() > METRIC_TOL {
                        return bad(format!("metric is not symmetric at ({a}, {b})"));
                    }
                    for c in 0..n {
                        if m[a][c] > m[a][b] + m[b][c] + METRIC_TOL {
                            return bad(format!("triangle inequality fails at ({a}, {b}, {c})"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        if let Ok(c) = serde_json::from_str::<FiniteClass>(text) {
            c.validate()?;
            return Ok(c);
        }
        let t = FiniteTable::from_json(text)?;
        Self::from_table(&t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TreeDimError::InvalidClass(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("class serializes")
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn context_count(&self) -> usize {
        self.contexts.len()
    }

    /// Outcome index of hypothesis `h` at context `x`.
    pub fn at(&self, h: usize, x: usize) -> usize {
        self.table[h][x]
    }

    pub fn value(&self, h: usize, x: usize) -> f64 {
        self.outcomes[self.table[h][x]]
    }

    /// `ℓ` between outcome indices.
    pub fn loss(&self, a: usize, b: usize) -> f64 {
        match &self.metric {
            Some(m) => m[a][b],
            None => (self.outcomes[a] - self.outcomes[b]).abs(),
        }
    }

    /// The outcome index nearest `y`.
    pub fn outcome_index(&self, y: f64) -> usize {
        let mut best = 0;
        for (i, o) in self.outcomes.iter().enumerate() {
            if (o - y).abs() < (self.outcomes[best] - y).abs() {
                best = i;
            }
        }
        best
    }

    /// `max_x ℓ(f(x), g(x))`.
    pub fn distance(&self, f: usize, g: usize) -> f64 {
        (0..self.context_count())
            .map(|x| self.loss(self.at(f, x), self.at(g, x)))
            .fold(0.0, f64::max)
    }

    /// The same class as a value table, for the binary-feedback learners.
    pub fn to_table(&self) -> FiniteTable {
        FiniteTable {
            contexts: self.contexts.clone(),
            values: (0..self.len())
                .map(|h| {
                    (0..self.context_count())
                        .map(|x| self.value(h, x))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn hypothesis_class(&self) -> HypothesisClass {
        HypothesisClass::FiniteTable(Arc::new(self.to_table()))
    }

    /// Every index, as a survivor set.
    pub fn everyone(&self) -> Vec<u32> {
        (0..self.len() as u32).collect()
    }
}
