use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FiniteClass, Result, TreeDimError};

/// Default cap on memoized subproblems.
pub const DEFAULT_BUDGET: usize = 10_000;

/// A node of an `(X, Y)`-tree. Outcomes are indices into the class outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        hypothesis: usize,
    },
    /// Leaves under `left` satisfy `f(x) = y1`, under `right` `f(x) = y2`.
    Split {
        x: usize,
        y1: usize,
        y2: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Minimum over leaves of the root-to-leaf sum of `ℓ(y1, y2)`.
    pub fn cost(&self, class: &FiniteClass) -> f64 {
        match self {
            TreeNode::Leaf { .. } => 0.0,
            TreeNode::Split {
                y1,
                y2,
                left,
                right,
                ..
            } => class.loss(*y1, *y2) + left.cost(class).min(right.cost(class)),
        }
    }

    fn check(
        &self,
        class: &FiniteClass,
        path: &mut Vec<(usize, usize)>,
    ) -> std::result::Result<(), String> {
        match self {
            TreeNode::Leaf { hypothesis } => {
                let h = *hypothesis;
                if h >= class.len() {
                    return Err(format!("leaf names hypothesis {h} of {}", class.len()));
                }
                match path.iter().find(|(x, y)| class.at(h, *x) != *y) {
                    Some((x, y)) => Err(format!(
                        "leaf {h} has outcome {} at context {x}, its path requires {y}",
                        class.at(h, *x)
                    )),
                    None => Ok(()),
                }
            }
            TreeNode::Split {
                x,
                y1,
                y2,
                left,
                right,
            } => {
                if *x >= class.context_count() {
                    return Err(format!("split on context {x} of {}", class.context_count()));
                }
                if *y1 >= class.outcomes.len() || *y2 >= class.outcomes.len() {
                    return Err(format!(
                        "split names outcome ({y1}, {y2}) of {}",
                        class.outcomes.len()
                    ));
                }
                path.push((*x, *y1));
                left.check(class, path)?;
                path.pop();
                path.push((*x, *y2));
                right.check(class, path)?;
                path.pop();
                Ok(())
            }
        }
    }

    /// Pads every leaf down to `depth` with `(x, y, y)` nodes.
    fn pad(&self, class: &FiniteClass, depth: usize) -> TreeNode {
        match self {
            TreeNode::Leaf { hypothesis } => {
                let mut node = self.clone();
                for _ in 0..depth {
                    let y = class.at(*hypothesis, 0);
                    node = TreeNode::Split {
                        x: 0,
                        y1: y,
                        y2: y,
                        left: Box::new(node.clone()),
                        right: Box::new(node),
                    };
                }
                node
            }
            TreeNode::Split {
                x,
                y1,
                y2,
                left,
                right,
            } => TreeNode::Split {
                x: *x,
                y1: *y1,
                y2: *y2,
                left: Box::new(left.pad(class, depth - 1)),
                right: Box::new(right.pad(class, depth - 1)),
            },
        }
    }

    fn uniform_depth(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => Some(0),
            TreeNode::Split { left, right, .. } => {
                match (left.uniform_depth(), right.uniform_depth()) {
                    (Some(a), Some(b)) if a == b => Some(a + 1),
                    _ => None,
                }
            }
        }
    }
}

/// A tree together with its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledTree {
    pub root: TreeNode,
    pub cost: f64,
}

impl LabeledTree {
    pub fn new(root: TreeNode, class: &FiniteClass) -> Self {
        let cost = root.cost(class);
        LabeledTree { root, cost }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Checks satisfiability of every leaf and recomputes the cost.
    pub fn validate(&self, class: &FiniteClass) -> std::result::Result<(), String> {
        self.root.check(class, &mut Vec::new())?;
        let cost = self.root.cost(class);
        if (cost - self.cost).abs() > 1e-12 {
            return Err(format!("stored cost {} but leaves give {cost}", self.cost));
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.root.uniform_depth().is_some()
    }

    /// The same tree with every leaf at the maximum depth.
    pub fn padded(&self, class: &FiniteClass) -> LabeledTree {
        let root = self.root.pad(class, self.depth());
        LabeledTree::new(root, class)
    }
}

/// Memoized recursion for `τ` over subsets of one class.
#[derive(Clone, Debug)]
pub struct TreeSolver {
    class: Arc<FiniteClass>,
    memo: HashMap<Vec<u32>, f64>,
    budget: usize,
}

impl TreeSolver {
    pub fn new(class: Arc<FiniteClass>) -> Self {
        Self::with_budget(class, DEFAULT_BUDGET)
    }

    pub fn with_budget(class: Arc<FiniteClass>, budget: usize) -> Self {
        TreeSolver {
            class,
            memo: HashMap::new(),
            budget,
        }
    }

    pub fn class(&self) -> &Arc<FiniteClass> {
        &self.class
    }

    /// Subproblems solved so far.
    pub fn expansions(&self) -> usize {
        self.memo.len()
    }

    /// Members of `s`, grouped by their outcome at `x`, in outcome order.
    pub fn partition(&self, s: &[u32], x: usize) -> BTreeMap<usize, Vec<u32>> {
        let mut groups: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for &h in s {
            groups
                .entry(self.class.at(h as usize, x))
                .or_default()
                .push(h);
        }
        groups
    }

    /// `τ(s)` for a sorted, nonempty subset.
    pub fn tau(&mut self, s: &[u32]) -> Result<f64> {
        if s.len() <= 1 {
            return Ok(0.0);
        }
        if let Some(&v) = self.memo.get(s) {
            return Ok(v);
        }
        if self.memo.len() >= self.budget {
            return Err(TreeDimError::BudgetExceeded {
                budget: self.budget,
            });
        }
        let best = self.best_split(s)?.map_or(0.0, |b| b.value);
        self.memo.insert(s.to_vec(), best);
        Ok(best)
    }

    fn best_split(&mut self, s: &[u32]) -> Result<Option<Split>> {
        let mut best: Option<Split> = None;
        for x in 0..self.class.context_count() {
            let groups: Vec<(usize, Vec<u32>)> = self.partition(s, x).into_iter().collect();
            if groups.len() < 2 {
                continue;
            }
            let mut taus = Vec::with_capacity(groups.len());
            for (_, g) in &groups {
                taus.push(self.tau(g)?);
            }
            for a in 0..groups.len() {
                for b in a + 1..groups.len() {
                    let value = self.class.loss(groups[a].0, groups[b].0) + taus[a].min(taus[b]);
                    if best.as_ref().is_none_or(|s| value > s.value) {
                        best = Some(Split {
                            x,
                            y1: groups[a].0,
                            y2: groups[b].0,
                            value,
                        });
                    }
                }
            }
        }
        Ok(best)
    }

    /// A tree of cost `τ(s)` whose leaves all lie in `s`.
    pub fn witness(&mut self, s: &[u32]) -> Result<TreeNode> {
        let Some(&first) = s.first() else {
            return Err(TreeDimError::InvalidClass("empty subset".into()));
        };
        if s.len() == 1 {
            return Ok(TreeNode::Leaf {
                hypothesis: first as usize,
            });
        }
        match self.best_split(s)? {
            Some(sp) if sp.value > 0.0 => {
                let groups = self.partition(s, sp.x);
                let left = self.witness(&groups[&sp.y1])?;
                let right = self.witness(&groups[&sp.y2])?;
                Ok(TreeNode::Split {
                    x: sp.x,
                    y1: sp.y1,
                    y2: sp.y2,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
            _ => Ok(TreeNode::Leaf {
                hypothesis: first as usize,
            }),
        }
    }
}

struct Split {
    x: usize,
    y1: usize,
    y2: usize,
    value: f64,
}

/// Tree dimension of `class` and a witness tree attaining it.
pub fn tree_dimension(class: &Arc<FiniteClass>) -> Result<(f64, LabeledTree)> {
    tree_dimension_with_budget(class, DEFAULT_BUDGET)
}

pub fn tree_dimension_with_budget(
    class: &Arc<FiniteClass>,
    budget: usize,
) -> Result<(f64, LabeledTree)> {
    let mut solver = TreeSolver::with_budget(class.clone(), budget);
    let all = class.everyone();
    let tau = solver.tau(&all)?;
    let root = solver.witness(&all)?;
    Ok((tau, LabeledTree::new(root, class)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treedim::all_functions;

    /// Best cost over every tree of depth at most `depth` on `s`, built by
    /// enumeration without memoization.
    fn brute(class: &FiniteClass, s: &[usize], depth: usize) -> f64 {
        if depth == 0 || s.len() < 2 {
            return 0.0;
        }
        let mut best = 0.0f64;
        let ys = class.outcomes.len();
        for x in 0..class.context_count() {
            for y1 in 0..ys {
                for y2 in 0..ys {
                    let l: Vec<usize> = s
                        .iter()
                        .copied()
                        .filter(|&h| class.at(h, x) == y1)
                        .collect();
                    let r: Vec<usize> = s
                        .iter()
                        .copied()
                        .filter(|&h| class.at(h, x) == y2)
                        .collect();
                    if l.is_empty() || r.is_empty() {
                        continue;
                    }
                    let v = class.loss(y1, y2)
                        + brute(class, &l, depth - 1).min(brute(class, &r, depth - 1));
                    best = best.max(v);
                }
            }
        }
        best
    }

    #[test]
    fn all_boolean_functions_on_two_points() {
        let c = Arc::new(all_functions(2, &[0.0, 1.0]));
        let (tau, tree) = tree_dimension(&c).unwrap();
        assert_eq!(tau, 2.0);
        let idx: Vec<usize> = (0..c.len()).collect();
        assert_eq!(brute(&c, &idx, 4), 2.0);
        tree.validate(&c).unwrap();
        assert_eq!(tree.cost, 2.0);
        assert_eq!(tree.depth(), 2);
    }

    #[test]
    fn matches_brute_force_on_three_outcomes() {
        let c = Arc::new(all_functions(2, &[0.0, 0.25, 1.0]));
        let (tau, tree) = tree_dimension(&c).unwrap();
        let idx: Vec<usize> = (0..c.len()).collect();
        assert!((tau - brute(&c, &idx, 5)).abs() < 1e-12);
        tree.validate(&c).unwrap();
        let sub: Vec<usize> = vec![0, 4, 8];
        let s: Vec<u32> = sub.iter().map(|&h| h as u32).collect();
        let mut solver = TreeSolver::new(c.clone());
        assert!((solver.tau(&s).unwrap() - brute(&c, &sub, 5)).abs() < 1e-12);
    }

    #[test]
    fn single_hypothesis_is_zero() {
        let c = Arc::new(FiniteClass::new(vec![0.3], vec![vec![0, 0]], None).unwrap());
        let (tau, tree) = tree_dimension(&c).unwrap();
        assert_eq!(tau, 0.0);
        assert_eq!(tree.root, TreeNode::Leaf { hypothesis: 0 });
    }

    #[test]
    fn budget_is_enforced() {
        let c = Arc::new(all_functions(3, &[0.0, 0.5, 1.0]));
        assert!(matches!(
            tree_dimension_with_budget(&c, 3),
            Err(TreeDimError::BudgetExceeded { budget: 3 })
        ));
    }

    #[test]
    fn padding_keeps_cost_and_satisfiability() {
        let c = Arc::new(
            FiniteClass::new(
                vec![0.0, 1.0],
                vec![vec![0, 0], vec![1, 0], vec![1, 1]],
                None,
            )
            .unwrap(),
        );
        let (tau, tree) = tree_dimension(&c).unwrap();
        assert_eq!(tau, 1.0);
        let padded = tree.padded(&c);
        assert!(padded.is_uniform());
        padded.validate(&c).unwrap();
        assert_eq!(padded.cost, tree.cost);
    }

    #[test]
    fn invalid_tree_is_rejected() {
        let c = all_functions(1, &[0.0, 1.0]);
        let bad = LabeledTree {
            root: TreeNode::Split {
                x: 0,
                y1: 0,
                y2: 1,
                left: Box::new(TreeNode::Leaf { hypothesis: 1 }),
                right: Box::new(TreeNode::Leaf { hypothesis: 0 }),
            },
            cost: 1.0,
        };
        assert!(bad.validate(&c).is_err());
    }
}
