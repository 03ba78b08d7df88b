//! Tree dimension of finite classes and Contextual Binary Search.
//!
//! Only finite classes are handled: `τ` is computed exactly by a memoized
//! recursion over survivor sets.

mod cbs;
mod class;
mod cover;
mod fixtures;
mod tree;

use thiserror::Error;

use crate::hypothesis::HypothesisError;

pub use cbs::{cbs_step, Cbs, CbsChoice, TreeLowerBound, TREE_POTENTIAL_TOL};
pub use class::FiniteClass;
pub use cover::{cdim_estimate, greedy_cover, DEFAULT_EPS_GRID};
pub use fixtures::{all_functions, indicators, separation_fixture};
pub use tree::{
    tree_dimension, tree_dimension_with_budget, LabeledTree, TreeNode, TreeSolver, DEFAULT_BUDGET,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeDimError {
    #[error("exact recursion needs more than {budget} subproblems")]
    BudgetExceeded { budget: usize },
    #[error("invalid class: {0}")]
    InvalidClass(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
}

pub type Result<T> = std::result::Result<T, TreeDimError>;

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::rng::stream;

    #[test]
    fn indicator_family_has_dimension_one() {
        for n in 2..6 {
            let (tau, tree) = tree_dimension(&Arc::new(indicators(n))).unwrap();
            assert_eq!(tau, 1.0);
            tree.validate(&indicators(n)).unwrap();
        }
    }

    #[test]
    fn separation_fixture_is_shallow() {
        for n in 2..=4 {
            let c = Arc::new(separation_fixture(n, &mut stream(5, n as u64)));
            let (tau, tree) = tree_dimension(&c).unwrap();
            assert!(tau <= 1.0 + 2.0 / n as f64, "n={n} tau={tau}");
            tree.validate(&c).unwrap();
        }
    }
}
