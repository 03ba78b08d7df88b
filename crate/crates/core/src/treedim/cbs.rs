use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{FiniteClass, LabeledTree, Result, TreeDimError, TreeNode, TreeSolver};
use crate::environment::{self, Adversary, Target};
use crate::hypothesis::{Context, Hypothesis, HypothesisClass};
use crate::learners::{self, Feedback, Learner, LearnerError, Lemma, LemmaCheck, StepReport};

/// Slack on the per-round potential drop.
pub const TREE_POTENTIAL_TOL: f64 = 1e-12;

/// Ties between `τ` values closer than this count as equal.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CbsChoice {
    /// Outcome index of the guess.
    pub y: usize,
    /// Smallest `ε` with `τ(S|x=y) ≥ τ(S) − ε`.
    pub epsilon: f64,
    pub tau: f64,
}

/// Guess for context `x` given survivors `s`.
///
/// Candidates are the outcomes some survivor takes at `x`. The guess
/// maximizes `τ(S|x=y)`; among near-ties the lowest outcome value wins.
pub fn cbs_step(solver: &mut TreeSolver, s: &[u32], x: usize) -> Result<CbsChoice> {
    if s.is_empty() {
        return Err(TreeDimError::InvalidClass("no survivors".into()));
    }
    let tau = solver.tau(s)?;
    let class = solver.class().clone();
    let mut best: Option<(usize, f64)> = None;
    for (y, group) in solver.partition(s, x) {
        let t = solver.tau(&group)?;
        let better = match best {
            None => true,
            Some((by, bt)) => {
                t > bt + TIE_TOL
                    || ((t - bt).abs() <= TIE_TOL && class.outcomes[y] < class.outcomes[by])
            }
        };
        if better {
            best = Some((y, t));
        }
    }
    let (y, t) = best.expect("nonempty survivors give a candidate");
    Ok(CbsChoice {
        y,
        epsilon: (tau - t).max(0.0),
        tau,
    })
}

/// Contextual Binary Search over a finite class, with full feedback.
#[derive(Clone, Debug)]
pub struct Cbs {
    solver: TreeSolver,
    survivors: Vec<u32>,
    pending: Option<(usize, CbsChoice)>,
}

impl Cbs {
    pub fn new(class: Arc<FiniteClass>) -> Self {
        Self::with_solver(TreeSolver::new(class))
    }

    /// Reuses the memo of `solver`.
    pub fn with_solver(solver: TreeSolver) -> Self {
        let survivors = solver.class().everyone();
        Cbs {
            solver,
            survivors,
            pending: None,
        }
    }

    pub fn survivors(&self) -> &[u32] {
        &self.survivors
    }

    pub fn solver(&self) -> &TreeSolver {
        &self.solver
    }

    pub fn potential(&mut self) -> Result<f64> {
        self.solver.tau(&self.survivors)
    }

    /// Guess at context index `x`, as an outcome index.
    pub fn choose(&mut self, x: usize) -> Result<CbsChoice> {
        if x >= self.solver.class().context_count() {
            return Err(TreeDimError::InvalidClass(format!("no context {x}")));
        }
        let choice = cbs_step(&mut self.solver, &self.survivors, x)?;
        self.pending = Some((x, choice.clone()));
        Ok(choice)
    }

    /// Keeps the survivors with outcome `u` at the pending context and checks
    /// `τ(S_{t+1}) ≤ τ(S_t) − ℓ(y_t, u)`.
    pub fn observe(&mut self, u: usize) -> Result<LemmaCheck> {
        let (x, choice) = self
            .pending
            .take()
            .ok_or_else(|| TreeDimError::InvalidClass("observe without a pending choice".into()))?;
        let class = self.solver.class().clone();
        let next: Vec<u32> = self
            .survivors
            .iter()
            .copied()
            .filter(|&h| class.at(h as usize, x) == u)
            .collect();
        if next.is_empty() {
            return Err(TreeDimError::InvalidClass(format!(
                "no survivor takes outcome {u} at context {x}"
            )));
        }
        self.survivors = next;
        let after = self.solver.tau(&self.survivors)?;
        let loss = class.loss(choice.y, u);
        Ok(LemmaCheck::at_most(
            Lemma::TreePotential,
            0,
            after,
            choice.tau - loss + TREE_POTENTIAL_TOL,
        ))
    }
}

fn learner_error(e: TreeDimError) -> LearnerError {
    LearnerError::InvalidConfig(e.to_string())
}

impl Learner for Cbs {
    fn name(&self) -> &'static str {
        "cbs"
    }

    fn guess(&mut self, x: &Context, _rng: &mut dyn RngCore) -> learners::Result<f64> {
        let Context::Index(i) = x else {
            return Err(LearnerError::InvalidConfig(
                "cbs needs index contexts".into(),
            ));
        };
        let c = self.choose(*i).map_err(learner_error)?;
        Ok(self.solver.class().outcomes[c.y])
    }

    fn update(
        &mut self,
        feedback: &Feedback,
        _rng: &mut dyn RngCore,
    ) -> learners::Result<StepReport> {
        let u = feedback
            .exact
            .ok_or_else(|| LearnerError::InvalidConfig("cbs needs the exact value".into()))?;
        let idx = self.solver.class().outcome_index(u);
        let check = self.observe(idx).map_err(learner_error)?;
        Ok(StepReport {
            potential: Some(check.measured),
            checks: vec![check],
            ..StepReport::default()
        })
    }

    fn full_feedback(&self) -> bool {
        true
    }

    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        match h {
            Hypothesis::Row(r) => Some(self.survivors.binary_search(&(*r as u32)).is_ok()),
            _ => None,
        }
    }
}

/// Walks a uniformly random root-to-leaf path of a uniform-depth tree and
/// hides the leaf's hypothesis.
#[derive(Clone, Debug)]
pub struct TreeLowerBound {
    path: Vec<usize>,
    target: Target,
    leaf: usize,
}

impl TreeLowerBound {
    /// Pads `tree` first if its leaves sit at different depths.
    pub fn new(tree: &LabeledTree, class: &FiniteClass, rng: &mut dyn RngCore) -> Result<Self> {
        tree.validate(class).map_err(TreeDimError::InvalidTree)?;
        let padded;
        let tree = if tree.is_uniform() {
            tree
        } else {
            padded = tree.padded(class);
            &padded
        };
        let mut node = &tree.root;
        let mut path = Vec::new();
        let leaf = loop {
            match node {
                TreeNode::Leaf { hypothesis } => break *hypothesis,
                TreeNode::Split { x, left, right, .. } => {
                    path.push(*x);
                    node = if rng.random::<bool>() { right } else { left };
                }
            }
        };
        let target = Target::new(class.hypothesis_class(), Hypothesis::Row(leaf))
            .map_err(|e| TreeDimError::InvalidClass(e.to_string()))?;
        Ok(TreeLowerBound { path, target, leaf })
    }

    pub fn path(&self) -> &[usize] {
        &self.path
    }

    pub fn leaf(&self) -> usize {
        self.leaf
    }

    pub fn class(&self) -> &HypothesisClass {
        &self.target.class
    }
}

impl Adversary for TreeLowerBound {
    fn name(&self) -> &'static str {
        "tree_lower_bound"
    }

    fn target(&self) -> &Target {
        &self.target
    }

    /// The path contexts in order, then the same sequence again.
    fn next_context(&mut self, t: usize, _rng: &mut dyn RngCore) -> environment::Result<Context> {
        if self.path.is_empty() {
            return Ok(Context::Index(0));
        }
        Ok(Context::Index(self.path[(t.max(1) - 1) % self.path.len()]))
    }
}
