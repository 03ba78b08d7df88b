//! Learners as guess/update state machines.
//!
//! Every learner sees a context, returns a guess, then consumes one feedback
//! bit (or the exact value in full-feedback mode). The [`StepReport`] returned
//! by `update` carries the scale used, a potential snapshot and the outcome of
//! the per-round properties the algorithms are built around, so an episode
//! trace can be audited afterwards.
//!
//! The hidden value may be passed to `update` as an audit field. Learners
//! never use it to decide anything; it only classifies rounds for the
//! instrumentation (for example "median far from the truth").

mod general;
mod noisy;
mod scale;
mod steiner;
mod weights;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::hypothesis::{Context, Hypothesis, HypothesisError};
use crate::Sign;

pub use general::{MultiScaleGeneral, SingleScaleGeneral, SMALL_LOSS_RATIO};
pub use noisy::{
    noisy_constant, sameside_identity, weight_increase_identity, ConstantsMode, IdentityCheck,
    NoisyLinear, NoisyLinearConfig, NoisySingleScale, DEFAULT_NOISY_CELL_CAP,
};
pub use scale::{general_scale, pricing_fraction, pricing_scale, symmetric_scale, ScaleIndex};
pub use steiner::{
    exact_median_baseline, midpoint_baseline, Baseline, BaselineRule, Perturbation, SteinerConfig,
    SteinerPricing, SteinerSymmetric, LEMMA1_BOUND, PRICE_GUARD, RESOLUTION_FLOOR,
};
pub use weights::WeightField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error("grid of {cells} cells exceeds the cap of {cap}")]
    GridTooFine { cells: usize, cap: usize },
    #[error("update called without a pending guess")]
    NoPendingGuess,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, LearnerError>;

/// What the environment hands back after a guess.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    /// The (possibly flipped) comparison bit: `Plus` means the guess was above.
    pub sigma: Sign,
    /// The hidden value itself, present only in full-feedback mode.
    pub exact: Option<f64>,
    /// The hidden value for instrumentation only.
    pub audit: Option<f64>,
}

impl Feedback {
    pub fn binary(sigma: Sign) -> Self {
        Feedback {
            sigma,
            exact: None,
            audit: None,
        }
    }

    pub fn audited(sigma: Sign, u: f64) -> Self {
        Feedback {
            sigma,
            exact: None,
            audit: Some(u),
        }
    }
}

/// Per-round properties checked by the instrumentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// `Vol(S_{t+1} + z_iB) ≤ 0.80·Vol(S_t + z_iB)` for the symmetric learner.
    VolumeDrop,
    /// Post/pre inflated volume after a no-purchase at scale `i`.
    NoPurchaseDrop,
    /// Post/pre inflated volume after a purchase at scale `i`.
    PurchaseDrop,
    /// `|alive|` halves on a far-median round of the single-scale learner.
    HalfHypothesis,
    /// `|H^{z_i}|` halves on a far-median round of the multi-scale learner.
    BigLoss,
    /// The coarse net at `r = 2^{−(i+1)}` loses a member on a close round.
    SmallLoss,
    /// `|Σw − 1| ≤ 1e−9` after a weight update.
    Normalization,
    /// The hidden point stays in the consistent set (noiseless runs).
    Consistency,
    /// `τ(S_{t+1}) ≤ τ(S_t) − loss_t` for Contextual Binary Search.
    TreePotential,
}

impl Lemma {
    /// Hard properties must hold on every round; the others are statistical
    /// and are judged by rate over a run.
    pub fn is_hard(self) -> bool {
        matches!(
            self,
            Lemma::Normalization | Lemma::Consistency | Lemma::TreePotential
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Lemma::VolumeDrop => "volume_drop",
            Lemma::NoPurchaseDrop => "no_purchase_drop",
            Lemma::PurchaseDrop => "purchase_drop",
            Lemma::HalfHypothesis => "half_hypothesis",
            Lemma::BigLoss => "big_loss",
            Lemma::SmallLoss => "small_loss",
            Lemma::Normalization => "normalization",
            Lemma::Consistency => "consistency",
            Lemma::TreePotential => "tree_potential",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: Lemma,
    pub scale: i32,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

impl LemmaCheck {
    /// `measured ≤ bound`.
    pub fn at_most(lemma: Lemma, scale: i32, measured: f64, bound: f64) -> Self {
        LemmaCheck {
            lemma,
            scale,
            measured,
            bound,
            holds: measured <= bound,
        }
    }

    /// A Bernoulli event; `measured` is 1 when it happened.
    pub fn event(lemma: Lemma, scale: i32, happened: bool) -> Self {
        LemmaCheck {
            lemma,
            scale,
            measured: if happened { 1.0 } else { 0.0 },
            bound: 1.0,
            holds: happened,
        }
    }
}

/// Conditions under which a learner deviated from its nominal rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Width below the numerical floor; guessed the midpoint without cutting.
    ResolutionFloor,
    /// A geometry routine failed; guessed the midpoint.
    GeometryFallback,
    /// No alive member at the chosen scale; reused the last median.
    EmptyNetFallback,
    /// Median bisection stopped before reaching the target fraction.
    MedianStalled,
    /// Pricing width at most `1/T`; guessed the minimum.
    MinPriceRule,
    /// Every alive hypothesis agrees on the context.
    CommonValue,
    /// The width called for a scale past the end of the ladder.
    ScaleClamped,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub scale: Option<ScaleIndex>,
    /// Inflated volume, alive count or weight mass, depending on the learner.
    pub potential: Option<f64>,
    /// Median the guess was derived from.
    pub median: Option<f64>,
    /// Safety perturbation subtracted from the guess.
    pub perturbation: Option<f64>,
    /// Sign of the randomized offset around the median.
    pub coin: Option<Sign>,
    pub checks: Vec<LemmaCheck>,
    pub flags: Vec<Flag>,
}

pub trait Learner: Send {
    fn name(&self) -> &'static str;

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64>;

    fn update(&mut self, feedback: &Feedback, rng: &mut dyn RngCore) -> Result<StepReport>;

    /// Whether `update` needs [`Feedback::exact`].
    fn full_feedback(&self) -> bool {
        false
    }

    /// Whether the learner's state still admits `h` (for noiseless runs);
    /// `None` when the learner keeps no consistent set.
    fn admits(&self, _h: &Hypothesis) -> Option<bool> {
        None
    }
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn guess(&mut self, x: &Context, rng: &mut dyn RngCore) -> Result<f64> {
        (**self).guess(x, rng)
    }

    fn update(&mut self, feedback: &Feedback, rng: &mut dyn RngCore) -> Result<StepReport> {
        (**self).update(feedback, rng)
    }

    fn full_feedback(&self) -> bool {
        (**self).full_feedback()
    }

    fn admits(&self, h: &Hypothesis) -> Option<bool> {
        (**self).admits(h)
    }
}

pub(crate) fn vector_context(x: &Context) -> Result<&crate::geometry::Vector> {
    x.as_vector().ok_or_else(|| {
        LearnerError::Hypothesis(HypothesisError::ContextMismatch(
            "this learner needs vector contexts".into(),
        ))
    })
}
