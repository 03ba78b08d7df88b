//! Losses, the feedback channel, adversaries and the episode loop.

mod adversary;
mod channel;
mod episode;
mod loss;

use thiserror::Error;

use crate::hypothesis::HypothesisError;
use crate::learners::LearnerError;

pub use adversary::{
    Adversary, CyclingBasis, CyclingIndex, FixedSequence, RandomUnit, SparsePricing, Target,
};
pub use channel::{true_feedback, FeedbackChannel};
pub use episode::{
    run_episode, CheckTally, EpisodeConfig, RegretTrace, RoundRecord, TraceSummary, CSV_COLUMNS,
};
pub use loss::{pricing_loss, Axiom, AxiomReport, AxiomResult, LossFunction, MetricTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("flip probability must lie in [0, 1/2), got {0}")]
    InvalidChannel(f64),
    #[error("invalid loss: {0}")]
    InvalidLoss(String),
    #[error("adversary: {0}")]
    Adversary(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

pub type Result<T> = std::result::Result<T, EnvironmentError>;
