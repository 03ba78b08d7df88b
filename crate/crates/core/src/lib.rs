//! Contextual search with binary feedback.
//!
//! The crate is organised in the same layers an experiment runs through:
//!
//! - [`geometry`]: the consistent set `S_t = ball ∩ halfspaces`, Euclidean
//!   projection, widths and Monte-Carlo estimates of Steiner-inflated volumes.
//! - [`hypothesis`]: finite hypothesis classes, grid ε-nets and margin-filtered
//!   survivor sets at several scales.
//! - [`learners`]: every learner as a guess/update state machine with
//!   instrumentation for the per-round volume and halving properties.
//! - [`environment`]: losses, the feedback channel, adversaries and the episode
//!   loop producing regret traces.
//! - [`treedim`]: tree dimension of finite classes and the full-feedback
//!   Contextual Binary Search learner.

pub mod environment;
pub mod geometry;
pub mod hypothesis;
pub mod learners;
pub mod rng;
mod sign;
pub mod treedim;

pub use sign::Sign;
