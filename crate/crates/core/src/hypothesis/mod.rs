//! Hypothesis classes, grid ε-nets and margin-filtered survivor sets.
//!
//! A [`HypothesisNet`] is a finite subset of a class at one scale `z` with an
//! alive mask; filtering with margin `z` keeps every member whose value is
//! within `z` of being consistent, so the member nearest the truth survives.
//! [`NetFamily`] maintains such nets at several scales and builds fine nets
//! lazily, localized around the survivors of a coarser one.

mod class;
mod family;
mod net;

use thiserror::Error;

pub use class::{Context, FiniteTable, Hypothesis, HypothesisClass};
pub use family::{LadderRule, NetFamily, Observation, MIN_SCALE};
pub use net::{HypothesisNet, DEFAULT_NET_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypothesisError {
    #[error("net at scale {scale:e} would hold about {predicted} members (cap {cap})")]
    NetTooLarge {
        scale: f64,
        predicted: usize,
        cap: usize,
    },
    #[error("no alive member left in the net")]
    EmptyNet,
    #[error("context does not match the class: {0}")]
    ContextMismatch(String),
    #[error("invalid finite table: {0}")]
    InvalidTable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, HypothesisError>;
