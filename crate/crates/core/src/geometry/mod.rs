//! Consistent-set geometry.
//!
//! A [`ConvexBody`] is a Euclidean ball intersected with finitely many
//! halfspaces. Everything the Steiner learners need is computed from a single
//! primitive, the Euclidean projection onto the body (Dykstra's alternating
//! projections): distances to the body, membership in the inflated set
//! `S + zB`, support values and widths. Volumes of inflated sets are estimated
//! by uniform rejection sampling.

mod body;
mod qp;
mod vector;
mod volume;

use thiserror::Error;

pub use body::{BoundingBox, BoxFaces, ConvexBody, Halfspace, ProjectionConfig, SupportPoint};
pub use vector::{dist, dot, norm, norm_sq, unit_ball_volume, Vector};
pub use volume::{
    estimate_volume, estimate_volume_with, median_cut, quantile_by_bisection, Envelope,
    EnvelopePolicy, HalfspaceRegion, InflatedCloud, MedianCut, VolumeEstimate, VolumeOptions,
    DEFAULT_MC_SAMPLES, MEDIAN_REL_TOL,
};

/// Slack used when deciding membership in `S + zB`.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    /// Dykstra did not settle; the body is empty or nearly so.
    #[error(
        "projection did not converge within {sweeps} sweeps (residual violation {residual:e})"
    )]
    NonConvergence { sweeps: usize, residual: f64 },
    /// No Monte-Carlo sample hit the region.
    #[error("no sample out of {samples} landed in the target region")]
    DegenerateEstimate { samples: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("halfspace normal must have unit norm, got {0}")]
    NonUnitNormal(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
