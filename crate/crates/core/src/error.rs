//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by field evaluation, flow integration, configuration
/// handling, braid extraction and the operator layer.
#[derive(Debug, Error)]
pub enum KinematError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("particle count mismatch: expected {expected}, got {got}")]
    ParticleMismatch { expected: usize, got: usize },

    #[error("strand count mismatch: expected {expected}, got {got}")]
    StrandMismatch { expected: usize, got: usize },

    #[error("integrator step size underflow at s = {at} (h = {step:e})")]
    StepUnderflow { at: f64, step: f64 },

    #[error("near-collision: point separation {separation:e} below {limit:e}")]
    NearCollision { separation: f64, limit: f64 },

    #[error("ambiguous point matching: point {point} has {candidates} candidates within tolerance")]
    AmbiguousMatch { point: usize, candidates: usize },

    #[error("lexicographic tie could not be resolved after {attempts} axis rotations")]
    UnresolvedTie { attempts: usize },

    #[error("path endpoints are not a permutation of the start configuration")]
    NotAPermutation,

    #[error("representation rejected: {0}")]
    InvalidRepresentation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = KinematError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(KinematError::DimensionMismatch { expected, got })
    }
}
