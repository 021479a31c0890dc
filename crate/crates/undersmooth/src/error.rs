//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {name:?} (index {index}) is not binary: value {value} at row {row}")]
    NonBinaryColumn {
        index: usize,
        name: String,
        row: usize,
        value: f64,
    },

    #[error("subset count {count} exceeds the configured cap {cap}")]
    SubsetCapExceeded { count: u128, cap: u128 },

    #[error("row group {index} is empty")]
    EmptyGroup { index: usize },

    #[error("penalty loading for column {index} is zero; prune constant-zero columns first")]
    ZeroLoading { index: usize },

    #[error("invalid penalty plan: {reason}")]
    InvalidPenaltyPlan { reason: String },

    #[error("invalid argument for {what}: {reason}")]
    InvalidArgument { what: String, reason: String },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("coordinate descent did not converge within {max_iter} sweeps (kkt violation {violation:.3e})")]
    NotConverged { max_iter: usize, violation: f64 },

    #[error("outcome is constant; nothing to fit")]
    ConstantOutcome,

    #[error("dataset has no treatment column but the operation requires one")]
    MissingTreatment,

    #[error("treatment arm {arm} has {n} observations; at least {min} required")]
    ArmTooSmall { arm: u8, n: usize, min: usize },

    #[error("model has {slots} slots but only {n} observations")]
    TooManySlots { slots: usize, n: usize },

    #[error("functional requires slot {slot} which was dropped for rank deficiency")]
    DroppedSlot { slot: String },

    #[error("restricted covariance block is singular at tolerance {tol:.1e}")]
    SingularCovariance { tol: f64 },

    #[error("functional {kind} does not produce a confidence interval")]
    NotIntervalValued { kind: String },

    #[error("csv ingest failed: {reason}")]
    Ingest { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            what: what.into(),
            reason: reason.into(),
        }
    }
}
