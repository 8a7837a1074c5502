use thiserror::Error;

/// Errors raised by model construction, oracles, planners and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("level {level} has no latent representation")]
    MissingLatentRep { level: usize },

    #[error("generation failed: {0}")]
    GenerationFailed(String),

    #[error("every candidate pair assigns zero likelihood to the data")]
    AllCandidatesInfeasible,

    #[error("elliptical planner did not halt within {bound:.1} iterations (reached {iterations})")]
    NonConvergence { iterations: usize, bound: f64 },

    #[error("features are not simplex-valued: row {row} has entry {value:e}")]
    NotSimplex { row: usize, value: f64 },

    #[error("level {level} has no samples")]
    InsufficientData { level: usize },

    #[error("constraint row {row} has zero slack and cannot be normalized")]
    DegenerateRow { row: usize },

    #[error("matrix {index} of the sequence is not PSD with trace at most 1: {detail}")]
    NotPsd { index: usize, detail: String },

    #[error("hypothesis family is not realizable: {0}")]
    RealizabilityViolation(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid reward: {0}")]
    InvalidReward(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
