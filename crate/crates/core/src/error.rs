use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("site index {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dense matrix requested for {0} sites (limit is 8)")]
    DenseTooLarge(usize),

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error(
        "lanczos did not converge in sector sz={sector} after {iterations} iterations (best residual {residual:e})"
    )]
    NotConverged {
        sector: i32,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid reservoir parameters: {0}")]
    InvalidReservoir(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("subsystem of {0} sites exceeds the 12-site limit")]
    SubsystemTooLarge(usize),

    #[error("reflection expectation has imaginary part {0:e}")]
    ImaginaryResidue(f64),

    #[error("invalid learner input: {0}")]
    InvalidInput(String),

    #[error("perplexity calibration failed for row {row}: reached {achieved}, target {target}")]
    Calibration { row: usize, achieved: f64, target: f64 },

    #[error("non-finite gradient at t-SNE iteration {0}")]
    NonFiniteGradient(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} failed: {message}")]
    Stage { stage: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
