use thiserror::Error;

/// Errors produced by model construction, analysis, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// The requested mean degrees are not achievable for the given class
    /// priors: some derived edge probability exceeds 1.
    #[error("infeasible model: edge probability m[{from}][{to}] = {probability} exceeds 1")]
    InfeasibleModel {
        from: usize,
        to: usize,
        probability: f64,
    },

    #[error("dimension error: {0}")]
    DimensionError(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("model assumption violated: {0}")]
    AssumptionViolation(String),

    /// All pairwise neighborhood-distribution distances vanished; the
    /// normalized multi-layer gain is undefined.
    #[error("degenerate pattern: all pairwise distribution distances are zero")]
    DegeneratePattern,

    #[error("class {0} has no nodes")]
    EmptyClass(usize),

    #[error("parse error in {path} at line {line}: {message}")]
    ParseError {
        path: String,
        line: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    ShapeError(String),

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    /// A sweep grid point failed; wraps the underlying error so the
    /// offending parameter value is identified.
    #[error("sweep point {param}: {source}")]
    SweepPoint {
        param: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
