use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("memory budget of {budget} live window states exceeded")]
    Budget { budget: usize },

    #[error("timed out after {secs:.1} s")]
    Timeout { secs: f64 },

    #[error("chain has {count} BSCCs; evaluate each BSCC separately")]
    MultipleBsccs { count: usize },

    #[error("objective not differentiable; synthesize against a Distance surrogate")]
    NotDifferentiable,

    #[error("non-finite {quantity} at step {step}")]
    NonFinite { step: usize, quantity: String },

    #[error("all {restarts} restarts aborted: {diagnostics}")]
    AllRestartsFailed { restarts: usize, diagnostics: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by resource limits rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::Timeout { .. })
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::InvalidStrategy(_)
                | Error::InvalidObjective(_)
                | Error::InvalidConfig(_)
                | Error::DimensionMismatch { .. }
                | Error::NotDifferentiable
                | Error::MultipleBsccs { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
