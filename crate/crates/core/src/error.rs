use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("covariate `{covariate}` value {value} outside the fitted range [{lower}, {upper}]")]
    Domain {
        covariate: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution parameter: {0}")]
    Parameter(String),

    #[error("zero density in every state at t = {t}")]
    Likelihood { t: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error(
        "optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        best_theta: Vec<f64>,
        best_objective: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("failed to parse `{path}` at row {row}, column `{column}`: {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("data is missing columns required by the model: {}", .missing.join(", "))]
    Schema { missing: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Domain { .. }
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::Parameter(_)
            | Error::Likelihood { .. }
            | Error::Singular(_)
            | Error::NonConvergence { .. }
            | Error::Numeric(_) => 3,
        }
    }
}
