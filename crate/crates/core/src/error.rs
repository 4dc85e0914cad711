use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is numerically singular (min eigenvalue {min_eigenvalue:e})")]
    Singular { min_eigenvalue: f64 },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("infeasible power budget: {budget} exceeds the sum of per-carrier caps {cap_sum}")]
    Infeasible { budget: f64, cap_sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("optimizer did not converge after {iterations} iterations (duality gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("efficiency ratio is undefined: maximum and minimum sum rate coincide ({value})")]
    DegenerateRatio { value: f64 },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
