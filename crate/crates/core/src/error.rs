use thiserror::Error;

#[derive(Debug, Error)]
pub enum MkError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("stencil leaves the chart: {0}")]
    Stencil(String),
    #[error("infeasible transport instance: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MkError {
    /// Process exit code used by the `mk` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            MkError::Validation(_)
            | MkError::Domain(_)
            | MkError::Infeasible(_)
            | MkError::EmptyDomain(_)
            | MkError::Io(_)
            | MkError::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, MkError>;
