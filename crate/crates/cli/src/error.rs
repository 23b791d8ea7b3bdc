use ispls_core::IsplsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {detail}")]
    Data { path: String, detail: String },
    #[error(transparent)]
    Model(#[from] IsplsError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn data(path: impl std::fmt::Display, detail: impl Into<String>) -> Self {
        CliError::Data { path: path.to_string(), detail: detail.into() }
    }

    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_string(), source }
    }

    /// 2 for usage and data errors, 3 for numeric failures inside the solvers.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(
                IsplsError::NumericFailure(_) | IsplsError::DegenerateComponent(_) | IsplsError::OrthogonalSurrogate,
            ) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
