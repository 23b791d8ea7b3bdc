use thiserror::Error;

pub type Result<T> = std::result::Result<T, IsplsError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IsplsError {
    #[error("study `{study}`: {detail}")]
    DimensionMismatch { study: String, detail: String },

    #[error("study `{study}` contains a non-finite value in {matrix} at row {row}, column {col}")]
    NonFinite { study: String, matrix: &'static str, row: usize, col: usize },

    #[error("study `{study}` has {rows} rows; at least {min} are required")]
    TooFewRows { study: String, rows: usize, min: usize },

    #[error("at least {min} studies are required, got {got}")]
    TooFewStudies { got: usize, min: usize },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("no signal: the cross-product matrix is identically zero")]
    NoSignal,

    #[error("degenerate component: t't = {0:e} is below 1e-12")]
    DegenerateComponent(f64),

    #[error("orthogonal surrogate: ZZ'c vanishes")]
    OrthogonalSurrogate,

    #[error("non-finite value produced by the solver ({0})")]
    NumericFailure(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl IsplsError {
    pub fn invalid(name: &'static str, detail: impl Into<String>) -> Self {
        IsplsError::InvalidParameter { name, detail: detail.into() }
    }
}
