use thiserror::Error;

/// Errors raised by the fitting modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PssaError {
    #[error("matrix is rank deficient (smallest singular value {smallest:e}, largest {largest:e})")]
    RankDeficient { smallest: f64, largest: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("data point {index} is not unit norm (norm {norm})")]
    NonUnitData { index: usize, norm: f64 },

    #[error("mean is degenerate (resultant norm {0:e})")]
    DegenerateMean(f64),

    #[error("Gram matrix A A^T is singular")]
    SingularGram,

    #[error("integer matrix is not unimodular")]
    NotUnimodular,

    #[error("basis is linearly dependent")]
    DegenerateBasis,

    #[error("point {index} projects to numerical zero")]
    DegenerateProjection { index: usize },

    #[error("unknown example id `{0}`")]
    UnknownExample(String),

    #[error("unknown report section `{0}`")]
    UnknownReportSection(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl PssaError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        PssaError::Dimension(msg.into())
    }

    /// True for errors caused by malformed input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PssaError::Dimension(_)
                | PssaError::NonUnitData { .. }
                | PssaError::UnknownExample(_)
                | PssaError::UnknownReportSection(_)
                | PssaError::Validation(_)
                | PssaError::Io(_)
        )
    }
}

impl From<std::io::Error> for PssaError {
    fn from(e: std::io::Error) -> Self {
        PssaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PssaError>;
