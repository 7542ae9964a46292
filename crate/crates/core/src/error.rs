use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or prior received parameters outside its domain.
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// A factorization or solve failed, or a block produced non-finite values.
    #[error("numerical failure in {block}{}: {detail}", iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    Numerical {
        block: &'static str,
        iteration: Option<usize>,
        detail: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn numerical(block: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            block,
            iteration: None,
            detail: detail.into(),
        }
    }

    /// Attach the sweep index to a numerical error raised inside a block.
    pub fn at_iteration(self, it: usize) -> Self {
        match self {
            Error::Numerical { block, detail, .. } => Error::Numerical {
                block,
                iteration: Some(it),
                detail,
            },
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}
