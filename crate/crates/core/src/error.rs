use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis is linearly dependent (gram eigenvalue ratio {ratio:.3e})")]
    DependentBasis { ratio: f64 },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("space mismatch: expected `{expected}`, found `{found}`")]
    SpaceMismatch { expected: String, found: String },

    #[error("level {level} is beyond the represented range 1..={max}")]
    LevelOverflow { level: usize, max: usize },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("oracle `{oracle}` failed on {input}: {reason}")]
    Oracle {
        oracle: String,
        input: String,
        reason: String,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
