use thiserror::Error;

/// Errors raised by the receiver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("odd bit count {0}: QPSK needs pairs of bits")]
    OddBitCount(usize),

    #[error("frame layout rejected: {0}")]
    Frame(String),

    #[error("training sequence not identifiable: {0}")]
    Identifiability(String),

    #[error("channel matrix singular at frequency bin {bin}")]
    SingularChannel { bin: usize },

    #[error("transfer-matrix estimation diverged after iteration {iteration}: fit residuals {residuals:?}")]
    Diverged {
        iteration: usize,
        residuals: Vec<f64>,
    },

    #[error("binary format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable machine-readable error kind, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Shape(_) => "shape",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::OddBitCount(_) => "odd_bit_count",
            Error::Frame(_) => "frame",
            Error::Identifiability(_) => "identifiability",
            Error::SingularChannel { .. } => "singular_channel",
            Error::Diverged { .. } => "diverged",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
