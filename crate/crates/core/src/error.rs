use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension {0} is not divisible by 3")]
    NotDivisibleByThree(usize),

    #[error("dimension {n} exceeds the resource guard ({max})")]
    ResourceGuard { n: usize, max: usize },

    #[error("eigendecomposition failed to converge")]
    NonConvergence,

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("measure vanishes on every cell; normalization undefined")]
    ZeroMeasure,

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 configuration, 3 numerical failure,
    /// 4 resource guard, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::NotDivisibleByThree(_) => 2,
            Error::NonConvergence | Error::DegenerateBasis(_) | Error::ZeroMeasure | Error::Undefined(_) => 3,
            Error::ResourceGuard { .. } => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
