use thiserror::Error;

/// Errors raised by the calibration, detection and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The requested tail probability lies outside what the embedded
    /// Tracy-Widom table resolves.
    #[error("tail probability {alpha:e} is outside the resolvable range of the Tracy-Widom table")]
    TailResolution { alpha: f64 },

    #[error("calibration infeasible: {0}")]
    CalibrationInfeasible(String),

    #[error("detector already alarmed at t = {0}; reset before stepping")]
    AlreadyAlarmed(u64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
