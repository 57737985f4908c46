use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration value or malformed config/input file.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The power search bracket cannot satisfy the interference-limited
    /// criterion; carries the gap achieved at the upper bracket end.
    #[error("calibration failed: gap {gap_db:.3} dB at upper bracket {ptx_hi_w:.3e} W exceeds the target")]
    CalibrationFailure { gap_db: f64, ptx_hi_w: f64 },

    /// Not enough samples or points to evaluate an estimator or fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Requested evaluation point lies outside every fitted segment.
    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 0 success, 2 config error,
    /// 3 calibration failure, 4 insufficient data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Domain(_) | Error::OutOfRange(_) => 2,
            Error::CalibrationFailure { .. } => 3,
            Error::InsufficientData(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
