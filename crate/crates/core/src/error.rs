use thiserror::Error;

/// Errors raised by the estimators, the simulator and the I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series too short: need at least {needed} returns, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("window [{lo:.6}, {hi:.6}] does not fit inside the sample")]
    WindowOutOfBounds { lo: f64, hi: f64 },

    #[error("no observations inside window [{lo:.6}, {hi:.6}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("insufficient bins on the {side} side: need {needed}, have {available}")]
    InsufficientBins {
        side: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("all {0} bins were removed by truncation")]
    AllBinsTruncated(usize),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
