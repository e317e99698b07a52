//! Noise-robust estimation and testing of price jumps, volatility jumps and
//! the discontinuous leverage effect from high-frequency prices.

pub mod dle;
pub mod error;
pub mod io;
pub mod jumploc;
pub mod mc;
pub mod pipeline;
pub mod preavg;
pub mod rng;
pub mod series;
pub mod simkit;
pub mod spectral;
pub mod spotvol;
pub mod stats;

pub use error::{Error, Result};
pub use series::TickSeries;
pub use stats::TestResult;
