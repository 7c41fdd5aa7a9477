//! Volatility forecasting with GARCH-family models, their neural-network
//! counterparts and the GARCH-LSTM hybrid cell.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod garch;
pub mod kv;
pub mod losses;
pub mod nn;
pub mod timeseries;
pub mod training;

pub use error::{Error, Result};
