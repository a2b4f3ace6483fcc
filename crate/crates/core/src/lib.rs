//! Dynamic Black-Litterman portfolio construction and backtesting.
//!
//! Absolute views come from per-asset factor regressions, are blended with
//! equilibrium returns through an elastic-net penalized least-squares
//! estimator, and feed a box-constrained mean-variance optimizer. The
//! backtester rolls this over a window whose length reacts to realized
//! portfolio volatility.

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod black_litterman;
pub mod cli;
pub mod data;
pub mod elastic_net;
pub mod error;
pub mod factor_model;
pub mod fmt;
pub mod linalg;
pub mod optimizer;
pub mod simulate;

pub use error::{Error, ErrorKind, Result};
