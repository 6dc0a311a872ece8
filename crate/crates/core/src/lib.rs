//! Constant-function market makers for tokenized FX pairs.
//!
//! - [`cfmm`]: sum, product and mixed invariants with fee-aware quoting.
//! - [`arbitrage`]: optimal one-sided arbitrage against an external mid.
//! - [`market_data`]: one-minute bid/ask bars, session slicing, normalization
//!   and a synthetic generator.
//! - [`simulator`]: the intraday session loop and end-of-day P&L metrics.
//! - [`analytics`]: annualization, distribution statistics, parameter sweeps
//!   and the P&L regression.
//! - [`table`]: result tables behind the CSV and JSON exports.

// `!(v > 0.0)` checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod arbitrage;
pub mod cfmm;
pub mod error;
pub mod market_data;
pub mod par;
pub mod simulator;
pub mod table;

pub use arbitrage::{ArbConfig, ArbDirection, ArbSolution};
pub use cfmm::{CfmmRule, Fill, Known, PoolState, RuleKind, Side};
pub use error::{Error, Result};
