//! LP-based online matching for rideshare dispatch with a tunable trade-off
//! between platform profit and group-level driver fairness.
//!
//! The crate covers the whole experiment loop: instance construction
//! ([`instance`]), benchmark programs and their solver ([`lp`]), dependent
//! rounding on stars ([`rounding`]), online policies ([`policies`]), the
//! Monte Carlo and exact evaluators ([`simulator`]) and parameter sweeps
//! ([`experiment`]).

pub mod error;
pub mod experiment;
pub mod instance;
pub mod lp;
pub mod policies;
pub mod rounding;
pub mod seed;
pub mod simulator;

pub use error::{Error, Result};
