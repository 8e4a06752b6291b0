//! Equilibrium simulation for economies whose agents disagree about
//! zero-probability events, and Monte Carlo measurement of the subjective
//! asset-pricing bubbles that such disagreement produces.

pub mod beliefs;
pub mod cli;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod ks;
pub mod market;
pub mod output;
pub mod paths;
pub mod scenarios;
pub mod stats;
pub mod valuation;

pub use error::{Error, Result};
pub use stats::MonteCarloEstimate;
