//! Streaming Bayesian change-point inference for bisulfite methylation counts.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: beta-binomial emissions, regime palettes, negative-binomial
//!   sojourn hazards and the single-group transition kernel with its gradients.
//! - [`single`]: particle filter for the single-group change-point model,
//!   optimal finite-state resampling, adaptive-lag smoothing and online
//!   gradient-ascent parameter estimation.
//! - [`paired`]: the case–control state space, discrete particle filter and
//!   backward simulation of posterior trajectories.
//! - [`testing`]: local-fdr step-up procedures at site and region level, plus
//!   classical p-value corrections used for benchmarking.
//! - [`sim`]: synthetic case–control datasets with known ground truth.
//! - [`io`] and [`pipeline`]: count tables, run configuration, result tables
//!   and the end-to-end analysis driver used by the command-line tool.

pub mod error;
pub mod io;
pub mod math;
pub mod model;
pub mod paired;
pub mod pipeline;
pub mod sim;
pub mod single;
pub mod testing;

pub use error::{Error, Result};
