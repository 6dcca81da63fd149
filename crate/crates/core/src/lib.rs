//! Matrix-analytic solver for a multiserver retrial queue with one guard
//! channel, modeled as a level-dependent quasi-birth-death (QBD) process.
//!
//! The level is the number of calls in the retrial orbit, the phase is the
//! number of busy channels (0..=c). The last channel is reserved for
//! high-priority (handover and retrial) traffic; fresh calls are blocked once
//! c-1 channels are busy and join the orbit.
//!
//! The crate provides:
//! - construction and validation of the generator blocks ([`model`]),
//! - O(c) computation of the two nonzero rows of each rate matrix R^(n)
//!   via a matrix-continued-fraction iteration ([`rate_matrix`]),
//! - Taylor-series approximation of those rows in powers of 1/n ([`taylor`]),
//! - the truncated stationary distribution ([`stationary`]),
//! - blocking probabilities and tail diagnostics ([`metrics`]),
//! - independent dense-linear-algebra cross-checks ([`oracle`]).

// Index-based loops here intentionally mirror the subscripted recurrences
// they implement; iterator rewrites would obscure that correspondence.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rate_matrix;
pub mod stationary;
pub mod taylor;

pub use error::Error;
pub use model::{ModelParams, QbdBlocks};
pub use rate_matrix::{IterationSchedule, RateRows};
pub use stationary::StationaryDist;
