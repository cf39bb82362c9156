//! File formats, run configuration, reports, the Monte Carlo harness and the
//! command-line driver for `twfe-core`.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod config;
mod error;
pub mod io;
pub mod montecarlo;
pub mod report;
pub mod run;
pub mod selfcheck;

pub use error::AppError;
