//! Experiment orchestration for the svdro controllers: paired benchmarks,
//! kernel ablations, convergence and discrepancy traces, compute scaling,
//! and the CSV schemas they emit.

pub mod config;
pub mod error;
pub mod runner;
pub mod scale;
pub mod stats;
pub mod tables;
pub mod trace;

pub use config::{RunConfig, Resolved};
pub use error::{BenchError, BenchResult};
