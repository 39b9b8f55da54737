//! Experiment runner for active CATE learning benchmarks: configuration,
//! the run matrix, result persistence and summaries.

pub mod config;
pub mod gendata;
pub mod runner;
pub mod summary;

pub use config::{Cell, ExperimentConfig};
pub use runner::{run_matrix, RunOptions};
