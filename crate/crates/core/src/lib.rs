//! Active learning of conditional average treatment effects.
//!
//! The crate is organised around a small number of pieces:
//!
//! * [`gp`]: CMGP and NSGP Gaussian-process estimators with exact joint
//!   predictive posteriors over candidate outcomes and target potential outcomes.
//! * [`posterior`]: the [`posterior::CateModel`] interface shared by exact and
//!   sample-based estimators, joint Gaussian beliefs and the empirical Gaussian fit.
//! * [`acquisition`]: Causal-EPIG utilities and the baseline acquisition functions.
//! * [`dgp`]: synthetic and semi-synthetic data-generating processes.
//! * [`active`]: the budgeted batch acquisition loop.
//! * [`evaluation`]: √PEHE, relative improvement and cross-seed aggregation.

pub mod acquisition;
pub mod active;
pub mod data;
pub mod dgp;
pub mod error;
pub mod evaluation;
pub mod gp;
pub mod linalg;
pub mod posterior;
pub mod propensity;
pub mod rng;

pub use error::{Error, Result};
