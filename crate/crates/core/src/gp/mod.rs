//! Gaussian-process CATE estimators: the causal multi-task GP (CMGP) and the
//! arm-specific non-stationary GP (NSGP).

pub mod hyper;
pub mod kernel;
pub mod posterior;

pub use hyper::{heuristic_kernel, optimize_hyperparams, SearchConfig};
pub use kernel::{
    cmgp_joint_kernel, matern52_kernel, nsgp_joint_kernel, rbf_kernel, CoregionalizationConfig, GpKernel,
    GpModelKind, KernelConfig, KernelFamily,
};
pub use posterior::{fit_gp, GpPosterior};
