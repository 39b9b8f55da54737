//! Uniform joint-Gaussian predictive interface over CATE models.
//!
//! Exact models (the GPs in [`crate::gp`]) and sample-based models (the
//! bootstrap [`ensemble`]) both implement [`CateModel`]. Everything the
//! acquisition functions need is derived from two primitives: the posterior
//! mean of the latent surface `f(x, t)` and its posterior cross-covariance
//! between two sets of points.

pub mod belief;
pub mod ensemble;

use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::data::{Arm, Covariates, Point};

pub use belief::{candidate_belief, empirical_gaussian_fit, JointGaussianBelief, Quantity, SamplePosterior};
pub use ensemble::{fit_ensemble, posterior_draws, EnsembleLinearModel};

/// Predictive variances below this are treated as zero in MI denominators.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Posterior moments of `(f₀(x), f₁(x))` at one covariate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmMoments {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl ArmMoments {
    pub fn tau_mean(&self) -> f64 {
        self.mean[1] - self.mean[0]
    }

    /// `eᵀ Σ e` with `e = [−1, 1]`, clamped at zero.
    pub fn tau_variance(&self) -> f64 {
        (self.cov[0][0] + self.cov[1][1] - 2.0 * self.cov[0][1]).max(0.0)
    }

    pub fn arm_variance(&self, arm: Arm) -> f64 {
        self.cov[arm.index()][arm.index()]
    }
}

/// A fitted CATE estimator exposing joint predictive queries.
///
/// Implementations are immutable after fitting and safe to query from many
/// threads at once.
pub trait CateModel: Send + Sync {
    /// Short identifier used in logs and result files.
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Observation noise variance `σ_n²` added to outcome predictions.
    fn noise_variance(&self) -> f64;

    /// Posterior mean of the latent surface `f(x, t)` at each point.
    fn latent_mean(&self, points: &[Point<'_>]) -> Vec<f64>;

    /// Posterior covariance `Cov[f(a_i), f(b_j)]`.
    fn latent_cov(&self, a: &[Point<'_>], b: &[Point<'_>]) -> DMatrix<f64>;

    /// Posterior variances `Var[f(p)]`, clamped at zero.
    fn latent_var(&self, points: &[Point<'_>]) -> Vec<f64> {
        points
            .iter()
            .map(|p| self.latent_cov(std::slice::from_ref(p), std::slice::from_ref(p))[(0, 0)].max(0.0))
            .collect()
    }

    /// Joint posterior of both potential-outcome surfaces at each row of `xs`.
    fn arm_moments(&self, xs: &Covariates) -> Vec<ArmMoments> {
        xs.rows()
            .map(|x| {
                let pts = [Point::new(x, Arm::Control), Point::new(x, Arm::Treated)];
                let m = self.latent_mean(&pts);
                let c = self.latent_cov(&pts, &pts);
                ArmMoments {
                    mean: [m[0], m[1]],
                    cov: [
                        [c[(0, 0)].max(0.0), 0.5 * (c[(0, 1)] + c[(1, 0)])],
                        [0.5 * (c[(0, 1)] + c[(1, 0)]), c[(1, 1)].max(0.0)],
                    ],
                }
            })
            .collect()
    }

    /// Posterior mean CATE `E[f₁(x) − f₀(x)]` for each row.
    fn predict_tau(&self, xs: &Covariates) -> Vec<f64> {
        self.arm_moments(xs).iter().map(ArmMoments::tau_mean).collect()
    }

    /// `k` draws of `τ(x)` from the model's posterior.
    ///
    /// The default samples the Gaussian marginal; sample-based models return
    /// their own draws.
    fn tau_samples(&self, x: &[f64], k: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        let covs = Covariates::new(x.to_vec(), x.len()).expect("non-empty covariate vector");
        let m = self.arm_moments(&covs)[0];
        let sd = m.tau_variance().sqrt();
        if sd == 0.0 {
            return vec![m.tau_mean(); k];
        }
        let normal = Normal::new(m.tau_mean(), sd).expect("finite moments");
        (0..k).map(|_| normal.sample(rng)).collect()
    }
}

/// Points `(x, arm)` for every row of `xs`.
pub fn points_for_arm(xs: &Covariates, arm: Arm) -> Vec<Point<'_>> {
    xs.rows().map(|x| Point::new(x, arm)).collect()
}
