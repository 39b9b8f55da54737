//! Exact GP regression over `X × {0, 1}`.

use nalgebra::{DMatrix, DVector};

use super::kernel::GpKernel;
use crate::data::{Arm, Covariates, LabeledSet, Point};
use crate::error::{input, Result};
use crate::linalg::cholesky_with_jitter;
use crate::posterior::{ArmMoments, CateModel, JointGaussianBelief, Quantity};

/// A fitted GP: Cholesky factor of `K + σ_n² I` and weights `α = (K + σ_n² I)⁻¹ y`
/// for outcomes centered by their training mean.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kernel: GpKernel,
    train: LabeledSet,
    outcome_mean: f64,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    centered: DVector<f64>,
    jitter: f64,
}

/// Fits a GP with fixed hyperparameters.
///
/// The jitter starts at the kernel's configured value and escalates ×10 up
/// to `1e-3` before the fit is reported as a numerical failure.
pub fn fit_gp(data: &LabeledSet, kernel: &GpKernel) -> Result<GpPosterior> {
    kernel.validate()?;
    if data.is_empty() {
        return input("cannot fit a GP to an empty labeled set");
    }
    if data.len() < 2 {
        return input(format!("GP fit needs at least 2 labeled points, got {}", data.len()));
    }
    if data.dim() != kernel.dim() {
        return input(format!("data has {} covariates, kernel expects {}", data.dim(), kernel.dim()));
    }
    let n = data.len();
    let outcome_mean = data.outcomes.iter().sum::<f64>() / n as f64;
    let centered = DVector::from_iterator(n, data.outcomes.iter().map(|y| y - outcome_mean));

    let points = data.points();
    let mut k = kernel.gram(&points);
    let noise = kernel.noise_variance();
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let (chol, jitter) = cholesky_with_jitter(&k, kernel.jitter())?;
    let alpha = chol.solve(&centered);
    Ok(GpPosterior {
        kernel: kernel.clone(),
        train: data.clone(),
        outcome_mean,
        chol: chol.unpack(),
        alpha,
        centered,
        jitter,
    })
}

impl GpPosterior {
    pub fn kernel(&self) -> &GpKernel {
        &self.kernel
    }

    pub fn training_data(&self) -> &LabeledSet {
        &self.train
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn outcome_mean(&self) -> f64 {
        self.outcome_mean
    }

    /// `log p(y | X, θ) = −½ yᵀα − Σ log L_ii − (n/2) log 2π` on centered outcomes.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.centered.len() as f64;
        let fit = -0.5 * self.centered.dot(&self.alpha);
        let logdet: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum();
        fit - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// `L⁻¹ K(X, points)`, an `n × m` matrix.
    fn whitened_cross(&self, points: &[Point<'_>]) -> DMatrix<f64> {
        let train = self.train.points();
        let k = self.kernel.cross(&train, points);
        self.chol
            .solve_lower_triangular(&k)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Joint belief over `(y at candidate, f₀(target), f₁(target))`.
    pub fn joint_belief(&self, candidate: Point<'_>, target: &[f64]) -> Result<JointGaussianBelief> {
        if candidate.x.len() != self.dim() || target.len() != self.dim() {
            return input("candidate/target dimension does not match the GP");
        }
        let pts = [candidate, Point::new(target, Arm::Control), Point::new(target, Arm::Treated)];
        let mean = DVector::from_vec(self.latent_mean(&pts));
        let mut cov = self.latent_cov(&pts, &pts);
        crate::linalg::symmetrize(&mut cov);
        for i in 0..3 {
            cov[(i, i)] = cov[(i, i)].max(0.0);
        }
        cov[(0, 0)] += self.noise_variance();
        let labels = vec![
            Quantity::Outcome,
            Quantity::PotentialOutcome { target: 0, arm: Arm::Control },
            Quantity::PotentialOutcome { target: 0, arm: Arm::Treated },
        ];
        JointGaussianBelief::new(labels, mean, cov)
    }
}

impl CateModel for GpPosterior {
    fn name(&self) -> &str {
        self.kernel.kind().name()
    }

    fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn noise_variance(&self) -> f64 {
        self.kernel.noise_variance()
    }

    fn latent_mean(&self, points: &[Point<'_>]) -> Vec<f64> {
        let train = self.train.points();
        let k = self.kernel.cross(points, &train);
        (k * &self.alpha).iter().map(|v| v + self.outcome_mean).collect()
    }

    fn latent_cov(&self, a: &[Point<'_>], b: &[Point<'_>]) -> DMatrix<f64> {
        let va = self.whitened_cross(a);
        let prior = self.kernel.cross(a, b);
        if std::ptr::eq(a, b) {
            prior - va.transpose() * &va
        } else {
            let vb = self.whitened_cross(b);
            prior - va.transpose() * vb
        }
    }

    fn latent_var(&self, points: &[Point<'_>]) -> Vec<f64> {
        let v = self.whitened_cross(points);
        points
            .iter()
            .enumerate()
            .map(|(j, p)| (self.kernel.prior_variance(*p) - v.column(j).norm_squared()).max(0.0))
            .collect()
    }

    fn arm_moments(&self, xs: &Covariates) -> Vec<ArmMoments> {
        let mut pts = Vec::with_capacity(2 * xs.len());
        for x in xs.rows() {
            pts.push(Point::new(x, Arm::Control));
            pts.push(Point::new(x, Arm::Treated));
        }
        let means = self.latent_mean(&pts);
        let v = self.whitened_cross(&pts);
        (0..xs.len())
            .map(|i| {
                let (c, t) = (2 * i, 2 * i + 1);
                let vc = v.column(c);
                let vt = v.column(t);
                let k00 = self.kernel.eval_unchecked(pts[c], pts[c]) - vc.norm_squared();
                let k11 = self.kernel.eval_unchecked(pts[t], pts[t]) - vt.norm_squared();
                let k01 = self.kernel.eval_unchecked(pts[c], pts[t]) - vc.dot(&vt);
                ArmMoments {
                    mean: [means[c], means[t]],
                    cov: [[k00.max(0.0), k01], [k01, k11.max(0.0)]],
                }
            })
            .collect()
    }
}
