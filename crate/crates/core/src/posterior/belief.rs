//! Labeled joint Gaussian beliefs and the empirical Gaussian fit of posterior draws.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::CateModel;
use crate::data::{Arm, Covariates, Point};
use crate::error::{input, Result};
use crate::linalg::{sample_covariance, symmetrize};

/// Identity of one predictive quantity inside a belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// Noisy outcome `y` at the candidate.
    Outcome,
    /// Latent potential outcome `f_t(x*_j)` at target `j`.
    PotentialOutcome { target: usize, arm: Arm },
    /// CATE `τ(x*_j)` at target `j`.
    Effect { target: usize },
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Outcome => write!(f, "y@candidate"),
            Quantity::PotentialOutcome { target, arm } => write!(f, "f{}@target_{target}", arm.index()),
            Quantity::Effect { target } => write!(f, "tau@target_{target}"),
        }
    }
}

/// Mean vector and covariance matrix over a labeled set of quantities.
#[derive(Debug, Clone)]
pub struct JointGaussianBelief {
    labels: Vec<Quantity>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl JointGaussianBelief {
    pub fn new(labels: Vec<Quantity>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return input(format!(
                "belief with {n} labels has mean of length {} and a {}×{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            ));
        }
        for i in 0..n {
            if labels[..i].contains(&labels[i]) {
                return input(format!("duplicate belief label {}", labels[i]));
            }
        }
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            if cov[(i, i)] < -1e-10 * scale {
                return input(format!("negative variance for {}", labels[i]));
            }
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale {
                    return input("belief covariance is not symmetric");
                }
            }
        }
        let mut cov = cov;
        symmetrize(&mut cov);
        for i in 0..n {
            cov[(i, i)] = cov[(i, i)].max(0.0);
        }
        Ok(Self { labels, mean, cov })
    }

    pub fn labels(&self) -> &[Quantity] {
        &self.labels
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: Quantity) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn indices_of(&self, labels: &[Quantity]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| self.index_of(*l).ok_or_else(|| crate::Error::Input(format!("label {l} not in belief"))))
            .collect()
    }

    pub fn variance(&self, label: Quantity) -> Option<f64> {
        self.index_of(label).map(|i| self.cov[(i, i)])
    }

    pub fn covariance(&self, a: Quantity, b: Quantity) -> Option<f64> {
        Some(self.cov[(self.index_of(a)?, self.index_of(b)?)])
    }

    /// Covariance sub-block over `rows × cols` (positional indices).
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.cov[(rows[i], cols[j])])
    }

    /// Marginal belief over a subset of the labels, in the given order.
    pub fn marginal(&self, labels: &[Quantity]) -> Result<JointGaussianBelief> {
        let idx = self.indices_of(labels)?;
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        JointGaussianBelief::new(labels.to_vec(), mean, self.block(&idx, &idx))
    }
}

/// Posterior draws (one row per draw) over labeled quantities.
#[derive(Debug, Clone)]
pub struct SamplePosterior {
    labels: Vec<Quantity>,
    draws: DMatrix<f64>,
}

impl SamplePosterior {
    pub fn new(labels: Vec<Quantity>, draws: DMatrix<f64>) -> Result<Self> {
        if draws.ncols() != labels.len() {
            return input(format!("{} draw columns for {} labels", draws.ncols(), labels.len()));
        }
        if draws.nrows() < 2 {
            return input(format!("need at least 2 posterior draws, got {}", draws.nrows()));
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return input("posterior draws contain non-finite values");
        }
        Ok(Self { labels, draws })
    }

    pub fn labels(&self) -> &[Quantity] {
        &self.labels
    }

    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn column(&self, label: Quantity) -> Option<Vec<f64>> {
        let j = self.labels.iter().position(|l| *l == label)?;
        Some(self.draws.column(j).iter().copied().collect())
    }
}

/// Fits a multivariate Gaussian to posterior draws: column means and the
/// unbiased sample covariance.
pub fn empirical_gaussian_fit(samples: &SamplePosterior) -> Result<JointGaussianBelief> {
    if samples.n_draws() < 2 {
        return input("empirical Gaussian fit needs at least 2 draws");
    }
    let (mean, cov) = sample_covariance(&samples.draws);
    JointGaussianBelief::new(samples.labels.clone(), DVector::from_vec(mean), cov)
}

/// Labels in the canonical order: `y` first, then `f₀, f₁, τ` for each target.
pub fn candidate_labels(n_targets: usize) -> Vec<Quantity> {
    let mut labels = Vec::with_capacity(1 + 3 * n_targets);
    labels.push(Quantity::Outcome);
    for j in 0..n_targets {
        labels.push(Quantity::PotentialOutcome { target: j, arm: Arm::Control });
        labels.push(Quantity::PotentialOutcome { target: j, arm: Arm::Treated });
        labels.push(Quantity::Effect { target: j });
    }
    labels
}

/// Joint belief over `(y at candidate, f₀/f₁/τ at every target)` for any model.
///
/// `τ` entries are the linear contrast `f₁ − f₀`; `Var[y]` includes the
/// model's noise variance while latent entries do not.
pub fn candidate_belief(
    model: &dyn CateModel,
    candidate: Point<'_>,
    targets: &Covariates,
) -> Result<JointGaussianBelief> {
    if candidate.x.len() != model.dim() || targets.dim() != model.dim() {
        return input("candidate/target dimension does not match the model");
    }
    let mut latent = Vec::with_capacity(1 + 2 * targets.len());
    latent.push(candidate);
    for x in targets.rows() {
        latent.push(Point::new(x, Arm::Control));
        latent.push(Point::new(x, Arm::Treated));
    }
    let mean_latent = model.latent_mean(&latent);
    let cov_latent = model.latent_cov(&latent, &latent);

    // Linear map from the latent vector (f_c, f0_1, f1_1, ...) to the labels.
    let labels = candidate_labels(targets.len());
    let q = labels.len();
    let mut map = DMatrix::zeros(q, latent.len());
    map[(0, 0)] = 1.0;
    for j in 0..targets.len() {
        let (r, c) = (1 + 3 * j, 1 + 2 * j);
        map[(r, c)] = 1.0;
        map[(r + 1, c + 1)] = 1.0;
        map[(r + 2, c)] = -1.0;
        map[(r + 2, c + 1)] = 1.0;
    }
    let mean = &map * DVector::from_vec(mean_latent);
    let mut cov = &map * cov_latent * map.transpose();
    symmetrize(&mut cov);
    cov[(0, 0)] += model.noise_variance();
    for i in 0..q {
        cov[(i, i)] = cov[(i, i)].max(0.0);
    }
    JointGaussianBelief::new(labels, mean, cov)
}
