//! Bootstrap ensemble of ridge-regularized linear models `f(x, t) = µ(x) + t·τ(x)`.
//!
//! Stands in for MCMC-based estimators: each member plays the role of one
//! posterior draw and all predictive moments come from the spread across
//! members.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use super::belief::{candidate_labels, SamplePosterior};
use super::{CateModel, VARIANCE_FLOOR};
use crate::data::{Arm, Covariates, LabeledSet, Point};
use crate::error::{input, numerical, Result};
use crate::linalg::sample_covariance;

/// Weights of one ensemble member. Both heads act on `[1, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Member {
    fn head(w: &[f64], x: &[f64]) -> f64 {
        w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn mu(&self, x: &[f64]) -> f64 {
        Self::head(&self.mu, x)
    }

    pub fn tau(&self, x: &[f64]) -> f64 {
        Self::head(&self.tau, x)
    }

    pub fn predict(&self, p: Point<'_>) -> f64 {
        self.mu(p.x) + p.arm.indicator() * self.tau(p.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleLinearModel {
    members: Vec<Member>,
    ridge: f64,
    noise_variance: f64,
    dim: usize,
}

/// Ridge solution on the design `[1, x, t, t·x]`. When `rows` hold a single
/// arm the τ-head is fixed at zero and only `[1, x]` is fitted.
fn ridge_member(data: &LabeledSet, rows: &[usize], ridge: f64) -> Result<Member> {
    let d = data.dim();
    let both_arms = rows.iter().any(|&i| data.arms[i] == Arm::Control) && rows.iter().any(|&i| data.arms[i] == Arm::Treated);
    let p = if both_arms { 2 * (d + 1) } else { d + 1 };
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut z = vec![0.0; p];
    for &i in rows {
        let x = data.covariates.row(i);
        let t = data.arms[i].indicator();
        z[0] = 1.0;
        z[1..=d].copy_from_slice(x);
        if both_arms {
            z[d + 1] = t;
            for j in 0..d {
                z[d + 2 + j] = t * x[j];
            }
        }
        for a in 0..p {
            xty[a] += z[a] * data.outcomes[i];
            for b in 0..p {
                xtx[(a, b)] += z[a] * z[b];
            }
        }
    }
    for a in 0..p {
        xtx[(a, a)] += ridge;
    }
    let Some(chol) = xtx.cholesky() else {
        return numerical("ridge normal equations are singular");
    };
    let w = chol.solve(&xty);
    if w.iter().any(|v| !v.is_finite()) {
        return numerical("ridge solution is not finite");
    }
    let mu = w.rows(0, d + 1).iter().copied().collect();
    let tau = if both_arms { w.rows(d + 1, d + 1).iter().copied().collect() } else { vec![0.0; d + 1] };
    Ok(Member { mu, tau })
}

/// Fits `n_members` ridge regressions, each on a bootstrap resample of `data`.
pub fn fit_ensemble<R: Rng + ?Sized>(
    data: &LabeledSet,
    n_members: usize,
    ridge: f64,
    rng: &mut R,
) -> Result<EnsembleLinearModel> {
    if n_members < 2 {
        return input(format!("an ensemble needs at least 2 members, got {n_members}"));
    }
    if data.len() < 2 {
        return input(format!("ensemble fit needs at least 2 labeled points, got {}", data.len()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return input(format!("ridge penalty must be a finite non-negative number, got {ridge}"));
    }
    let n = data.len();
    let mut members = Vec::with_capacity(n_members);
    for _ in 0..n_members {
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        members.push(ridge_member(data, &rows, ridge)?);
    }
    let residual = (0..n)
        .map(|i| {
            let p = data.point(i);
            let mean = members.iter().map(|m| m.predict(p)).sum::<f64>() / n_members as f64;
            (data.outcomes[i] - mean).powi(2)
        })
        .sum::<f64>()
        / n as f64;
    Ok(EnsembleLinearModel { members, ridge, noise_variance: residual.max(VARIANCE_FLOOR), dim: data.dim() })
}

impl EnsembleLinearModel {
    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Member predictions, one row per member and one column per point.
    fn draws(&self, points: &[Point<'_>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.members.len(), points.len(), |m, j| self.members[m].predict(points[j]))
    }
}

/// One row per member: `f(candidate)`, then `f₀, f₁, τ` at each target.
///
/// The outcome column carries only epistemic spread; the noise variance is
/// added when the draws are turned into a belief.
pub fn posterior_draws(model: &EnsembleLinearModel, candidate: Point<'_>, targets: &Covariates) -> Result<SamplePosterior> {
    if candidate.x.len() != model.dim || targets.dim() != model.dim {
        return input("candidate/target dimension does not match the model");
    }
    let labels = candidate_labels(targets.len());
    let draws = DMatrix::from_fn(model.members.len(), labels.len(), |m, c| {
        let member = &model.members[m];
        if c == 0 {
            return member.predict(candidate);
        }
        let x = targets.row((c - 1) / 3);
        match (c - 1) % 3 {
            0 => member.mu(x),
            1 => member.mu(x) + member.tau(x),
            _ => member.tau(x),
        }
    });
    SamplePosterior::new(labels, draws)
}

impl CateModel for EnsembleLinearModel {
    fn name(&self) -> &str {
        "ensemble"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    fn latent_mean(&self, points: &[Point<'_>]) -> Vec<f64> {
        let k = self.members.len() as f64;
        points.iter().map(|&p| self.members.iter().map(|m| m.predict(p)).sum::<f64>() / k).collect()
    }

    fn latent_cov(&self, a: &[Point<'_>], b: &[Point<'_>]) -> DMatrix<f64> {
        let mut all = a.to_vec();
        all.extend_from_slice(b);
        let (_, cov) = sample_covariance(&self.draws(&all));
        cov.view((0, a.len()), (a.len(), b.len())).into_owned()
    }

    fn tau_samples(&self, x: &[f64], k: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..k).map(|_| self.members[rng.random_range(0..self.members.len())].tau(x)).collect()
    }
}
