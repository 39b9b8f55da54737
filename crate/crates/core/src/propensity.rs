//! Ridge-regularized logistic regression for the propensity score `π(x)`.

use nalgebra::{DMatrix, DVector};

use crate::data::{Arm, Covariates};
use crate::error::{input, numerical, Result};

pub const PI_MIN: f64 = 0.01;
pub const PI_MAX: f64 = 0.99;
const MAX_ITERS: usize = 100;
const TOLERANCE: f64 = 1e-8;

/// Fitted logistic model `π(x) = sigmoid(w₀ + wᵀx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    weights: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood plus `ridge/2·‖w‖²`.
fn objective(design: &DMatrix<f64>, t: &DVector<f64>, w: &DVector<f64>, ridge: f64) -> f64 {
    let n = design.nrows() as f64;
    let z = design * w;
    let nll: f64 = z
        .iter()
        .zip(t.iter())
        .map(|(&z, &t)| {
            // log(1 + e^z) − t·z, computed stably.
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - t * z
        })
        .sum();
    nll / n + 0.5 * ridge * w.norm_squared()
}

/// Damped Newton iterations on the penalized mean log-likelihood.
///
/// The intercept is penalized along with the slopes, so perfectly separated
/// data (e.g. all treated) still has a finite solution; predictions are then
/// clamped to `[0.01, 0.99]`.
pub fn fit_propensity(xs: &Covariates, arms: &[Arm], ridge: f64) -> Result<PropensityModel> {
    if xs.len() != arms.len() {
        return input(format!("{} covariate rows but {} treatments", xs.len(), arms.len()));
    }
    if xs.is_empty() {
        return input("cannot fit a propensity model without data");
    }
    if !(ridge > 0.0 && ridge.is_finite()) {
        return input(format!("propensity ridge must be positive, got {ridge}"));
    }
    let (n, d) = (xs.len(), xs.dim());
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { xs.row(i)[j - 1] });
    let t = DVector::from_iterator(n, arms.iter().map(|a| a.indicator()));
    let mut w = DVector::zeros(d + 1);
    let mut value = objective(&design, &t, &w, ridge);
    for _ in 0..MAX_ITERS {
        let p = (&design * &w).map(sigmoid);
        let grad = design.transpose() * (&p - &t) / n as f64 + ridge * &w;
        if grad.norm() < TOLERANCE {
            return Ok(PropensityModel { weights: w.iter().copied().collect() });
        }
        let weights = p.map(|p| p * (1.0 - p));
        let mut hess = DMatrix::from_fn(d + 1, d + 1, |a, b| {
            (0..n).map(|i| weights[i] * design[(i, a)] * design[(i, b)]).sum::<f64>() / n as f64
        });
        for a in 0..=d {
            hess[(a, a)] += ridge;
        }
        let Some(chol) = hess.cholesky() else {
            return numerical("propensity Hessian is not positive definite");
        };
        let step = chol.solve(&grad);
        let mut scale = 1.0;
        loop {
            let trial = &w - scale * &step;
            let trial_value = objective(&design, &t, &trial, ridge);
            if trial_value <= value || scale < 1e-10 {
                w = trial;
                value = trial_value;
                break;
            }
            scale *= 0.5;
        }
    }
    numerical(format!("propensity fit did not converge in {MAX_ITERS} Newton iterations"))
}

impl PropensityModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `π̂(x)` clamped to `[0.01, 0.99]`.
    pub fn predict_pi(&self, x: &[f64]) -> f64 {
        let z = self.weights[0] + self.weights[1..].iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        sigmoid(z).clamp(PI_MIN, PI_MAX)
    }
}
