//! Single-candidate utilities built directly from joint beliefs.
//!
//! These follow the definitions term by term and serve as the reference
//! path; [`super::score_pool`] computes the same quantities in batches.

use rand::distr::Open01;
use rand::{Rng, RngCore};
use statrs::distribution::{ContinuousCDF, Normal};

use super::mi::{gaussian_mi_block, gaussian_mi_scalar};
use super::ScoreVector;
use crate::data::{Arm, Covariates, Point};
use crate::error::{input, Result};
use crate::posterior::{candidate_belief, CateModel, Quantity, VARIANCE_FLOOR};
use crate::propensity::PropensityModel;

fn require_targets(targets: &Covariates) -> Result<()> {
    if targets.is_empty() {
        return input("target set is empty");
    }
    Ok(())
}

/// Mean over targets of `I(y; τ(x*))`.
pub fn causal_epig_tau(model: &dyn CateModel, candidate: Point<'_>, targets: &Covariates) -> Result<f64> {
    require_targets(targets)?;
    let b = candidate_belief(model, candidate, targets)?;
    let vy = b.variance(Quantity::Outcome).unwrap_or(0.0);
    let mut total = 0.0;
    for j in 0..targets.len() {
        let t = Quantity::Effect { target: j };
        total += gaussian_mi_scalar(vy, b.variance(t).unwrap_or(0.0), b.covariance(Quantity::Outcome, t).unwrap_or(0.0))?;
    }
    Ok(total / targets.len() as f64)
}

fn po_pair(j: usize) -> [Quantity; 2] {
    [
        Quantity::PotentialOutcome { target: j, arm: Arm::Control },
        Quantity::PotentialOutcome { target: j, arm: Arm::Treated },
    ]
}

/// Mean over targets of `I(y; (f₀(x*), f₁(x*)))`.
pub fn causal_epig_mu(model: &dyn CateModel, candidate: Point<'_>, targets: &Covariates) -> Result<f64> {
    require_targets(targets)?;
    let b = candidate_belief(model, candidate, targets)?;
    let mut total = 0.0;
    for j in 0..targets.len() {
        total += gaussian_mi_block(&b, &[Quantity::Outcome], &po_pair(j))?;
    }
    Ok(total / targets.len() as f64)
}

/// Mean over targets of `I(y; f₀(x*)) + I(y; f₁(x*))`.
pub fn causal_epig_mu_additive(model: &dyn CateModel, candidate: Point<'_>, targets: &Covariates) -> Result<f64> {
    require_targets(targets)?;
    let b = candidate_belief(model, candidate, targets)?;
    let y = Quantity::Outcome;
    let vy = b.variance(y).unwrap_or(0.0);
    let mut total = 0.0;
    for j in 0..targets.len() {
        for q in po_pair(j) {
            total += gaussian_mi_scalar(vy, b.variance(q).unwrap_or(0.0), b.covariance(y, q).unwrap_or(0.0))?;
        }
    }
    Ok(total / targets.len() as f64)
}

/// Which target quantities the global formulation conditions on jointly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalEstimand {
    Tau,
    PotentialOutcomes,
}

/// `I(y; q(X_tar))` with the whole target vector treated jointly.
pub fn causal_epig_global(
    model: &dyn CateModel,
    candidate: Point<'_>,
    targets: &Covariates,
    estimand: GlobalEstimand,
) -> Result<f64> {
    require_targets(targets)?;
    let b = candidate_belief(model, candidate, targets)?;
    let block: Vec<Quantity> = match estimand {
        GlobalEstimand::Tau => (0..targets.len()).map(|j| Quantity::Effect { target: j }).collect(),
        GlobalEstimand::PotentialOutcomes => (0..targets.len()).flat_map(po_pair).collect(),
    };
    gaussian_mi_block(&b, &[Quantity::Outcome], &block)
}

/// Non-causal EPIG: mean over sampled pairs `(x*, t*)` of `I(y; y*)`, where
/// `y*` includes observation noise.
pub fn epig_factual(model: &dyn CateModel, candidate: Point<'_>, pairs: &Covariates, pair_arms: &[Arm]) -> Result<f64> {
    if pairs.is_empty() {
        return input("EPIG needs at least one sampled target pair");
    }
    if pairs.len() != pair_arms.len() {
        return input("target pairs and arms differ in length");
    }
    let pts: Vec<Point> = pairs.rows().zip(pair_arms).map(|(x, a)| Point::new(x, *a)).collect();
    let c = std::slice::from_ref(&candidate);
    let noise = model.noise_variance();
    let vy = model.latent_var(c)[0] + noise;
    let cross = model.latent_cov(c, &pts);
    let vars = model.latent_var(&pts);
    let mut total = 0.0;
    for j in 0..pts.len() {
        total += gaussian_mi_scalar(vy, vars[j] + noise, cross[(0, j)])?;
    }
    Ok(total / pts.len() as f64)
}

/// `½ log(1 + Var[f_t(x)]/σ_n²)`.
pub fn mu_bald(model: &dyn CateModel, candidate: Point<'_>) -> f64 {
    let var = model.latent_var(std::slice::from_ref(&candidate))[0];
    bald_from_variance(var, model.noise_variance())
}

pub(crate) fn bald_from_variance(var: f64, noise: f64) -> f64 {
    if var <= VARIANCE_FLOOR {
        return 0.0;
    }
    0.5 * (var / noise).ln_1p()
}

/// Noise variance of the contrast of two independent observations.
pub const CONTRAST_NOISE_FACTOR: f64 = 2.0;

/// `½ log(1 + Var[τ(x)]/(2σ_n²))`.
pub fn tau_bald(model: &dyn CateModel, x: &[f64]) -> Result<f64> {
    let xs = Covariates::new(x.to_vec(), x.len())?;
    let var = model.arm_moments(&xs)[0].tau_variance();
    Ok(bald_from_variance(var, CONTRAST_NOISE_FACTOR * model.noise_variance()))
}

/// Weighting applied to µ-BALD by the combined variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombinedVariant {
    /// Upweights the arm that is scarce at `x`: `1 − π̂(x)` for treated, `π̂(x)` for control.
    MuPi,
    /// Scales by `sd[τ(x)]` relative to the largest `sd[τ]` over the pool.
    MuRho { pool_max_tau_sd: f64 },
}

pub fn combined_weight_pi(pi: f64, arm: Arm) -> f64 {
    match arm {
        Arm::Treated => 1.0 - pi,
        Arm::Control => pi,
    }
}

pub fn combined_weight_rho(tau_sd: f64, pool_max_tau_sd: f64) -> f64 {
    if pool_max_tau_sd > 0.0 {
        (tau_sd / pool_max_tau_sd).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn combined_bald(
    model: &dyn CateModel,
    candidate: Point<'_>,
    variant: CombinedVariant,
    propensity: Option<&PropensityModel>,
) -> Result<f64> {
    let base = mu_bald(model, candidate);
    let weight = match variant {
        CombinedVariant::MuPi => {
            let Some(p) = propensity else {
                return input("µπ-BALD needs a fitted propensity model");
            };
            combined_weight_pi(p.predict_pi(candidate.x), candidate.arm)
        }
        CombinedVariant::MuRho { pool_max_tau_sd } => {
            let xs = Covariates::new(candidate.x.to_vec(), candidate.x.len())?;
            combined_weight_rho(model.arm_moments(&xs)[0].tau_variance().sqrt(), pool_max_tau_sd)
        }
    };
    Ok(base * weight)
}

fn bernoulli_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// Sign-ambiguity score from CATE draws: `H(Bern(γ̄)) − mean_k H(Bern(γ_k))`
/// with `γ_k = Φ(−|τ_k|/σ_τ)` and `σ_τ` the standard deviation of the draws
/// (divisor `K`).
pub fn sundin_score_from_draws(draws: &[f64]) -> f64 {
    let k = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / k;
    let sd = (draws.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / k).sqrt();
    if !(sd > 0.0) {
        return 0.0;
    }
    let normal = Normal::standard();
    let gammas: Vec<f64> = draws.iter().map(|t| normal.cdf(-t.abs() / sd)).collect();
    let gbar = gammas.iter().sum::<f64>() / k;
    let expected = gammas.iter().map(|g| bernoulli_entropy(*g)).sum::<f64>() / k;
    (bernoulli_entropy(gbar) - expected).max(0.0)
}

pub fn sundin_gamma(model: &dyn CateModel, x: &[f64], k: usize, rng: &mut dyn RngCore) -> Result<f64> {
    if k < 2 {
        return input(format!("Sundin score needs at least 2 samples, got {k}"));
    }
    Ok(sundin_score_from_draws(&model.tau_samples(x, k, rng)))
}

/// QHTE coreset score: distance from each candidate to its nearest labeled
/// point of the same arm, with `d² = Var f_t(x) + Var f_t(x') − 2 Cov`.
///
/// Candidates whose arm has no labeled points score one above the pool maximum.
pub fn coreset_qhte(
    model: &dyn CateModel,
    candidates: &Covariates,
    candidate_arms: &[Arm],
    labeled: &Covariates,
    labeled_arms: &[Arm],
) -> Result<ScoreVector> {
    if candidates.len() != candidate_arms.len() || labeled.len() != labeled_arms.len() {
        return input("covariates and arms differ in length");
    }
    let cands: Vec<Point> = candidates.rows().zip(candidate_arms).map(|(x, a)| Point::new(x, *a)).collect();
    let mut scores = vec![None; cands.len()];
    for arm in Arm::BOTH {
        let lab: Vec<Point> = labeled.rows().zip(labeled_arms).filter(|(_, a)| **a == arm).map(|(x, _)| Point::new(x, arm)).collect();
        let idx: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].arm == arm).collect();
        if lab.is_empty() || idx.is_empty() {
            continue;
        }
        let sub: Vec<Point> = idx.iter().map(|&i| cands[i]).collect();
        let cross = model.latent_cov(&sub, &lab);
        let var_c = model.latent_var(&sub);
        let var_l = model.latent_var(&lab);
        for (r, &i) in idx.iter().enumerate() {
            let d = (0..lab.len())
                .map(|l| (var_c[r] + var_l[l] - 2.0 * cross[(r, l)]).max(0.0).sqrt())
                .fold(f64::INFINITY, f64::min);
            scores[i] = Some(d);
        }
    }
    let max = scores.iter().flatten().copied().fold(0.0, f64::max);
    ScoreVector::new(scores.into_iter().map(|s| s.unwrap_or(max + 1.0)).collect())
}

/// `I(y; τ(grid))` with the grid treated jointly.
pub fn causal_eig(model: &dyn CateModel, candidate: Point<'_>, grid: &Covariates) -> Result<f64> {
    causal_epig_global(model, candidate, grid, GlobalEstimand::Tau)
}

/// I.i.d. `Uniform(0, 1)` scores.
pub fn random_acq<R: Rng + ?Sized>(pool_size: usize, rng: &mut R) -> ScoreVector {
    ScoreVector::new((0..pool_size).map(|_| rng.sample(Open01)).collect()).expect("uniform draws are finite")
}
