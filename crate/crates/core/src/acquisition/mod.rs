//! Acquisition utilities `U(x, t | D_T, X_tar)`: the Causal-EPIG family and
//! the baselines, all in closed Gaussian form.

pub mod mi;
pub mod oracle;
pub mod utility;

#[cfg(test)]
mod tests;

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{Arm, Covariates, Point};
use crate::error::{input, Result};
use crate::posterior::{ArmMoments, CateModel};
use crate::propensity::PropensityModel;
use crate::rng::{derive_seed, indexed, stream};

pub use mi::{gaussian_mi_block, gaussian_mi_scalar, FactoredBlock};
pub use oracle::mc_mi_oracle;
pub use utility::{
    causal_eig, causal_epig_global, causal_epig_mu, causal_epig_mu_additive, causal_epig_tau, combined_bald,
    coreset_qhte, epig_factual, mu_bald, random_acq, sundin_gamma, sundin_score_from_draws, tau_bald,
    CombinedVariant, GlobalEstimand,
};

pub const DEFAULT_SUNDIN_SAMPLES: usize = 100;
pub const DEFAULT_EIG_GRID: usize = 100;

/// Candidates scored together when computing cross-covariances.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcquisitionMethod {
    Random,
    CausalEpigTau,
    CausalEpigMu,
    CausalEpigMuAdditive,
    CausalEpigTauGlobal,
    CausalEpigMuGlobal,
    EpigFactual,
    MuBald,
    TauBald,
    MuPiBald,
    MuRhoBald,
    Sundin { samples: usize },
    CoresetQhte,
    CausalEig { grid_size: usize },
}

impl AcquisitionMethod {
    pub const NAMES: [&'static str; 14] = [
        "random",
        "causal_epig_tau",
        "causal_epig_mu",
        "causal_epig_mu_additive",
        "causal_epig_tau_global",
        "causal_epig_mu_global",
        "epig_factual",
        "mu_bald",
        "tau_bald",
        "mu_pi_bald",
        "mu_rho_bald",
        "sundin",
        "coreset_qhte",
        "causal_eig",
    ];

    /// Parses a method name, filling method parameters with their defaults.
    pub fn parse(name: &str) -> Result<Self> {
        use AcquisitionMethod::*;
        Ok(match name {
            "random" => Random,
            "causal_epig_tau" => CausalEpigTau,
            "causal_epig_mu" => CausalEpigMu,
            "causal_epig_mu_additive" => CausalEpigMuAdditive,
            "causal_epig_tau_global" => CausalEpigTauGlobal,
            "causal_epig_mu_global" => CausalEpigMuGlobal,
            "epig_factual" => EpigFactual,
            "mu_bald" => MuBald,
            "tau_bald" => TauBald,
            "mu_pi_bald" => MuPiBald,
            "mu_rho_bald" => MuRhoBald,
            "sundin" => Sundin { samples: DEFAULT_SUNDIN_SAMPLES },
            "coreset_qhte" => CoresetQhte,
            "causal_eig" => CausalEig { grid_size: DEFAULT_EIG_GRID },
            other => return input(format!("unknown acquisition method `{other}`")),
        })
    }

    pub fn name(&self) -> &'static str {
        use AcquisitionMethod::*;
        match self {
            Random => "random",
            CausalEpigTau => "causal_epig_tau",
            CausalEpigMu => "causal_epig_mu",
            CausalEpigMuAdditive => "causal_epig_mu_additive",
            CausalEpigTauGlobal => "causal_epig_tau_global",
            CausalEpigMuGlobal => "causal_epig_mu_global",
            EpigFactual => "epig_factual",
            MuBald => "mu_bald",
            TauBald => "tau_bald",
            MuPiBald => "mu_pi_bald",
            MuRhoBald => "mu_rho_bald",
            Sundin { .. } => "sundin",
            CoresetQhte => "coreset_qhte",
            CausalEig { .. } => "causal_eig",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AcquisitionMethod::Sundin { samples } if samples < 2 => {
                input(format!("sundin needs at least 2 samples, got {samples}"))
            }
            AcquisitionMethod::CausalEig { grid_size } if grid_size == 0 => input("causal_eig grid must be non-empty"),
            _ => Ok(()),
        }
    }

    /// Softmax temperature used when none is configured: deterministic top-n_b
    /// for the information-gain family, tempered sampling for BALD variants.
    pub fn default_temperature(&self) -> f64 {
        use AcquisitionMethod::*;
        match self {
            MuBald | TauBald | MuPiBald | MuRhoBald => 1.0,
            _ => 0.0,
        }
    }

    pub fn needs_propensity(&self) -> bool {
        matches!(self, AcquisitionMethod::MuPiBald)
    }

    /// Whether scores depend on the target set.
    pub fn uses_targets(&self) -> bool {
        use AcquisitionMethod::*;
        matches!(
            self,
            CausalEpigTau | CausalEpigMu | CausalEpigMuAdditive | CausalEpigTauGlobal | CausalEpigMuGlobal | EpigFactual
        )
    }
}

impl fmt::Display for AcquisitionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Utility per pool candidate, aligned with pool order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return input(format!("non-finite score {} at candidate {i}", values[i]));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Everything a round of scoring may look at. Nothing here carries outcomes.
#[derive(Clone, Copy)]
pub struct ScoringInputs<'a> {
    pub model: &'a dyn CateModel,
    pub candidates: &'a Covariates,
    pub candidate_arms: &'a [Arm],
    pub targets: &'a Covariates,
    /// Treatment assignments of the targets, used by factual EPIG.
    pub target_arms: &'a [Arm],
    pub labeled: &'a Covariates,
    pub labeled_arms: &'a [Arm],
    pub propensity: Option<&'a PropensityModel>,
}

fn points<'a>(xs: &'a Covariates, arms: &[Arm]) -> Vec<Point<'a>> {
    xs.rows().zip(arms).map(|(x, a)| Point::new(x, *a)).collect()
}

fn arm_points(xs: &Covariates, arm: Arm) -> Vec<Point<'_>> {
    xs.rows().map(|x| Point::new(x, arm)).collect()
}

/// Applies `f(chunk_start, chunk_points)` to consecutive candidate chunks in
/// parallel and concatenates the results in pool order.
fn chunked<'a, F>(cands: &[Point<'a>], f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &[Point<'a>]) -> Result<Vec<f64>> + Sync,
{
    let starts: Vec<usize> = (0..cands.len()).step_by(CHUNK).collect();
    let parts: Vec<Result<Vec<f64>>> =
        starts.par_iter().map(|&s| f(s, &cands[s..(s + CHUNK).min(cands.len())])).collect();
    let mut out = Vec::with_capacity(cands.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Posterior covariance of `τ` between two covariate sets.
fn tau_cov(model: &dyn CateModel, a: &Covariates, b: &Covariates) -> DMatrix<f64> {
    let (a0, a1) = (arm_points(a, Arm::Control), arm_points(a, Arm::Treated));
    let (b0, b1) = (arm_points(b, Arm::Control), arm_points(b, Arm::Treated));
    model.latent_cov(&a1, &b1) - model.latent_cov(&a1, &b0) - model.latent_cov(&a0, &b1) + model.latent_cov(&a0, &b0)
}

/// Scores every candidate. `seed` drives the stochastic methods through
/// per-candidate streams, so results do not depend on thread scheduling.
pub fn score_pool(method: &AcquisitionMethod, inputs: &ScoringInputs<'_>, seed: u64) -> Result<ScoreVector> {
    method.validate()?;
    let model = inputs.model;
    let n = inputs.candidates.len();
    if inputs.candidate_arms.len() != n {
        return input("candidate covariates and arms differ in length");
    }
    if n == 0 {
        return ScoreVector::new(Vec::new());
    }
    if inputs.candidates.dim() != model.dim() {
        return input("candidate dimension does not match the model");
    }
    if method.uses_targets() {
        if inputs.targets.is_empty() {
            return input("target set is empty");
        }
        if inputs.targets.dim() != model.dim() {
            return input("target dimension does not match the model");
        }
    }
    let cands = points(inputs.candidates, inputs.candidate_arms);
    let noise = model.noise_variance();
    let vy: Vec<f64> = model.latent_var(&cands).iter().map(|v| v + noise).collect();
    let targets = inputs.targets;
    let t0 = arm_points(targets, Arm::Control);
    let t1 = arm_points(targets, Arm::Treated);
    let n_tar = targets.len() as f64;

    use AcquisitionMethod::*;
    let values = match *method {
        Random => random_acq(n, &mut stream(seed, &["random"])).into_vec(),
        CausalEpigTau => {
            let tm: Vec<ArmMoments> = model.arm_moments(targets);
            chunked(&cands, |s, chunk| {
                let c0 = model.latent_cov(chunk, &t0);
                let c1 = model.latent_cov(chunk, &t1);
                (0..chunk.len())
                    .map(|r| {
                        let mut total = 0.0;
                        for j in 0..tm.len() {
                            total += gaussian_mi_scalar(vy[s + r], tm[j].tau_variance(), c1[(r, j)] - c0[(r, j)])?;
                        }
                        Ok(total / n_tar)
                    })
                    .collect()
            })?
        }
        CausalEpigMu => {
            let blocks: Vec<FactoredBlock> = model
                .arm_moments(targets)
                .iter()
                .map(|m| FactoredBlock::new(&DMatrix::from_row_slice(2, 2, &[m.cov[0][0], m.cov[0][1], m.cov[1][0], m.cov[1][1]])))
                .collect::<Result<_>>()?;
            chunked(&cands, |s, chunk| {
                let c0 = model.latent_cov(chunk, &t0);
                let c1 = model.latent_cov(chunk, &t1);
                (0..chunk.len())
                    .map(|r| {
                        let mut total = 0.0;
                        for (j, block) in blocks.iter().enumerate() {
                            total += block.mi_with_scalar(vy[s + r], &[c0[(r, j)], c1[(r, j)]])?;
                        }
                        Ok(total / n_tar)
                    })
                    .collect()
            })?
        }
        CausalEpigMuAdditive => {
            let tm = model.arm_moments(targets);
            chunked(&cands, |s, chunk| {
                let c0 = model.latent_cov(chunk, &t0);
                let c1 = model.latent_cov(chunk, &t1);
                (0..chunk.len())
                    .map(|r| {
                        let mut total = 0.0;
                        for j in 0..tm.len() {
                            total += gaussian_mi_scalar(vy[s + r], tm[j].cov[0][0], c0[(r, j)])?;
                            total += gaussian_mi_scalar(vy[s + r], tm[j].cov[1][1], c1[(r, j)])?;
                        }
                        Ok(total / n_tar)
                    })
                    .collect()
            })?
        }
        CausalEpigTauGlobal => global_tau(model, &cands, &vy, targets)?,
        CausalEig { grid_size } => {
            let m = grid_size.min(n);
            let grid = inputs.candidates.select(&(0..m).collect::<Vec<_>>());
            global_tau(model, &cands, &vy, &grid)?
        }
        CausalEpigMuGlobal => {
            let mut all = t0.clone();
            all.extend_from_slice(&t1);
            let block = FactoredBlock::new(&model.latent_cov(&all, &all))?;
            chunked(&cands, |s, chunk| {
                let c = model.latent_cov(chunk, &all);
                (0..chunk.len())
                    .map(|r| {
                        let row: Vec<f64> = c.row(r).iter().copied().collect();
                        block.mi_with_scalar(vy[s + r], &row)
                    })
                    .collect()
            })?
        }
        EpigFactual => {
            if inputs.target_arms.len() != targets.len() {
                return input("target covariates and arms differ in length");
            }
            let pairs = points(targets, inputs.target_arms);
            let var_star: Vec<f64> = model.latent_var(&pairs).iter().map(|v| v + noise).collect();
            chunked(&cands, |s, chunk| {
                let c = model.latent_cov(chunk, &pairs);
                (0..chunk.len())
                    .map(|r| {
                        let mut total = 0.0;
                        for j in 0..pairs.len() {
                            total += gaussian_mi_scalar(vy[s + r], var_star[j], c[(r, j)])?;
                        }
                        Ok(total / n_tar)
                    })
                    .collect()
            })?
        }
        MuBald => vy.iter().map(|v| utility::bald_from_variance(v - noise, noise)).collect(),
        TauBald => model
            .arm_moments(inputs.candidates)
            .iter()
            .map(|m| utility::bald_from_variance(m.tau_variance(), utility::CONTRAST_NOISE_FACTOR * noise))
            .collect(),
        MuPiBald => {
            let Some(p) = inputs.propensity else {
                return input("µπ-BALD needs a fitted propensity model");
            };
            cands
                .iter()
                .zip(&vy)
                .map(|(c, v)| utility::bald_from_variance(v - noise, noise) * utility::combined_weight_pi(p.predict_pi(c.x), c.arm))
                .collect()
        }
        MuRhoBald => {
            let sds: Vec<f64> = model.arm_moments(inputs.candidates).iter().map(|m| m.tau_variance().sqrt()).collect();
            let max = sds.iter().copied().fold(0.0, f64::max);
            vy.iter()
                .zip(&sds)
                .map(|(v, sd)| utility::bald_from_variance(v - noise, noise) * utility::combined_weight_rho(*sd, max))
                .collect()
        }
        Sundin { samples } => {
            let base = derive_seed(seed, &["sundin"]);
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = indexed(base, i);
                    sundin_score_from_draws(&model.tau_samples(inputs.candidates.row(i), samples, &mut rng))
                })
                .collect()
        }
        CoresetQhte => {
            coreset_qhte(model, inputs.candidates, inputs.candidate_arms, inputs.labeled, inputs.labeled_arms)?.into_vec()
        }
    };
    ScoreVector::new(values)
}

fn global_tau(model: &dyn CateModel, cands: &[Point<'_>], vy: &[f64], targets: &Covariates) -> Result<Vec<f64>> {
    let block = FactoredBlock::new(&tau_cov(model, targets, targets))?;
    let t0 = arm_points(targets, Arm::Control);
    let t1 = arm_points(targets, Arm::Treated);
    chunked(cands, |s, chunk| {
        let c = model.latent_cov(chunk, &t1) - model.latent_cov(chunk, &t0);
        (0..chunk.len())
            .map(|r| {
                let row: Vec<f64> = c.row(r).iter().copied().collect();
                block.mi_with_scalar(vy[s + r], &row)
            })
            .collect()
    })
}
