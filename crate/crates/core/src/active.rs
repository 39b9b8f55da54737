//! Budgeted batch active learning: warm start, then rounds of fit, score,
//! select and query until the label budget or the pool runs out.
//!
//! The loop sees covariates and treatments only. Outcomes come from an
//! [`OutcomeOracle`] that reveals the factual outcome of a pool row, and
//! PEHE values come from an [`Evaluator`] that owns the ground truth.

use std::time::Instant;

use rand::RngCore;
use rand_distr::{Distribution, Gumbel};

use crate::acquisition::{score_pool, AcquisitionMethod, ScoreVector, ScoringInputs};
use crate::data::{Arm, Covariates, LabeledSet};
use crate::dgp::Dataset;
use crate::error::{input, Result};
use crate::evaluation::{AuditedTruth, Evaluator, StepEntry};
use crate::gp::{fit_gp, heuristic_kernel, optimize_hyperparams, GpKernel, GpModelKind, KernelFamily, SearchConfig};
use crate::posterior::{fit_ensemble, CateModel};
use crate::propensity::{fit_propensity, PropensityModel};
use crate::rng::{derive_seed, stream};

pub const DEFAULT_N_INIT: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 20;
pub const DEFAULT_ENSEMBLE_MEMBERS: usize = 20;
pub const DEFAULT_ENSEMBLE_RIDGE: f64 = 1e-3;
const PROPENSITY_RIDGE: f64 = 1e-3;
/// Hyperparameter search needs this many labels; smaller sets use the heuristic kernel.
const MIN_SEARCH_POINTS: usize = 5;

/// Covariates and treatments of a set of units, without any outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub covariates: Covariates,
    pub arms: Vec<Arm>,
}

impl CandidatePool {
    pub fn new(covariates: Covariates, arms: Vec<Arm>) -> Result<Self> {
        if covariates.len() != arms.len() {
            return input(format!("{} covariate rows but {} treatments", covariates.len(), arms.len()));
        }
        Ok(Self { covariates, arms })
    }

    pub fn from_dataset(data: &Dataset) -> Self {
        Self { covariates: data.covariates.clone(), arms: data.arms.clone() }
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }
}

/// Reveals the factual outcome of a pool row. Nothing else is exposed.
pub trait OutcomeOracle {
    fn reveal(&mut self, pool_index: usize) -> Result<f64>;
}

/// Holds a copy of the factual outcomes only.
#[derive(Debug, Clone)]
pub struct FactualOracle {
    outcomes: Vec<f64>,
}

impl FactualOracle {
    pub fn new(data: &Dataset) -> Self {
        Self { outcomes: data.outcomes.clone() }
    }
}

impl OutcomeOracle for FactualOracle {
    fn reveal(&mut self, pool_index: usize) -> Result<f64> {
        match self.outcomes.get(pool_index) {
            Some(y) => Ok(*y),
            None => input(format!("pool index {pool_index} out of range")),
        }
    }
}

/// Oracle that reads through an [`AuditedTruth`], so every access is logged.
pub struct AuditedOracle<'a> {
    truth: &'a AuditedTruth,
}

impl<'a> AuditedOracle<'a> {
    pub const ACCESSOR: &'static str = "active_loop";

    pub fn new(truth: &'a AuditedTruth) -> Self {
        Self { truth }
    }
}

impl OutcomeOracle for AuditedOracle<'_> {
    fn reveal(&mut self, pool_index: usize) -> Result<f64> {
        Ok(self.truth.factual(Self::ACCESSOR, "pool", pool_index))
    }
}

/// Which covariates the target-aware utilities average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetMode {
    /// The remaining pool, shrinking as points are acquired.
    Pool,
    /// The fixed test covariates.
    Test,
}

impl TargetMode {
    pub fn name(self) -> &'static str {
        match self {
            TargetMode::Pool => "pool",
            TargetMode::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pool" => Ok(TargetMode::Pool),
            "test" => Ok(TargetMode::Test),
            other => input(format!("unknown target mode '{other}' (expected pool or test)")),
        }
    }
}

/// CATE estimator and its fixed settings.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Gp { kind: GpModelKind, family: KernelFamily },
    Ensemble { members: usize, ridge: f64 },
}

impl EstimatorSpec {
    pub const NAMES: [&'static str; 5] = ["cmgp", "cmgp_rbf", "nsgp", "nsgp_rbf", "ensemble"];

    /// GP names default to the Matérn-5/2 kernel; the `_rbf` suffix selects RBF.
    pub fn parse(s: &str) -> Result<Self> {
        let gp = |kind, family| Ok(EstimatorSpec::Gp { kind, family });
        match s {
            "cmgp" => gp(GpModelKind::Cmgp, KernelFamily::Matern52),
            "cmgp_rbf" => gp(GpModelKind::Cmgp, KernelFamily::Rbf),
            "nsgp" => gp(GpModelKind::Nsgp, KernelFamily::Matern52),
            "nsgp_rbf" => gp(GpModelKind::Nsgp, KernelFamily::Rbf),
            "ensemble" => Ok(EstimatorSpec::Ensemble { members: DEFAULT_ENSEMBLE_MEMBERS, ridge: DEFAULT_ENSEMBLE_RIDGE }),
            other => input(format!("unknown estimator '{other}' (expected one of {})", Self::NAMES.join(", "))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Gp { kind: GpModelKind::Cmgp, family: KernelFamily::Matern52 } => "cmgp",
            EstimatorSpec::Gp { kind: GpModelKind::Cmgp, family: KernelFamily::Rbf } => "cmgp_rbf",
            EstimatorSpec::Gp { kind: GpModelKind::Nsgp, family: KernelFamily::Matern52 } => "nsgp",
            EstimatorSpec::Gp { kind: GpModelKind::Nsgp, family: KernelFamily::Rbf } => "nsgp_rbf",
            EstimatorSpec::Ensemble { .. } => "ensemble",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub n_init: usize,
    pub batch_size: usize,
    pub budget: usize,
    /// `None` uses the method's default temperature.
    pub temperature: Option<f64>,
    /// Re-run the hyperparameter search every round rather than only after the warm start.
    pub refit_hyperparams: bool,
    pub estimator: EstimatorSpec,
    pub method: AcquisitionMethod,
    pub target_mode: TargetMode,
    /// Random subsample of the targets used for scoring when there are more.
    pub target_cap: Option<usize>,
}

impl LoopConfig {
    pub fn new(estimator: EstimatorSpec, method: AcquisitionMethod, budget: usize) -> Self {
        Self {
            n_init: DEFAULT_N_INIT,
            batch_size: DEFAULT_BATCH_SIZE,
            budget,
            temperature: None,
            refit_hyperparams: true,
            estimator,
            method,
            target_mode: TargetMode::Pool,
            target_cap: None,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature.unwrap_or_else(|| self.method.default_temperature())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return input("n_init must be at least 1");
        }
        if self.batch_size == 0 {
            return input("batch_size must be at least 1");
        }
        if self.budget < self.n_init {
            return input(format!("budget {} is smaller than n_init {}", self.budget, self.n_init));
        }
        let t = self.temperature();
        if !(t >= 0.0 && t.is_finite()) {
            return input(format!("temperature must be finite and non-negative, got {t}"));
        }
        if self.target_cap == Some(0) {
            return input("target_cap must be positive");
        }
        if let EstimatorSpec::Ensemble { members, ridge } = self.estimator {
            if members < 2 || !(ridge >= 0.0 && ridge.is_finite()) {
                return input("ensemble needs ≥ 2 members and a finite non-negative ridge");
            }
        }
        self.method.validate()
    }
}

/// Pool indices chosen in one round, with their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub step: usize,
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveState {
    labeled: Vec<usize>,
    outcomes: Vec<f64>,
    /// Remaining pool indices, ascending.
    pool: Vec<usize>,
    target_mode: TargetMode,
    step: usize,
    history: Vec<Acquisition>,
}

impl ActiveState {
    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> &[Acquisition] {
        &self.history
    }

    pub fn target_mode(&self) -> TargetMode {
        self.target_mode
    }

    /// Binds the acquisition target to the remaining pool or to the test set.
    pub fn set_acquisition_target(&mut self, mode: TargetMode) {
        self.target_mode = mode;
    }

    /// Current target covariates and treatments.
    pub fn targets(&self, pool: &CandidatePool, test: &CandidatePool) -> CandidatePool {
        match self.target_mode {
            TargetMode::Pool => {
                assert!(!self.pool.is_empty(), "pool targets requested after the pool emptied");
                CandidatePool {
                    covariates: pool.covariates.select(&self.pool),
                    arms: self.pool.iter().map(|&i| pool.arms[i]).collect(),
                }
            }
            TargetMode::Test => test.clone(),
        }
    }

    /// Moves `pool_positions` (indices into [`Self::pool`]) to the labeled set.
    fn acquire(&mut self, pool_positions: &[usize], scores: &[f64], oracle: &mut dyn OutcomeOracle) -> Result<()> {
        let indices: Vec<usize> = pool_positions.iter().map(|&p| self.pool[p]).collect();
        let mut revealed = Vec::with_capacity(indices.len());
        for &i in &indices {
            revealed.push(oracle.reveal(i)?);
        }
        self.labeled.extend_from_slice(&indices);
        self.outcomes.extend(revealed);
        let mut taken = pool_positions.to_vec();
        taken.sort_unstable();
        for p in taken.into_iter().rev() {
            self.pool.remove(p);
        }
        self.step += 1;
        self.history.push(Acquisition {
            step: self.step,
            indices,
            scores: pool_positions.iter().map(|&p| scores[p]).collect(),
        });
        Ok(())
    }

    pub fn labeled_set(&self, pool: &CandidatePool) -> Result<LabeledSet> {
        LabeledSet::new(
            pool.covariates.select(&self.labeled),
            self.labeled.iter().map(|&i| pool.arms[i]).collect(),
            self.outcomes.clone(),
        )
    }
}

/// Draws `n_init` distinct pool rows uniformly and reveals their outcomes.
pub fn warm_start(
    pool_size: usize,
    n_init: usize,
    oracle: &mut dyn OutcomeOracle,
    rng: &mut dyn RngCore,
) -> Result<ActiveState> {
    if n_init > pool_size {
        return input(format!("n_init {n_init} exceeds the pool size {pool_size}"));
    }
    let labeled = rand::seq::index::sample(rng, pool_size, n_init).into_vec();
    let mut outcomes = Vec::with_capacity(n_init);
    for &i in &labeled {
        outcomes.push(oracle.reveal(i)?);
    }
    let mut in_labeled = vec![false; pool_size];
    labeled.iter().for_each(|&i| in_labeled[i] = true);
    let pool = (0..pool_size).filter(|&i| !in_labeled[i]).collect();
    Ok(ActiveState { labeled, outcomes, pool, target_mode: TargetMode::Pool, step: 0, history: Vec::new() })
}

/// Chooses `n_b` positions of `scores`.
///
/// With `temperature = 0` this is the top-`n_b` set, ties going to the lowest
/// index. Otherwise positions are drawn without replacement with probability
/// proportional to `exp(score / T)`, renormalized after every draw; this is
/// realized by taking the top `n_b` of `score / T` plus independent Gumbel noise.
pub fn select_batch(scores: &ScoreVector, n_b: usize, temperature: f64, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    let s = scores.as_slice();
    if n_b > s.len() {
        return input(format!("batch of {n_b} requested from {} candidates", s.len()));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return input("scores must be finite");
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return input(format!("temperature must be finite and non-negative, got {temperature}"));
    }
    let keys: Vec<f64> = if temperature == 0.0 {
        s.to_vec()
    } else {
        let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
        s.iter().map(|v| v / temperature + gumbel.sample(rng)).collect()
    };
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order.truncate(n_b);
    Ok(order)
}

/// Fits the configured estimator. GP hyperparameters are searched when
/// `search` is set, starting from `previous` if given; otherwise `previous`
/// (or the heuristic kernel) is reused as is.
pub fn fit_estimator(
    spec: &EstimatorSpec,
    data: &LabeledSet,
    previous: Option<&GpKernel>,
    search: bool,
    rng: &mut dyn RngCore,
) -> Result<(Box<dyn CateModel>, Option<GpKernel>)> {
    match spec {
        EstimatorSpec::Gp { kind, family } => {
            let kernel = if search && data.len() >= MIN_SEARCH_POINTS {
                let cfg = SearchConfig { initial: previous.cloned(), ..SearchConfig::new(*family) };
                optimize_hyperparams(data, *kind, &cfg, rng)?
            } else {
                match previous {
                    Some(k) => k.clone(),
                    None => heuristic_kernel(data, *kind, *family)?,
                }
            };
            let post = fit_gp(data, &kernel)?;
            Ok((Box::new(post), Some(kernel)))
        }
        EstimatorSpec::Ensemble { members, ridge } => Ok((Box::new(fit_ensemble(data, *members, *ridge, rng)?), None)),
    }
}

/// Seeds of one run: `warm` fixes the warm start and the first fit, so runs
/// differing only in method share step 0; `acquisition` drives later rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub warm: u64,
    pub acquisition: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub entries: Vec<StepEntry>,
    pub failure: Option<String>,
    pub state: ActiveState,
}

/// Runs warm start and acquisition rounds until the budget or the pool is used up.
///
/// Invalid configuration is an error. A failure during fitting or scoring ends
/// the run early; the completed entries are returned with `failure` set.
pub fn run_active_learning(
    config: &LoopConfig,
    pool: &CandidatePool,
    test: &CandidatePool,
    oracle: &mut dyn OutcomeOracle,
    evaluator: &dyn Evaluator,
    seeds: RunSeeds,
) -> Result<RunOutput> {
    config.validate()?;
    if test.is_empty() && config.target_mode == TargetMode::Test {
        return input("test targets requested but the test set is empty");
    }
    let mut state = warm_start(pool.len(), config.n_init, oracle, &mut stream(seeds.warm, &["warm_start"]))?;
    state.set_acquisition_target(config.target_mode);
    let propensity = if config.method.needs_propensity() {
        Some(fit_propensity(&pool.covariates, &pool.arms, PROPENSITY_RIDGE)?)
    } else {
        None
    };
    let mut entries = Vec::new();
    let mut failure = None;

    let first = fit_and_evaluate(config, &state, pool, None, true, evaluator, &mut stream(seeds.warm, &["fit", "0"]));
    let (mut model, mut kernel) = match first {
        Ok((model, kernel, (p, t))) => {
            entries.push(entry(&state, p, t, 0.0));
            (model, kernel)
        }
        Err(e) => {
            return Ok(RunOutput { entries, failure: Some(format!("step 0: {e}")), state });
        }
    };

    while state.labeled.len() < config.budget && !state.pool.is_empty() {
        let step = state.step + 1;
        let k = config.batch_size.min(config.budget - state.labeled.len()).min(state.pool.len());
        let started = Instant::now();
        let chosen = acquisition_round(config, &state, pool, test, model.as_ref(), propensity.as_ref(), seeds, step, k);
        let acq_seconds = started.elapsed().as_secs_f64();
        let (positions, scores) = match chosen {
            Ok(c) => c,
            Err(e) => {
                failure = Some(format!("step {step} acquisition: {e}"));
                break;
            }
        };
        state.acquire(&positions, scores.as_slice(), oracle)?;
        let refit = config.refit_hyperparams;
        let mut rng = stream(seeds.acquisition, &["fit", &step.to_string()]);
        match fit_and_evaluate(config, &state, pool, kernel.as_ref(), refit, evaluator, &mut rng) {
            Ok((m, kern, (p, t))) => {
                entries.push(entry(&state, p, t, acq_seconds));
                model = m;
                kernel = kern;
            }
            Err(e) => {
                failure = Some(format!("step {step} fit: {e}"));
                break;
            }
        }
    }
    Ok(RunOutput { entries, failure, state })
}

fn entry(state: &ActiveState, pool: f64, test: f64, acq_seconds: f64) -> StepEntry {
    StepEntry { step: state.step, n_labeled: state.labeled.len(), sqrt_pehe_pool: pool, sqrt_pehe_test: test, acq_seconds }
}

type Fitted = (Box<dyn CateModel>, Option<GpKernel>, (f64, f64));

fn fit_and_evaluate(
    config: &LoopConfig,
    state: &ActiveState,
    pool: &CandidatePool,
    previous: Option<&GpKernel>,
    search: bool,
    evaluator: &dyn Evaluator,
    rng: &mut dyn RngCore,
) -> Result<Fitted> {
    let data = state.labeled_set(pool)?;
    let (model, kernel) = fit_estimator(&config.estimator, &data, previous, search, rng)?;
    let pehe = evaluator.evaluate(model.as_ref())?;
    Ok((model, kernel, pehe))
}

#[allow(clippy::too_many_arguments)]
fn acquisition_round(
    config: &LoopConfig,
    state: &ActiveState,
    pool: &CandidatePool,
    test: &CandidatePool,
    model: &dyn CateModel,
    propensity: Option<&PropensityModel>,
    seeds: RunSeeds,
    step: usize,
    k: usize,
) -> Result<(Vec<usize>, ScoreVector)> {
    let step_tag = step.to_string();
    let candidates = pool.covariates.select(&state.pool);
    let candidate_arms: Vec<Arm> = state.pool.iter().map(|&i| pool.arms[i]).collect();
    let mut targets = state.targets(pool, test);
    if let Some(cap) = config.target_cap {
        if targets.len() > cap {
            let mut rng = stream(seeds.acquisition, &["targets", &step_tag]);
            let mut keep = rand::seq::index::sample(&mut rng, targets.len(), cap).into_vec();
            keep.sort_unstable();
            targets = CandidatePool {
                covariates: targets.covariates.select(&keep),
                arms: keep.iter().map(|&i| targets.arms[i]).collect(),
            };
        }
    }
    let labeled = pool.covariates.select(&state.labeled);
    let labeled_arms: Vec<Arm> = state.labeled.iter().map(|&i| pool.arms[i]).collect();
    let inputs = ScoringInputs {
        model,
        candidates: &candidates,
        candidate_arms: &candidate_arms,
        targets: &targets.covariates,
        target_arms: &targets.arms,
        labeled: &labeled,
        labeled_arms: &labeled_arms,
        propensity,
    };
    let scores = score_pool(&config.method, &inputs, derive_seed(seeds.acquisition, &["score", &step_tag]))?;
    let mut rng = stream(seeds.acquisition, &["select", &step_tag]);
    let positions = select_batch(&scores, k, config.temperature(), &mut rng)?;
    Ok((positions, scores))
}

/// Rebuilds the labeled index sequence from a warm start and an acquisition history.
pub fn replay_labeled(pool_size: usize, n_init: usize, warm_seed: u64, history: &[Acquisition]) -> Result<Vec<usize>> {
    if n_init > pool_size {
        return input("n_init exceeds the pool size");
    }
    let mut rng = stream(warm_seed, &["warm_start"]);
    let mut labeled = rand::seq::index::sample(&mut rng, pool_size, n_init).into_vec();
    for a in history {
        if a.indices.iter().any(|&i| i >= pool_size || labeled.contains(&i)) {
            return input(format!("history step {} acquires an invalid or repeated index", a.step));
        }
        labeled.extend_from_slice(&a.indices);
    }
    Ok(labeled)
}
