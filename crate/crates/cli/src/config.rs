//! Experiment configuration: a sectioned TOML file.
//!
//! ```toml
//! [dataset]
//! name = "causalbald"          # causalbald | hahn | hahn_linear | hahn_nonlinear | ihdp | actg
//! variants = ["standard"]      # standard and/or shift
//! # covariates = "ihdp.csv"    # ihdp/actg; a surrogate covariate table is used when absent
//! # pool_size = 2000           # overrides of the default partition sizes
//! # validation_size = 200
//! # test_size = 2000
//!
//! [loop]
//! n_init = 50
//! batch_size = 20
//! budget = 250
//! # temperature = 0.0         # default: 1 for the BALD family, 0 otherwise
//! refit_hyperparams = true
//! # target_mode = "pool"      # default: pool for standard, test for shift
//! # target_cap = 500
//!
//! [experiment]
//! estimators = ["cmgp"]        # cmgp | cmgp_rbf | nsgp | nsgp_rbf | ensemble
//! methods = ["random", "causal_epig_tau"]
//! seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//! jobs = 1
//! # output_dir = "results/run1"
//!
//! [method_params]
//! sundin_samples = 100
//! causal_eig_grid = 100
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use causal_epig::acquisition::{AcquisitionMethod, DEFAULT_EIG_GRID, DEFAULT_SUNDIN_SAMPLES};
use causal_epig::active::{EstimatorSpec, LoopConfig, TargetMode, DEFAULT_BATCH_SIZE, DEFAULT_N_INIT};
use causal_epig::dgp::{DatasetKind, SplitSpec};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BUDGET: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default, rename = "loop")]
    pub loop_: LoopSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub method_params: MethodParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub name: String,
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default = "yes")]
    pub refit_hyperparams: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_cap: Option<usize>,
}

impl Default for LoopSection {
    fn default() -> Self {
        Self {
            n_init: DEFAULT_N_INIT,
            batch_size: DEFAULT_BATCH_SIZE,
            budget: DEFAULT_BUDGET,
            temperature: None,
            refit_hyperparams: true,
            target_mode: None,
            target_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    pub methods: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    #[serde(default = "default_sundin")]
    pub sundin_samples: usize,
    #[serde(default = "default_grid")]
    pub causal_eig_grid: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self { sundin_samples: DEFAULT_SUNDIN_SAMPLES, causal_eig_grid: DEFAULT_EIG_GRID }
    }
}

fn default_variants() -> Vec<String> {
    vec!["standard".into()]
}
fn default_n_init() -> usize {
    DEFAULT_N_INIT
}
fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_estimators() -> Vec<String> {
    vec!["cmgp".into()]
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_sundin() -> usize {
    DEFAULT_SUNDIN_SAMPLES
}
fn default_grid() -> usize {
    DEFAULT_EIG_GRID
}

const VARIANTS: [&str; 2] = ["standard", "shift"];

/// Every key accepted anywhere in the file, for "did you mean" hints.
const KNOWN_KEYS: [&str; 22] = [
    "dataset",
    "loop",
    "experiment",
    "method_params",
    "name",
    "variants",
    "covariates",
    "pool_size",
    "validation_size",
    "test_size",
    "n_init",
    "batch_size",
    "budget",
    "temperature",
    "refit_hyperparams",
    "target_mode",
    "target_cap",
    "estimators",
    "methods",
    "seeds",
    "jobs",
    "output_dir",
];

fn closest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::normalized_damerau_levenshtein(word, c), c))
        .filter(|(s, _)| *s >= 0.6)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

/// Appends a suggestion to serde's "unknown field `x`, expected ..." messages.
fn with_suggestion(message: String) -> String {
    let Some(rest) = message.split("unknown field `").nth(1) else {
        return message;
    };
    let Some(word) = rest.split('`').next() else {
        return message;
    };
    let extra = ["sundin_samples", "causal_eig_grid"];
    match closest(word, KNOWN_KEYS.iter().chain(&extra).copied()) {
        Some(s) => format!("{}\nhelp: did you mean `{s}`?", message.trim_end()),
        None => message,
    }
}

/// 1-based line of the first `key =` assignment, for diagnostics.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| anyhow!(with_suggestion(e.to_string())))?;
        config.validate().map_err(|e| {
            let msg = e.to_string();
            let line = msg.split('`').nth(1).and_then(|key| line_of(text, key));
            match line {
                Some(l) => anyhow!("line {l}: {msg}"),
                None => e,
            }
        })?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if self.dataset.variants.is_empty() {
            bail!("`variants` must not be empty");
        }
        unique("variants", &self.dataset.variants)?;
        for v in &self.dataset.variants {
            if !VARIANTS.contains(&v.as_str()) {
                bail!("`variants` entry `{v}` is not one of standard, shift");
            }
            if v == "shift" && !kind.supports_shift() {
                bail!("`variants`: dataset {kind} has no shift variant");
            }
        }
        if self.dataset.covariates.is_some() && kind.schema().is_none() {
            bail!("`covariates` only applies to ihdp and actg");
        }
        if self.experiment.estimators.is_empty() {
            bail!("`estimators` must not be empty");
        }
        if self.experiment.methods.is_empty() {
            bail!("`methods` must not be empty");
        }
        if self.experiment.seeds.is_empty() {
            bail!("`seeds` must not be empty");
        }
        unique("estimators", &self.experiment.estimators)?;
        unique("methods", &self.experiment.methods)?;
        let seeds: BTreeSet<u64> = self.experiment.seeds.iter().copied().collect();
        if seeds.len() != self.experiment.seeds.len() {
            bail!("`seeds` contains duplicates");
        }
        if self.experiment.jobs == 0 {
            bail!("`jobs` must be at least 1");
        }
        for e in &self.experiment.estimators {
            EstimatorSpec::parse(e).map_err(|err| anyhow!("`estimators`: {err}{}", hint(e, &EstimatorSpec::NAMES)))?;
        }
        for m in &self.experiment.methods {
            self.method(m).map_err(|err| anyhow!("`methods`: {err}{}", hint(m, &AcquisitionMethod::NAMES)))?;
        }
        if let Some(t) = &self.loop_.target_mode {
            TargetMode::parse(t).map_err(|e| anyhow!("`target_mode`: {e}"))?;
        }
        for v in &self.dataset.variants {
            let spec = self.split_spec(v, None)?;
            if self.loop_.n_init > spec.pool && kind.schema().is_none() {
                bail!("`n_init` {} exceeds the pool size {}", self.loop_.n_init, spec.pool);
            }
            let e = &self.experiment.estimators[0];
            let m = &self.experiment.methods[0];
            self.loop_config(e, m, v).map_err(|err| anyhow!("`loop`: {err}"))?;
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<DatasetKind> {
        DatasetKind::parse(&self.dataset.name).map_err(|e| anyhow!("`name`: {e}"))
    }

    pub fn method(&self, name: &str) -> Result<AcquisitionMethod> {
        let m = match AcquisitionMethod::parse(name)? {
            AcquisitionMethod::Sundin { .. } => AcquisitionMethod::Sundin { samples: self.method_params.sundin_samples },
            AcquisitionMethod::CausalEig { .. } => {
                AcquisitionMethod::CausalEig { grid_size: self.method_params.causal_eig_grid }
            }
            other => other,
        };
        m.validate()?;
        Ok(m)
    }

    /// Partition sizes of `variant`; `n_rows` is the covariate table size for
    /// semi-synthetic datasets.
    pub fn split_spec(&self, variant: &str, n_rows: Option<usize>) -> Result<SplitSpec> {
        let kind = self.kind()?;
        let mut spec = kind.default_split(n_rows, variant == "shift");
        let d = &self.dataset;
        if let Some(p) = d.pool_size {
            spec.pool = p;
        }
        if let Some(v) = d.validation_size {
            spec.validation = v;
        }
        if let Some(t) = d.test_size {
            spec.test = t;
        }
        spec.validate().map_err(|e| anyhow!("dataset sizes: {e}"))?;
        Ok(spec)
    }

    pub fn target_mode(&self, variant: &str) -> Result<TargetMode> {
        match &self.loop_.target_mode {
            Some(t) => Ok(TargetMode::parse(t)?),
            None if variant == "shift" => Ok(TargetMode::Test),
            None => Ok(TargetMode::Pool),
        }
    }

    pub fn loop_config(&self, estimator: &str, method: &str, variant: &str) -> Result<LoopConfig> {
        let l = &self.loop_;
        let cfg = LoopConfig {
            n_init: l.n_init,
            batch_size: l.batch_size,
            budget: l.budget,
            temperature: l.temperature,
            refit_hyperparams: l.refit_hyperparams,
            estimator: EstimatorSpec::parse(estimator)?,
            method: self.method(method)?,
            target_mode: self.target_mode(variant)?,
            target_cap: l.target_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All cells in a fixed order: variant, estimator, method, seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for v in &self.dataset.variants {
            for e in &self.experiment.estimators {
                for m in &self.experiment.methods {
                    for s in &self.experiment.seeds {
                        out.push(Cell {
                            dataset: self.dataset.name.clone(),
                            variant: v.clone(),
                            estimator: e.clone(),
                            method: m.clone(),
                            seed: *s,
                        });
                    }
                }
            }
        }
        out
    }
}

fn unique(key: &str, items: &[String]) -> Result<()> {
    let set: BTreeSet<&String> = items.iter().collect();
    if set.len() != items.len() {
        bail!("`{key}` contains duplicates");
    }
    Ok(())
}

fn hint(word: &str, names: &[&str]) -> String {
    closest(word, names.iter().copied()).map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default()
}

/// One run of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    pub variant: String,
    pub estimator: String,
    pub method: String,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_lookup() {
        assert_eq!(line_of("a = 1\n  budget = 3\n", "budget"), Some(2));
        assert_eq!(line_of("budgets = 3\n", "budget"), None);
    }

    #[test]
    fn suggestion_for_unknown_field() {
        let msg = with_suggestion("unknown field `batchsize`, expected one of `n_init`".into());
        assert!(msg.ends_with("did you mean `batch_size`?"), "{msg}");
        assert_eq!(with_suggestion("other".into()), "other");
    }
}
