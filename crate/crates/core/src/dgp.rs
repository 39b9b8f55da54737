//! Benchmark data-generating processes with ground-truth potential outcomes.
//!
//! Four designs are provided: the one-dimensional CausalBALD simulation, the
//! five-covariate Hahn design (linear or nonlinear prognostic score), and
//! outcome simulators for the IHDP and ACTG-175 covariates. Every generator
//! is a deterministic function of its inputs and the RNG stream.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use statrs::distribution::{Continuous, Normal as StatNormal};

use crate::data::{Arm, Covariates, LabeledSet};
use crate::error::{input, Result};

/// A generated dataset. `mu0`, `mu1` and `tau_true` are ground truth and must
/// only be read by evaluation code.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariates: Covariates,
    pub arms: Vec<Arm>,
    pub outcomes: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub tau_true: Vec<f64>,
    pub propensity_true: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        covariates: Covariates,
        arms: Vec<Arm>,
        outcomes: Vec<f64>,
        mu0: Vec<f64>,
        mu1: Vec<f64>,
        propensity_true: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = covariates.len();
        if [arms.len(), outcomes.len(), mu0.len(), mu1.len()].iter().any(|&l| l != n)
            || propensity_true.as_ref().is_some_and(|p| p.len() != n)
        {
            return input(format!("dataset columns do not all have {n} rows"));
        }
        if let Some(i) = outcomes.iter().chain(&mu0).chain(&mu1).position(|v| !v.is_finite()) {
            return input(format!("non-finite outcome or mean at flat position {i}"));
        }
        let tau_true = mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect();
        Ok(Self { covariates, arms, outcomes, mu0, mu1, tau_true, propensity_true })
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.dim()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Dataset {
            covariates: self.covariates.select(indices),
            arms: indices.iter().map(|&i| self.arms[i]).collect(),
            outcomes: pick(&self.outcomes),
            mu0: pick(&self.mu0),
            mu1: pick(&self.mu1),
            tau_true: pick(&self.tau_true),
            propensity_true: self.propensity_true.as_deref().map(pick),
        }
    }

    /// Factual observations only.
    pub fn labeled(&self) -> LabeledSet {
        LabeledSet { covariates: self.covariates.clone(), arms: self.arms.clone(), outcomes: self.outcomes.clone() }
    }

    pub fn treated_fraction(&self) -> f64 {
        self.arms.iter().filter(|a| **a == Arm::Treated).count() as f64 / self.len().max(1) as f64
    }
}

/// Whether observation noise is added. `Zero` still consumes the noise draws
/// so every other quantity matches the noisy dataset exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Standard,
    Zero,
}

impl NoiseMode {
    fn scale(self) -> f64 {
        match self {
            NoiseMode::Standard => 1.0,
            NoiseMode::Zero => 0.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Sample standard deviation (divisor `n − 1`).
pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn draw_arms<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Vec<Arm> {
    pi.iter().map(|&p| if rng.random_bool(p) { Arm::Treated } else { Arm::Control }).collect()
}

fn factual(arms: &[Arm], mu0: &[f64], mu1: &[f64]) -> Vec<f64> {
    arms.iter().enumerate().map(|(i, a)| if *a == Arm::Treated { mu1[i] } else { mu0[i] }).collect()
}

/// Adds `sd · ε`, `ε ~ N(0, 1)`, to each mean.
fn add_noise<R: Rng + ?Sized>(means: &[f64], sd: f64, mode: NoiseMode, rng: &mut R) -> Vec<f64> {
    let scale = sd * mode.scale();
    means.iter().map(|m| m + scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

// ---------------------------------------------------------------- CausalBALD

pub fn causalbald_propensity(x: f64) -> f64 {
    sigmoid(2.0 * x + 0.5)
}

pub fn causalbald_mu0(x: f64) -> f64 {
    1.0 + 2.0 * (2.0 * x).sin()
}

pub fn causalbald_mu1(x: f64) -> f64 {
    2.0 * x + 3.0 - 2.0 * (2.0 * x).sin()
}

pub fn gen_causalbald<R: Rng + ?Sized>(n: usize, shift: bool, rng: &mut R) -> Result<Dataset> {
    gen_causalbald_with(n, shift, NoiseMode::Standard, rng)
}

/// `x ~ N(0, 1)` (or `U(0.2, 0.5)` under shift), `t ~ Bern(sigmoid(2x + 0.5))`,
/// `y = µ_t(x) + ε` with `ε ~ N(0, 1)`.
pub fn gen_causalbald_with<R: Rng + ?Sized>(n: usize, shift: bool, noise: NoiseMode, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return input("CausalBALD needs n ≥ 1");
    }
    let xs: Vec<f64> = if shift {
        let u = Uniform::new(0.2, 0.5).expect("valid range");
        (0..n).map(|_| u.sample(rng)).collect()
    } else {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    };
    let pi: Vec<f64> = xs.iter().map(|&x| causalbald_propensity(x)).collect();
    let arms = draw_arms(&pi, rng);
    let mu0: Vec<f64> = xs.iter().map(|&x| causalbald_mu0(x)).collect();
    let mu1: Vec<f64> = xs.iter().map(|&x| causalbald_mu1(x)).collect();
    let outcomes = add_noise(&factual(&arms, &mu0, &mu1), 1.0, noise, rng);
    Dataset::new(Covariates::new(xs, 1)?, arms, outcomes, mu0, mu1, Some(pi))
}

// ---------------------------------------------------------------------- Hahn

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prognostic {
    Linear,
    Nonlinear,
}

impl Prognostic {
    pub fn name(self) -> &'static str {
        match self {
            Prognostic::Linear => "linear",
            Prognostic::Nonlinear => "nonlinear",
        }
    }
}

fn hahn_g(x5: f64) -> f64 {
    match x5 as i64 {
        1 => 2.0,
        2 => -1.0,
        _ => -4.0,
    }
}

/// Prognostic score on `x = (x₁, …, x₅)`.
pub fn hahn_mu(x: &[f64], prognostic: Prognostic) -> f64 {
    match prognostic {
        Prognostic::Nonlinear => -6.0 + hahn_g(x[4]) + 6.0 * (x[2] - 1.0).abs(),
        Prognostic::Linear => 1.0 + hahn_g(x[4]) + x[0] * x[2],
    }
}

pub fn hahn_tau(x: &[f64]) -> f64 {
    1.0 + 2.0 * x[1] * x[3]
}

pub fn gen_hahn<R: Rng + ?Sized>(n: usize, prognostic: Prognostic, shift: bool, rng: &mut R) -> Result<Dataset> {
    gen_hahn_with(n, prognostic, shift, NoiseMode::Standard, rng)
}

/// Hahn design with the Gaussian-pdf propensity
/// `π = 0.8·φ(3µ/σ_µ) − 0.5·x₁ + ξ`, clamped to `[0.01, 0.99]`, and noise
/// scaled so that `sd(µ + tτ)/sd(ε) = 3` on the generated batch.
pub fn gen_hahn_with<R: Rng + ?Sized>(
    n: usize,
    prognostic: Prognostic,
    shift: bool,
    noise: NoiseMode,
    rng: &mut R,
) -> Result<Dataset> {
    if n < 2 {
        return input("the Hahn design needs n ≥ 2");
    }
    let shifted = Uniform::new(0.2, 0.5).expect("valid range");
    let mut values = Vec::with_capacity(5 * n);
    for _ in 0..n {
        for _ in 0..3 {
            values.push(if shift { shifted.sample(rng) } else { rng.sample(StandardNormal) });
        }
        values.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        values.push(rng.random_range(1..=3) as f64);
    }
    let covariates = Covariates::new(values, 5)?;
    let mu: Vec<f64> = covariates.rows().map(|x| hahn_mu(x, prognostic)).collect();
    let tau: Vec<f64> = covariates.rows().map(hahn_tau).collect();
    let sd_mu = sample_sd(&mu);
    let phi = StatNormal::standard();
    let xi = Uniform::new(0.05, 0.15).expect("valid range");
    let pi: Vec<f64> = covariates
        .rows()
        .zip(&mu)
        .map(|(x, m)| {
            let scaled = if sd_mu > 0.0 { 3.0 * m / sd_mu } else { 0.0 };
            (0.8 * phi.pdf(scaled) - 0.5 * x[0] + xi.sample(rng)).clamp(0.01, 0.99)
        })
        .collect();
    let arms = draw_arms(&pi, rng);
    let mu1: Vec<f64> = mu.iter().zip(&tau).map(|(m, t)| m + t).collect();
    let signal = factual(&arms, &mu, &mu1);
    let sd_eps = sample_sd(&signal) / 3.0;
    let outcomes = add_noise(&signal, sd_eps, noise, rng);
    Dataset::new(covariates, arms, outcomes, mu, mu1, Some(pi))
}

// -------------------------------------------------------- semi-synthetic data

/// Column layout of a semi-synthetic covariate file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Ihdp,
    Actg,
}

pub const IHDP_COLUMNS: [&str; 25] = [
    "bw", "b.head", "preterm", "birth.o", "nnhealth", "momage", "sex", "twin", "b.marr", "mom.lths", "mom.hs",
    "mom.scoll", "cig", "first", "booze", "drugs", "work.dur", "prenatal", "ark", "ein", "har", "mia", "pen", "tex",
    "was",
];
pub const IHDP_CONTINUOUS: usize = 6;

pub const ACTG_COLUMNS: [&str; 12] =
    ["age", "wtkg", "hemo", "homo", "drugs", "oprior", "z30", "preanti", "race", "gender", "str2", "karnof_hi"];
const ACTG_CONTINUOUS: [usize; 3] = [0, 1, 7];

pub const TREATMENT_COLUMN: &str = "t";

impl Schema {
    pub fn name(self) -> &'static str {
        match self {
            Schema::Ihdp => "ihdp",
            Schema::Actg => "actg",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Schema::Ihdp => &IHDP_COLUMNS,
            Schema::Actg => &ACTG_COLUMNS,
        }
    }

    pub fn is_continuous(self, j: usize) -> bool {
        match self {
            Schema::Ihdp => j < IHDP_CONTINUOUS,
            Schema::Actg => ACTG_CONTINUOUS.contains(&j),
        }
    }

    /// Rows of the original cohort files.
    pub fn cohort_size(self) -> usize {
        match self {
            Schema::Ihdp => 747,
            Schema::Actg => 813,
        }
    }

    /// Treated share of the original cohorts (139/747 and 281/813).
    fn treated_share(self) -> f64 {
        match self {
            Schema::Ihdp => 139.0 / 747.0,
            Schema::Actg => 281.0 / 813.0,
        }
    }

    fn check_width(self, xs: &Covariates) -> Result<()> {
        let want = self.columns().len();
        if xs.dim() != want {
            return input(format!("{} covariates need {want} columns, got {}", self.name(), xs.dim()));
        }
        Ok(())
    }
}

/// Centers each continuous column and scales it to unit sample sd.
pub fn standardize(xs: &mut Covariates, schema: Schema) {
    for j in (0..xs.dim()).filter(|&j| schema.is_continuous(j)) {
        let col = xs.column(j);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let sd = if col.len() > 1 { sample_sd(&col) } else { 0.0 };
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..xs.len() {
            let v = &mut xs.row_mut(i)[j];
            *v = (*v - mean) / scale;
        }
    }
}

/// Reads a comma-delimited covariate file with a header row.
///
/// Every schema column and the treatment column `t` must be present (extra
/// columns are ignored). Continuous columns are standardized.
pub fn load_covariates_csv(path: &Path, schema: Schema) -> Result<(Covariates, Vec<Arm>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut positions = Vec::with_capacity(schema.columns().len());
    for name in schema.columns() {
        match find(name) {
            Some(p) => positions.push(p),
            None => return input(format!("{}: missing {} column `{name}`", path.display(), schema.name())),
        }
    }
    let Some(t_pos) = find(TREATMENT_COLUMN) else {
        return input(format!("{}: missing treatment column `{TREATMENT_COLUMN}`", path.display()));
    };
    let mut values = Vec::new();
    let mut arms = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let line = r + 2;
        let cell = |p: usize, name: &str| -> Result<f64> {
            let raw = record.get(p).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => input(format!("{}: line {line}, column `{name}`: `{raw}` is not a finite number", path.display())),
            }
        };
        for (p, name) in positions.iter().zip(schema.columns()) {
            values.push(cell(*p, name)?);
        }
        let t = cell(t_pos, TREATMENT_COLUMN)?;
        match Arm::from_indicator(t) {
            Ok(a) => arms.push(a),
            Err(_) => return input(format!("{}: line {line}: treatment `{t}` is not 0 or 1", path.display())),
        }
    }
    if arms.is_empty() {
        return input(format!("{}: no data rows", path.display()));
    }
    let mut xs = Covariates::new(values, schema.columns().len())?;
    standardize(&mut xs, schema);
    Ok((xs, arms))
}

/// Placeholder covariates with the schema's column roles: standard normal
/// continuous columns, fair-coin binary columns, and treatments at the
/// original cohort's treated share. Useful when the real files are absent.
pub fn surrogate_covariates<R: Rng + ?Sized>(schema: Schema, n: usize, rng: &mut R) -> (Covariates, Vec<Arm>) {
    let d = schema.columns().len();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        for j in 0..d {
            values.push(if schema.is_continuous(j) {
                rng.sample(StandardNormal)
            } else if rng.random_bool(0.5) {
                1.0
            } else {
                0.0
            });
        }
    }
    let arms = (0..n).map(|_| if rng.random_bool(schema.treated_share()) { Arm::Treated } else { Arm::Control }).collect();
    (Covariates::new(values, d).expect("non-empty schema"), arms)
}

const IHDP_BETA_VALUES: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];
const IHDP_BETA_PROBS: [f64; 5] = [0.6, 0.1, 0.1, 0.1, 0.1];

/// Sparse IHDP response coefficients `β_B`.
pub fn sample_ihdp_beta<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    (0..IHDP_COLUMNS.len())
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (v, p) in IHDP_BETA_VALUES.iter().zip(IHDP_BETA_PROBS) {
                acc += p;
                if u < acc {
                    return *v;
                }
            }
            IHDP_BETA_VALUES[4]
        })
        .collect()
}

fn linear_index(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(x, b)| (x + 0.5) * b).sum()
}

pub fn gen_ihdp_outcomes<R: Rng + ?Sized>(
    covariates: &Covariates,
    arms: &[Arm],
    shift: bool,
    rng: &mut R,
) -> Result<Dataset> {
    let beta = sample_ihdp_beta(rng);
    gen_ihdp_outcomes_with(covariates, arms, &beta, shift, NoiseMode::Standard, rng)
}

/// IHDP response surface with given coefficients.
///
/// Standard: `µ₀ = exp((x + 0.5)β)`, `µ₁ = (x + 0.5)β − ω` with `ω` chosen so
/// the effect on the treated averages exactly 4. Shift: birth weight and head
/// circumference are redrawn from `U(0, 0.5)`, their coefficients zeroed, and
/// `µ₁ = µ₀ + 3·bw·b.head`.
pub fn gen_ihdp_outcomes_with<R: Rng + ?Sized>(
    covariates: &Covariates,
    arms: &[Arm],
    beta: &[f64],
    shift: bool,
    noise: NoiseMode,
    rng: &mut R,
) -> Result<Dataset> {
    Schema::Ihdp.check_width(covariates)?;
    if beta.len() != IHDP_COLUMNS.len() {
        return input(format!("IHDP coefficients need {} entries, got {}", IHDP_COLUMNS.len(), beta.len()));
    }
    if arms.len() != covariates.len() || arms.is_empty() {
        return input("IHDP covariates and treatments must be non-empty and of equal length");
    }
    let mut xs = covariates.clone();
    let (mu0, mu1): (Vec<f64>, Vec<f64>) = if shift {
        let u = Uniform::new(0.0, 0.5).expect("valid range");
        for i in 0..xs.len() {
            let row = xs.row_mut(i);
            row[0] = u.sample(rng);
            row[1] = u.sample(rng);
        }
        let mut b = beta.to_vec();
        b[0] = 0.0;
        b[1] = 0.0;
        xs.rows()
            .map(|x| {
                let m0 = linear_index(x, &b).exp();
                (m0, m0 + 3.0 * x[0] * x[1])
            })
            .unzip()
    } else {
        let treated: Vec<usize> = (0..arms.len()).filter(|&i| arms[i] == Arm::Treated).collect();
        if treated.is_empty() {
            return input("IHDP outcomes need at least one treated unit to fix the ATT");
        }
        let omega = treated
            .iter()
            .map(|&i| {
                let z = linear_index(xs.row(i), beta);
                z - z.exp()
            })
            .sum::<f64>()
            / treated.len() as f64
            - 4.0;
        xs.rows()
            .map(|x| {
                let z = linear_index(x, beta);
                (z.exp(), z - omega)
            })
            .unzip()
    };
    let outcomes = add_noise(&factual(arms, &mu0, &mu1), 1.0, noise, rng);
    Dataset::new(xs, arms.to_vec(), outcomes, mu0, mu1, None)
}

/// ACTG prognostic score on standardized covariates.
pub fn actg_mu(x: &[f64]) -> f64 {
    let (age, wtkg, hemo, z30, race, gender) = (x[0], x[1], x[2], x[6], x[8], x[9]);
    6.0 + 0.3 * wtkg * wtkg - age.sin() * (gender + 1.0) + 0.6 * hemo * race - 0.2 * z30
}

pub fn actg_tau(x: &[f64]) -> f64 {
    let (age, wtkg, karnof_hi) = (x[0], x[1], x[11]);
    1.0 + 1.5 * wtkg.sin() * (karnof_hi + 1.0) + 2.0 * age
}

/// `σ_y = (max µ − min µ)/8` over the batch.
pub fn actg_noise_sd(mu: &[f64]) -> f64 {
    let max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / 8.0
}

pub fn gen_actg_outcomes<R: Rng + ?Sized>(covariates: &Covariates, arms: &[Arm], rng: &mut R) -> Result<Dataset> {
    gen_actg_outcomes_with(covariates, arms, NoiseMode::Standard, rng)
}

pub fn gen_actg_outcomes_with<R: Rng + ?Sized>(
    covariates: &Covariates,
    arms: &[Arm],
    noise: NoiseMode,
    rng: &mut R,
) -> Result<Dataset> {
    Schema::Actg.check_width(covariates)?;
    if arms.len() != covariates.len() || arms.is_empty() {
        return input("ACTG covariates and treatments must be non-empty and of equal length");
    }
    let mu: Vec<f64> = covariates.rows().map(actg_mu).collect();
    let mu1: Vec<f64> = covariates.rows().zip(&mu).map(|(x, m)| m + actg_tau(x)).collect();
    let sd = actg_noise_sd(&mu);
    let outcomes = add_noise(&factual(arms, &mu, &mu1), sd, noise, rng);
    Dataset::new(covariates.clone(), arms.to_vec(), outcomes, mu, mu1, None)
}

// -------------------------------------------------------------------- splits

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub pool: usize,
    pub validation: usize,
    pub test: usize,
    pub shift: bool,
}

impl SplitSpec {
    /// Synthetic protocol: 2000 pool, 200 validation, 2000 test.
    pub fn synthetic(shift: bool) -> Self {
        Self { pool: 2000, validation: 200, test: 2000, shift }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool == 0 || self.test == 0 {
            return input("pool and test sizes must be positive");
        }
        Ok(())
    }
}

/// Disjoint index partitions of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub pool: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` and cuts it into pool, validation and test partitions.
pub fn make_splits<R: Rng + ?Sized>(n: usize, spec: &SplitSpec, rng: &mut R) -> Result<Splits> {
    spec.validate()?;
    let need = spec.pool + spec.validation + spec.test;
    if need > n {
        return input(format!("split sizes sum to {need} but the dataset has {n} rows"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let validation_end = spec.pool + spec.validation;
    Ok(Splits {
        pool: idx[..spec.pool].to_vec(),
        validation: idx[spec.pool..validation_end].to_vec(),
        test: idx[validation_end..need].to_vec(),
    })
}

/// Benchmark family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    CausalBald,
    Hahn(Prognostic),
    Ihdp,
    Actg,
}

impl DatasetKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "causalbald" => DatasetKind::CausalBald,
            "hahn" | "hahn_nonlinear" => DatasetKind::Hahn(Prognostic::Nonlinear),
            "hahn_linear" => DatasetKind::Hahn(Prognostic::Linear),
            "ihdp" => DatasetKind::Ihdp,
            "actg" => DatasetKind::Actg,
            other => {
                return input(format!(
                    "unknown dataset `{other}` (expected causalbald, hahn, hahn_linear, hahn_nonlinear, ihdp or actg)"
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::CausalBald => "causalbald",
            DatasetKind::Hahn(Prognostic::Nonlinear) => "hahn_nonlinear",
            DatasetKind::Hahn(Prognostic::Linear) => "hahn_linear",
            DatasetKind::Ihdp => "ihdp",
            DatasetKind::Actg => "actg",
        }
    }

    pub fn schema(self) -> Option<Schema> {
        match self {
            DatasetKind::Ihdp => Some(Schema::Ihdp),
            DatasetKind::Actg => Some(Schema::Actg),
            _ => None,
        }
    }

    pub fn supports_shift(self) -> bool {
        !matches!(self, DatasetKind::Actg)
    }

    /// Default partition sizes for `n` semi-synthetic rows or the synthetic protocol.
    pub fn default_split(self, n_rows: Option<usize>, shift: bool) -> SplitSpec {
        match (self, n_rows) {
            (DatasetKind::Ihdp, Some(n)) => {
                let pool = (n as f64 * 523.0 / 747.0).round() as usize;
                SplitSpec { pool, validation: 0, test: n - pool, shift }
            }
            (DatasetKind::Actg, Some(n)) => {
                let pool = (n as f64 * 0.7).round() as usize;
                SplitSpec { pool, validation: 0, test: n - pool, shift }
            }
            _ => SplitSpec::synthetic(shift),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub pool: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Generates one benchmark instance.
///
/// Under shift the pool and validation partitions follow the standard design
/// and the test partition is drawn from the shifted law. Semi-synthetic kinds
/// need `covariates` (from [`load_covariates_csv`] or [`surrogate_covariates`]).
pub fn build_benchmark<R: Rng + ?Sized>(
    kind: DatasetKind,
    spec: &SplitSpec,
    covariates: Option<(&Covariates, &[Arm])>,
    rng: &mut R,
) -> Result<Benchmark> {
    spec.validate()?;
    if spec.shift && !kind.supports_shift() {
        return input(format!("{kind} has no covariate-shift variant"));
    }
    let synthetic = |gen: &mut dyn FnMut(usize, bool, &mut R) -> Result<Dataset>, rng: &mut R| -> Result<Benchmark> {
        if spec.shift {
            let train = gen(spec.pool + spec.validation, false, rng)?;
            let test = gen(spec.test, true, rng)?;
            let pool_idx: Vec<usize> = (0..spec.pool).collect();
            let val_idx: Vec<usize> = (spec.pool..spec.pool + spec.validation).collect();
            Ok(Benchmark { pool: train.select(&pool_idx), validation: train.select(&val_idx), test })
        } else {
            let all = gen(spec.pool + spec.validation + spec.test, false, rng)?;
            let s = make_splits(all.len(), spec, rng)?;
            Ok(Benchmark { pool: all.select(&s.pool), validation: all.select(&s.validation), test: all.select(&s.test) })
        }
    };
    match kind {
        DatasetKind::CausalBald => synthetic(&mut |n, shift, r| gen_causalbald(n, shift, r), rng),
        DatasetKind::Hahn(p) => synthetic(&mut |n, shift, r| gen_hahn(n, p, shift, r), rng),
        DatasetKind::Ihdp | DatasetKind::Actg => {
            let Some((xs, arms)) = covariates else {
                return input(format!("{kind} needs a covariate file"));
            };
            let s = make_splits(xs.len(), spec, rng)?;
            let data = if kind == DatasetKind::Ihdp {
                let beta = sample_ihdp_beta(rng);
                let full = gen_ihdp_outcomes_with(xs, arms, &beta, false, NoiseMode::Standard, rng)?;
                let mut test = full.select(&s.test);
                if spec.shift {
                    test = gen_ihdp_outcomes_with(&test.covariates, &test.arms, &beta, true, NoiseMode::Standard, rng)?;
                }
                Benchmark { pool: full.select(&s.pool), validation: full.select(&s.validation), test }
            } else {
                let full = gen_actg_outcomes(xs, arms, rng)?;
                Benchmark { pool: full.select(&s.pool), validation: full.select(&s.validation), test: full.select(&s.test) }
            };
            Ok(data)
        }
    }
}

/// `N(0, 1)` density, exposed for oracle computations.
pub fn std_normal_pdf(x: f64) -> f64 {
    StatNormal::standard().pdf(x)
}
