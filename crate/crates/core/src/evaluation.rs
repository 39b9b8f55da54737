//! √PEHE, relative improvement over random acquisition, and cross-seed
//! aggregation of run trajectories.

use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::data::Covariates;
use crate::dgp::Dataset;
use crate::error::{input, Result};
use crate::posterior::CateModel;

/// Root of the mean squared difference between estimated and true CATE.
pub fn sqrt_pehe(tau_hat: &[f64], tau_true: &[f64]) -> Result<f64> {
    if tau_hat.len() != tau_true.len() {
        return input(format!("PEHE inputs differ in length: {} vs {}", tau_hat.len(), tau_true.len()));
    }
    if tau_hat.is_empty() {
        return input("PEHE needs at least one target");
    }
    let mse = tau_hat.iter().zip(tau_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / tau_hat.len() as f64;
    Ok(mse.sqrt())
}

/// `(random − method)/random` per step; steps where random is zero are `None`.
pub fn relative_improvement(method_curve: &[f64], random_curve: &[f64]) -> Result<Vec<Option<f64>>> {
    if method_curve.len() != random_curve.len() {
        return input(format!(
            "curves differ in length: {} vs {}",
            method_curve.len(),
            random_curve.len()
        ));
    }
    Ok(method_curve
        .iter()
        .zip(random_curve)
        .map(|(m, r)| if *r == 0.0 { None } else { Some((r - m) / r) })
        .collect())
}

/// One point of a trajectory: the warm start is step 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEntry {
    pub step: usize,
    pub n_labeled: usize,
    pub sqrt_pehe_pool: f64,
    pub sqrt_pehe_test: f64,
    pub acq_seconds: f64,
}

/// Identity of an experiment cell, excluding the seed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub dataset: String,
    pub variant: String,
    pub estimator: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: CellKey,
    pub seed: u64,
    pub entries: Vec<StepEntry>,
    /// Diagnostic of an aborted run; entries hold the completed prefix.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[1].n_labeled <= w[0].n_labeled {
                return input(format!("run {:?} seed {}: n_labeled is not strictly increasing", self.key, self.seed));
            }
        }
        if self.entries.iter().any(|e| e.sqrt_pehe_pool < 0.0 || e.sqrt_pehe_test < 0.0) {
            return input("negative √PEHE in run record");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    SqrtPehePool,
    SqrtPeheTest,
    AcqSeconds,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::SqrtPehePool, Metric::SqrtPeheTest, Metric::AcqSeconds];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SqrtPehePool => "sqrt_pehe_pool",
            Metric::SqrtPeheTest => "sqrt_pehe_test",
            Metric::AcqSeconds => "acq_seconds",
        }
    }

    pub fn of(self, e: &StepEntry) -> f64 {
        match self {
            Metric::SqrtPehePool => e.sqrt_pehe_pool,
            Metric::SqrtPeheTest => e.sqrt_pehe_test,
            Metric::AcqSeconds => e.acq_seconds,
        }
    }
}

/// Count, mean and sum of squared deviations, mergeable across partitions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStats {
    pub count: usize,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pooled combination of two partitions.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count) as f64 / n as f64;
        RunningStats { count: n, mean, m2 }
    }

    /// Sample standard deviation (divisor `n − 1`); zero for a single value.
    pub fn sd(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0).sqrt()
        }
    }
}

/// Aggregated statistics per cell and step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    /// `(cell, step) → (n_labeled, statistics per metric)`.
    pub rows: BTreeMap<(CellKey, usize), (usize, [RunningStats; 3])>,
    /// Failed runs per cell, excluded from `rows`.
    pub failed: BTreeMap<CellKey, usize>,
}

impl Summary {
    /// Combines two summaries over disjoint record sets.
    pub fn merge(&self, other: &Summary) -> Result<Summary> {
        let mut out = self.clone();
        for (k, (n_labeled, stats)) in &other.rows {
            match out.rows.get_mut(k) {
                Some((n, mine)) => {
                    if n != n_labeled {
                        return input(format!("inconsistent step grid for {:?} at step {}", k.0, k.1));
                    }
                    for m in 0..3 {
                        mine[m] = mine[m].merge(&stats[m]);
                    }
                }
                None => {
                    out.rows.insert(k.clone(), (*n_labeled, *stats));
                }
            }
        }
        for (k, c) in &other.failed {
            *out.failed.entry(k.clone()).or_default() += c;
        }
        Ok(out)
    }
}

fn sorted(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut v: Vec<&RunRecord> = records.iter().collect();
    v.sort_by(|a, b| (&a.key, a.seed).cmp(&(&b.key, b.seed)));
    v
}

/// Per cell and step: mean, sd and count of each metric over successful runs.
///
/// Records are processed in (cell, seed) order, so the result does not depend
/// on the input order.
pub fn aggregate_runs(records: &[RunRecord]) -> Result<Summary> {
    let mut summary = Summary::default();
    for r in sorted(records) {
        r.validate()?;
        if r.failed() {
            *summary.failed.entry(r.key.clone()).or_default() += 1;
            continue;
        }
        for e in &r.entries {
            let slot = summary.rows.entry((r.key.clone(), e.step)).or_insert((e.n_labeled, Default::default()));
            if slot.0 != e.n_labeled {
                return input(format!(
                    "inconsistent step grid for {:?}: step {} has n_labeled {} and {}",
                    r.key, e.step, slot.0, e.n_labeled
                ));
            }
            for (m, metric) in Metric::ALL.iter().enumerate() {
                slot.1[m].push(metric.of(e));
            }
        }
    }
    Ok(summary)
}

/// Relative improvement of one method over random acquisition at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub key: CellKey,
    pub step: usize,
    pub n_labeled: usize,
    /// Improvement of the cross-seed mean curves.
    pub of_means: Option<f64>,
    /// Mean of per-seed improvements, pairing runs by seed.
    pub mean_over_seeds: Option<f64>,
    pub paired_seeds: usize,
}

/// Relative improvement over the `random` method of the same dataset,
/// variant and estimator, in both aggregation orders.
pub fn improvement_table(records: &[RunRecord], metric: Metric) -> Result<Vec<ImprovementRow>> {
    let summary = aggregate_runs(records)?;
    let m = Metric::ALL.iter().position(|x| *x == metric).expect("metric listed");
    let random_key = |k: &CellKey| CellKey { method: "random".to_string(), ..k.clone() };
    let by_seed: BTreeMap<(&CellKey, u64), &RunRecord> =
        records.iter().filter(|r| !r.failed()).map(|r| ((&r.key, r.seed), r)).collect();
    let mut rows = Vec::new();
    for ((key, step), (n_labeled, stats)) in &summary.rows {
        if key.method == "random" {
            continue;
        }
        let rk = random_key(key);
        let Some((rn, rstats)) = summary.rows.get(&(rk.clone(), *step)) else {
            continue;
        };
        if rn != n_labeled {
            return input(format!("{key:?} and random disagree on n_labeled at step {step}"));
        }
        let of_means = relative_improvement(&[stats[m].mean], &[rstats[m].mean])?[0];
        let mut per_seed = RunningStats::default();
        for ((k, seed), r) in &by_seed {
            if *k != key {
                continue;
            }
            let Some(rr) = by_seed.get(&(&rk, *seed)) else { continue };
            let (Some(a), Some(b)) = (r.entries.iter().find(|e| e.step == *step), rr.entries.iter().find(|e| e.step == *step))
            else {
                continue;
            };
            if let Some(v) = relative_improvement(&[metric.of(a)], &[metric.of(b)])?[0] {
                per_seed.push(v);
            }
        }
        rows.push(ImprovementRow {
            key: key.clone(),
            step: *step,
            n_labeled: *n_labeled,
            of_means,
            mean_over_seeds: (per_seed.count > 0).then_some(per_seed.mean),
            paired_seeds: per_seed.count,
        });
    }
    Ok(rows)
}

/// Scores a fitted model against ground truth. This is the only place the
/// active-learning loop obtains PEHE values from.
pub trait Evaluator: Sync {
    /// `(√PEHE on the pool, √PEHE on the test set)`.
    fn evaluate(&self, model: &dyn CateModel) -> Result<(f64, f64)>;
}

/// Evaluates on every original pool row and every test row.
#[derive(Debug, Clone)]
pub struct PeheEvaluator {
    pool_covariates: Covariates,
    pool_tau: Vec<f64>,
    test_covariates: Covariates,
    test_tau: Vec<f64>,
}

impl PeheEvaluator {
    pub fn new(pool: &Dataset, test: &Dataset) -> Self {
        Self {
            pool_covariates: pool.covariates.clone(),
            pool_tau: pool.tau_true.clone(),
            test_covariates: test.covariates.clone(),
            test_tau: test.tau_true.clone(),
        }
    }
}

impl Evaluator for PeheEvaluator {
    fn evaluate(&self, model: &dyn CateModel) -> Result<(f64, f64)> {
        let pool = sqrt_pehe(&model.predict_tau(&self.pool_covariates), &self.pool_tau)?;
        let test = sqrt_pehe(&model.predict_tau(&self.test_covariates), &self.test_tau)?;
        Ok((pool, test))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Factual,
    Counterfactual,
    TrueEffect,
}

/// One recorded read of ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub accessor: &'static str,
    pub kind: AccessKind,
    pub partition: &'static str,
    pub index: usize,
}

/// Ground truth behind an access log, for auditing which component reads what.
#[derive(Debug)]
pub struct AuditedTruth {
    pool: Dataset,
    test: Dataset,
    log: Mutex<Vec<Access>>,
}

impl AuditedTruth {
    pub fn new(pool: Dataset, test: Dataset) -> Self {
        Self { pool, test, log: Mutex::new(Vec::new()) }
    }

    fn record(&self, accessor: &'static str, kind: AccessKind, partition: &'static str, index: usize) {
        self.log.lock().expect("audit log poisoned").push(Access { accessor, kind, partition, index });
    }

    fn data(&self, partition: &'static str) -> &Dataset {
        if partition == "test" {
            &self.test
        } else {
            &self.pool
        }
    }

    pub fn factual(&self, accessor: &'static str, partition: &'static str, index: usize) -> f64 {
        self.record(accessor, AccessKind::Factual, partition, index);
        self.data(partition).outcomes[index]
    }

    /// Mean of the potential outcome the unit did not receive.
    pub fn counterfactual(&self, accessor: &'static str, partition: &'static str, index: usize) -> f64 {
        self.record(accessor, AccessKind::Counterfactual, partition, index);
        let d = self.data(partition);
        match d.arms[index] {
            crate::data::Arm::Treated => d.mu0[index],
            crate::data::Arm::Control => d.mu1[index],
        }
    }

    pub fn tau(&self, accessor: &'static str, partition: &'static str, index: usize) -> f64 {
        self.record(accessor, AccessKind::TrueEffect, partition, index);
        self.data(partition).tau_true[index]
    }

    pub fn accesses(&self) -> Vec<Access> {
        self.log.lock().expect("audit log poisoned").clone()
    }
}

/// [`PeheEvaluator`] reading ground truth through an [`AuditedTruth`].
pub struct AuditedEvaluator<'a> {
    truth: &'a AuditedTruth,
}

impl<'a> AuditedEvaluator<'a> {
    pub const ACCESSOR: &'static str = "evaluation";

    pub fn new(truth: &'a AuditedTruth) -> Self {
        Self { truth }
    }
}

impl Evaluator for AuditedEvaluator<'_> {
    fn evaluate(&self, model: &dyn CateModel) -> Result<(f64, f64)> {
        let mut out = [0.0; 2];
        for (slot, partition) in out.iter_mut().zip(["pool", "test"]) {
            let d = self.truth.data(partition);
            let tau: Vec<f64> = (0..d.len()).map(|i| self.truth.tau(Self::ACCESSOR, partition, i)).collect();
            *slot = sqrt_pehe(&model.predict_tau(&d.covariates), &tau)?;
        }
        Ok((out[0], out[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(method: &str) -> CellKey {
        CellKey { dataset: "d".into(), variant: "standard".into(), estimator: "cmgp".into(), method: method.into() }
    }

    fn record(method: &str, seed: u64, values: &[f64]) -> RunRecord {
        RunRecord {
            key: key(method),
            seed,
            entries: values
                .iter()
                .enumerate()
                .map(|(i, v)| StepEntry { step: i, n_labeled: 10 + 5 * i, sqrt_pehe_pool: *v, sqrt_pehe_test: 2.0 * v, acq_seconds: 0.1 })
                .collect(),
            failure: None,
        }
    }

    #[test]
    fn pehe_examples() {
        assert_eq!(sqrt_pehe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sqrt_pehe(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!((sqrt_pehe(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(sqrt_pehe(&[], &[]).is_err());
        assert!(sqrt_pehe(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(relative_improvement(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), vec![Some(0.0), Some(0.0)]);
        assert_eq!(relative_improvement(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), vec![Some(0.5), Some(0.5)]);
        assert_eq!(relative_improvement(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), vec![Some(0.5), Some(0.25)]);
        assert_eq!(relative_improvement(&[1.0], &[0.0]).unwrap(), vec![None]);
    }

    #[test]
    fn aggregation_examples() {
        let s = aggregate_runs(&[record("random", 0, &[1.0])]).unwrap();
        let (_, stats) = &s.rows[&(key("random"), 0)];
        assert_eq!((stats[0].count, stats[0].sd()), (1, 0.0));

        let runs = [record("random", 0, &[1.0, 2.0]), record("random", 1, &[3.0, 2.0])];
        let s = aggregate_runs(&runs).unwrap();
        let (_, stats) = &s.rows[&(key("random"), 0)];
        assert_eq!(stats[0].mean, 2.0);
        assert!((stats[0].sd() - 2f64.sqrt()).abs() < 1e-15);
        let reversed = [runs[1].clone(), runs[0].clone()];
        assert_eq!(aggregate_runs(&reversed).unwrap(), s);
    }

    #[test]
    fn failed_runs_are_counted_not_averaged() {
        let mut bad = record("random", 2, &[100.0]);
        bad.failure = Some("fit failed".into());
        let s = aggregate_runs(&[record("random", 0, &[1.0]), bad]).unwrap();
        assert_eq!(s.failed[&key("random")], 1);
        assert_eq!(s.rows[&(key("random"), 0)].1[0].count, 1);
    }

    #[test]
    fn inconsistent_grids_are_rejected() {
        let a = record("random", 0, &[1.0, 2.0]);
        let mut b = record("random", 1, &[1.0, 2.0]);
        b.entries[1].n_labeled = 99;
        assert!(aggregate_runs(&[a, b]).is_err());
    }

    #[test]
    fn improvement_table_both_orders() {
        let runs = [
            record("random", 0, &[2.0]),
            record("random", 1, &[4.0]),
            record("epig", 0, &[1.0]),
            record("epig", 1, &[3.0]),
        ];
        let rows = improvement_table(&runs, Metric::SqrtPehePool).unwrap();
        assert_eq!(rows.len(), 1);
        // Means 2 vs 3 → 1/3; per seed 0.5 and 0.25 → 0.375.
        assert!((rows[0].of_means.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((rows[0].mean_over_seeds.unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(rows[0].paired_seeds, 2);
    }
}
