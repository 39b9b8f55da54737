//! Aggregated curves and relative-improvement tables from `results.csv`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use causal_epig::evaluation::{aggregate_runs, improvement_table, CellKey, Metric, RunRecord, StepEntry};

use crate::runner::{read_rows, write_atomic, ResultRow};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const IMPROVEMENT_FILE: &str = "improvement.csv";

pub const SUMMARY_COLUMNS: [&str; 10] =
    ["dataset", "variant", "method", "estimator", "step", "n_labeled", "metric", "mean", "sd", "count"];

pub const IMPROVEMENT_COLUMNS: [&str; 10] = [
    "dataset",
    "variant",
    "method",
    "estimator",
    "step",
    "n_labeled",
    "metric",
    "of_means",
    "mean_over_seeds",
    "paired_seeds",
];

/// Groups rows into one record per (cell, seed).
pub fn rows_to_records(rows: &[ResultRow]) -> Result<Vec<RunRecord>> {
    let mut grouped: BTreeMap<(CellKey, u64), RunRecord> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let key = CellKey {
            dataset: r.dataset.clone(),
            variant: r.variant.clone(),
            estimator: r.estimator.clone(),
            method: r.method.clone(),
        };
        let rec = grouped.entry((key.clone(), r.seed)).or_insert_with(|| RunRecord {
            key,
            seed: r.seed,
            entries: Vec::new(),
            failure: None,
        });
        if r.status == "failed" {
            rec.failure = Some("failed".into());
        }
        match (r.step, r.n_labeled, r.sqrt_pehe_pool, r.sqrt_pehe_test, r.acq_seconds) {
            (Some(step), Some(n_labeled), Some(p), Some(t), Some(a)) => rec.entries.push(StepEntry {
                step,
                n_labeled,
                sqrt_pehe_pool: p,
                sqrt_pehe_test: t,
                acq_seconds: a,
            }),
            (None, None, None, None, None) if r.status == "failed" => {}
            _ => bail!("row {}: incomplete step fields", i + 2),
        }
    }
    let mut out: Vec<RunRecord> = grouped.into_values().collect();
    for r in &mut out {
        r.entries.sort_by_key(|e| e.step);
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let summary = aggregate_runs(records)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS)?;
    for ((key, step), (n_labeled, stats)) in &summary.rows {
        for (m, metric) in Metric::ALL.iter().enumerate() {
            let s = &stats[m];
            w.write_record([
                key.dataset.as_str(),
                &key.variant,
                &key.method,
                &key.estimator,
                &step.to_string(),
                &n_labeled.to_string(),
                metric.name(),
                &s.mean.to_string(),
                &s.sd().to_string(),
                &s.count.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

pub fn improvement_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(IMPROVEMENT_COLUMNS)?;
    for metric in [Metric::SqrtPehePool, Metric::SqrtPeheTest] {
        for row in improvement_table(records, metric)? {
            w.write_record([
                row.key.dataset.as_str(),
                &row.key.variant,
                &row.key.method,
                &row.key.estimator,
                &row.step.to_string(),
                &row.n_labeled.to_string(),
                metric.name(),
                &fmt_opt(row.of_means),
                &fmt_opt(row.mean_over_seeds),
                &row.paired_seeds.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

/// Writes `summary.csv` and `improvement.csv` into `out_dir` (default: next
/// to the results file) and returns their paths.
pub fn emit_summary(results: &Path, out_dir: Option<&Path>) -> Result<(PathBuf, PathBuf)> {
    let records = rows_to_records(&read_rows(results)?)?;
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => results.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir)?;
    let s = dir.join(SUMMARY_FILE);
    let i = dir.join(IMPROVEMENT_FILE);
    write_atomic(&s, &summary_csv(&records)?)?;
    write_atomic(&i, &improvement_csv(&records)?)?;
    Ok((s, i))
}
