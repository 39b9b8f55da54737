//! Executes the experiment matrix and persists `results.csv` and `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use causal_epig::active::{run_active_learning, CandidatePool, FactualOracle, RunSeeds};
use causal_epig::data::{Arm, Covariates};
use causal_epig::dgp::{build_benchmark, load_covariates_csv, surrogate_covariates, Benchmark};
use causal_epig::evaluation::{CellKey, PeheEvaluator, RunRecord, StepEntry};
use causal_epig::rng::{derive_seed, stream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, ExperimentConfig};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Root under which runs without an explicit output directory are written.
pub const OUTPUT_ROOT_ENV: &str = "CAUSAL_EPIG_OUTPUT";
pub const VERSION: &str = concat!("causal-epig ", env!("CARGO_PKG_VERSION"));

/// One line of `results.csv`. Failed cells without any completed step have
/// empty step and metric fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub variant: String,
    pub estimator: String,
    pub method: String,
    pub seed: u64,
    pub step: Option<usize>,
    pub n_labeled: Option<usize>,
    pub sqrt_pehe_pool: Option<f64>,
    pub sqrt_pehe_test: Option<f64>,
    pub acq_seconds: Option<f64>,
    pub status: String,
}

pub const RESULT_COLUMNS: [&str; 11] = [
    "dataset",
    "variant",
    "estimator",
    "method",
    "seed",
    "step",
    "n_labeled",
    "sqrt_pehe_pool",
    "sqrt_pehe_test",
    "acq_seconds",
    "status",
];

impl ResultRow {
    pub fn cell(&self) -> Cell {
        Cell {
            dataset: self.dataset.clone(),
            variant: self.variant.clone(),
            estimator: self.estimator.clone(),
            method: self.method.clone(),
            seed: self.seed,
        }
    }
}

/// RNG seeds of a cell. Data and warm start depend on (seed, dataset,
/// variant) only, so all estimators and methods see the same benchmark
/// instance and initial labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub data: u64,
    pub warm: u64,
    pub acquisition: u64,
}

impl CellSeeds {
    pub fn of(cell: &Cell) -> Self {
        let shared = [cell.dataset.as_str(), cell.variant.as_str()];
        Self {
            data: derive_seed(cell.seed, &[shared[0], shared[1], "data"]),
            warm: derive_seed(cell.seed, &[shared[0], shared[1], "warm"]),
            acquisition: derive_seed(
                cell.seed,
                &[shared[0], shared[1], cell.estimator.as_str(), cell.method.as_str(), "acquisition"],
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Pending,
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    #[serde(flatten)]
    pub cell: Cell,
    pub seeds: CellSeeds,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

/// Covariate table for semi-synthetic datasets: the configured file, or a
/// surrogate table of the cohort's size drawn from a fixed stream.
pub fn load_covariates(config: &ExperimentConfig) -> Result<Option<(Covariates, Vec<Arm>)>> {
    let Some(schema) = config.kind()?.schema() else {
        return Ok(None);
    };
    match &config.dataset.covariates {
        Some(path) => Ok(Some(load_covariates_csv(path, schema)?)),
        None => {
            let mut rng = stream(0, &["surrogate", schema.name()]);
            Ok(Some(surrogate_covariates(schema, schema.cohort_size(), &mut rng)))
        }
    }
}

pub fn build_cell_data(
    config: &ExperimentConfig,
    cell: &Cell,
    covariates: Option<&(Covariates, Vec<Arm>)>,
) -> Result<Benchmark> {
    let spec = config.split_spec(&cell.variant, covariates.map(|c| c.0.len()))?;
    let mut rng = stream(CellSeeds::of(cell).data, &[]);
    Ok(build_benchmark(config.kind()?, &spec, covariates.map(|(x, a)| (x, a.as_slice())), &mut rng)?)
}

/// Runs one cell. Failures of any stage are reported in the record.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell, covariates: Option<&(Covariates, Vec<Arm>)>) -> RunRecord {
    let key = CellKey {
        dataset: cell.dataset.clone(),
        variant: cell.variant.clone(),
        estimator: cell.estimator.clone(),
        method: cell.method.clone(),
    };
    let attempt = || -> Result<(Vec<StepEntry>, Option<String>)> {
        let bench = build_cell_data(config, cell, covariates)?;
        let loop_cfg = config.loop_config(&cell.estimator, &cell.method, &cell.variant)?;
        let seeds = CellSeeds::of(cell);
        let mut oracle = FactualOracle::new(&bench.pool);
        let evaluator = PeheEvaluator::new(&bench.pool, &bench.test);
        let out = run_active_learning(
            &loop_cfg,
            &CandidatePool::from_dataset(&bench.pool),
            &CandidatePool::from_dataset(&bench.test),
            &mut oracle,
            &evaluator,
            RunSeeds { warm: seeds.warm, acquisition: seeds.acquisition },
        )?;
        Ok((out.entries, out.failure))
    };
    match attempt() {
        Ok((entries, failure)) => RunRecord { key, seed: cell.seed, entries, failure },
        Err(e) => RunRecord { key, seed: cell.seed, entries: Vec::new(), failure: Some(format!("{e:#}")) },
    }
}

pub fn record_rows(record: &RunRecord) -> Vec<ResultRow> {
    let status = if record.failed() { "failed" } else { "ok" };
    let base = |e: Option<&StepEntry>| ResultRow {
        dataset: record.key.dataset.clone(),
        variant: record.key.variant.clone(),
        estimator: record.key.estimator.clone(),
        method: record.key.method.clone(),
        seed: record.seed,
        step: e.map(|e| e.step),
        n_labeled: e.map(|e| e.n_labeled),
        sqrt_pehe_pool: e.map(|e| e.sqrt_pehe_pool),
        sqrt_pehe_test: e.map(|e| e.sqrt_pehe_test),
        acq_seconds: e.map(|e| e.acq_seconds),
        status: status.to_string(),
    };
    if record.entries.is_empty() {
        vec![base(None)]
    } else {
        record.entries.iter().map(|e| base(Some(e))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub append: bool,
    /// Overrides the configured worker count.
    pub jobs: Option<usize>,
}

/// Output directory: explicit, else the configured one, else
/// `$CAUSAL_EPIG_OUTPUT/<name>` (default root `results`).
pub fn resolve_out_dir(explicit: Option<&Path>, config: &ExperimentConfig, name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &config.experiment.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"));
    root.join(name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixReport {
    pub total: usize,
    pub skipped: usize,
    pub ran: usize,
    pub failed: usize,
    pub manifest: Manifest,
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers().with_context(|| format!("reading header of {}", path.display()))?.clone();
    if headers.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        bail!("{}: header must be {}", path.display(), RESULT_COLUMNS.join(","));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<ResultRow>().enumerate() {
        // Line 1 is the header.
        let row = rec.with_context(|| format!("{}: malformed row at line {}", path.display(), i + 2))?;
        if row.status != "ok" && row.status != "failed" {
            bail!("{}: line {}: unknown status `{}`", path.display(), i + 2, row.status);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

struct Sink {
    writer: csv::Writer<File>,
    manifest: Manifest,
    manifest_path: PathBuf,
    index: BTreeMap<Cell, usize>,
}

impl Sink {
    fn complete(&mut self, cell: &Cell, record: &RunRecord) -> Result<()> {
        for row in record_rows(record) {
            self.writer.serialize(row)?;
            self.writer.flush()?;
        }
        let entry = &mut self.manifest.cells[self.index[cell]];
        entry.status = if record.failed() { CellStatus::Failed } else { CellStatus::Ok };
        entry.failure = record.failure.clone();
        self.manifest.save(&self.manifest_path)
    }
}

/// Runs every cell not already completed. With `append`, completed cells of
/// an existing manifest are kept and rows of unfinished cells are discarded
/// before resuming; without it an existing results file is an error.
pub fn run_matrix(config: &ExperimentConfig, opts: &RunOptions) -> Result<MatrixReport> {
    config.validate()?;
    let dir = &opts.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let results_path = dir.join(RESULTS_FILE);
    let manifest_path = dir.join(MANIFEST_FILE);

    let mut done: BTreeMap<Cell, CellEntry> = BTreeMap::new();
    if results_path.exists() || manifest_path.exists() {
        if !opts.append {
            bail!("{} already holds results; pass --append to resume or choose another --out", dir.display());
        }
        if manifest_path.exists() {
            for e in Manifest::load(&manifest_path)?.cells {
                if e.status != CellStatus::Pending {
                    done.insert(e.cell.clone(), e);
                }
            }
        }
        let kept: Vec<ResultRow> = if results_path.exists() {
            read_rows(&results_path)?.into_iter().filter(|r| done.contains_key(&r.cell())).collect()
        } else {
            Vec::new()
        };
        let with_rows: BTreeSet<Cell> = kept.iter().map(ResultRow::cell).collect();
        done.retain(|c, _| with_rows.contains(c));
        write_rows(&results_path, &kept)?;
    }

    let mut cells: Vec<CellEntry> = done.values().cloned().collect();
    let todo: Vec<Cell> = config.cells().into_iter().filter(|c| !done.contains_key(c)).collect();
    cells.extend(todo.iter().map(|c| CellEntry {
        cell: c.clone(),
        seeds: CellSeeds::of(c),
        status: CellStatus::Pending,
        failure: None,
    }));
    let manifest = Manifest { version: VERSION.to_string(), config: config.clone(), cells };
    manifest.save(&manifest_path)?;

    let fresh = !results_path.exists();
    let file = OpenOptions::new().create(true).append(true).open(&results_path)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        writer.write_record(RESULT_COLUMNS)?;
        writer.flush()?;
    }
    let index = manifest.cells.iter().enumerate().map(|(i, e)| (e.cell.clone(), i)).collect();
    let sink = Mutex::new(Sink { writer, manifest, manifest_path, index });

    let covariates = load_covariates(config)?;
    let jobs = opts.jobs.unwrap_or(config.experiment.jobs).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let outcome: Result<()> = pool.install(|| {
        todo.par_iter().try_for_each(|cell| {
            let record = run_cell(config, cell, covariates.as_ref());
            sink.lock().expect("results sink poisoned").complete(cell, &record)
        })
    });
    outcome?;
    let sink = sink.into_inner().expect("results sink poisoned");
    let failed = sink.manifest.failed();
    Ok(MatrixReport {
        total: sink.manifest.cells.len(),
        skipped: done.len(),
        ran: todo.len(),
        failed,
        manifest: sink.manifest,
    })
}

/// Re-executes cell `index` of a manifest and returns its rows.
pub fn replay_cell(manifest: &Manifest, index: usize) -> Result<Vec<ResultRow>> {
    let Some(entry) = manifest.cells.get(index) else {
        bail!("manifest has {} cells, no cell {index}", manifest.cells.len());
    };
    let config = &manifest.config;
    let covariates = load_covariates(config)?;
    Ok(record_rows(&run_cell(config, &entry.cell, covariates.as_ref())))
}

/// Formats a row as `results.csv` would, without the trailing newline.
pub fn format_row(row: &ResultRow) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(row)?;
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(String::from_utf8(bytes)?.trim_end().to_string())
}
