use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use causal_epig_cli::config::ExperimentConfig;
use causal_epig_cli::runner::{
    format_row, read_rows, replay_cell, run_matrix, CellStatus, Manifest, ResultRow, RunOptions, MANIFEST_FILE,
    RESULTS_FILE,
};
use causal_epig_cli::summary::{emit_summary, IMPROVEMENT_COLUMNS, SUMMARY_COLUMNS};

const SMALL: &str = r#"
[dataset]
name = "causalbald"
pool_size = 120
validation_size = 0
test_size = 100

[loop]
n_init = 20
batch_size = 10
budget = 40

[experiment]
methods = ["random", "causal_epig_tau"]
seeds = [0, 1]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-epig"))
}

fn opts(dir: &Path, append: bool, jobs: Option<usize>) -> RunOptions {
    RunOptions { out_dir: dir.to_path_buf(), append, jobs }
}

/// Rows without the timing column, as a set.
fn row_set(rows: &[ResultRow]) -> BTreeSet<String> {
    rows.iter()
        .map(|r| format_row(&ResultRow { acq_seconds: None, ..r.clone() }).unwrap())
        .collect()
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = ExperimentConfig::parse_str("[dataset]\nname = \"hahn\"\n[experiment]\nmethods = [\"random\"]\n").unwrap();
    assert_eq!(cfg.loop_.n_init, 50);
    assert_eq!(cfg.loop_.batch_size, 20);
    assert_eq!(cfg.loop_.temperature, None);
    assert_eq!(cfg.experiment.seeds, (0..10).collect::<Vec<u64>>());
    assert_eq!(cfg.experiment.estimators, vec!["cmgp"]);
    assert_eq!(cfg.dataset.variants, vec!["standard"]);
    assert_eq!(cfg.experiment.jobs, 1);
    let l = cfg.loop_config("cmgp", "causal_epig_tau", "standard").unwrap();
    assert_eq!(l.temperature(), 0.0);
}

#[test]
fn unknown_key_is_named_with_suggestion() {
    let text = "[dataset]\nname = \"causalbald\"\n[loop]\nbatchsize = 5\n[experiment]\nmethods = [\"random\"]\n";
    let err = format!("{:#}", ExperimentConfig::parse_str(text).unwrap_err());
    assert!(err.contains("`batchsize`"), "{err}");
    assert!(err.contains("did you mean `batch_size`"), "{err}");
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn semantic_errors_are_reported() {
    let cases = [
        ("[dataset]\nname = \"ihdpp\"\n[experiment]\nmethods = [\"random\"]\n", "ihdpp"),
        ("[dataset]\nname = \"causalbald\"\n[experiment]\nmethods = [\"causal_epig_taw\"]\n", "causal_epig_tau"),
        ("[dataset]\nname = \"causalbald\"\n[experiment]\nmethods = []\n", "methods"),
        ("[dataset]\nname = \"actg\"\nvariants = [\"shift\"]\n[experiment]\nmethods = [\"random\"]\n", "shift"),
        ("[dataset]\nname = \"causalbald\"\n[loop]\nn_init = 60\nbudget = 50\n[experiment]\nmethods = [\"random\"]\n", "budget"),
        ("[dataset]\nname = \"causalbald\"\n[experiment]\nmethods = [\"random\"]\nseeds = [1, 1]\n", "seeds"),
    ];
    for (text, needle) in cases {
        let err = format!("{:#}", ExperimentConfig::parse_str(text).unwrap_err());
        assert!(err.contains(needle), "{needle}: {err}");
    }
}

#[test]
fn config_round_trips() {
    let full = r#"
[dataset]
name = "ihdp"
variants = ["standard", "shift"]
pool_size = 400

[loop]
n_init = 30
batch_size = 5
budget = 100
temperature = 0.5
refit_hyperparams = false
target_mode = "test"
target_cap = 100

[experiment]
estimators = ["cmgp", "ensemble"]
methods = ["sundin", "causal_eig"]
seeds = [3, 4]
jobs = 2
output_dir = "somewhere"

[method_params]
sundin_samples = 20
causal_eig_grid = 10
"#;
    for text in [full, SMALL] {
        let a = ExperimentConfig::parse_str(text).unwrap();
        let b = ExperimentConfig::parse_str(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn matrix_counts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse_str(SMALL).unwrap();
    let report = run_matrix(&cfg, &opts(dir.path(), false, None)).unwrap();
    assert_eq!((report.total, report.ran, report.failed), (4, 4, 0));
    let manifest = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.cells.len(), 4);
    assert!(manifest.cells.iter().all(|c| c.status == CellStatus::Ok));
    assert_eq!(manifest.config, cfg);
    let rows = read_rows(&dir.path().join(RESULTS_FILE)).unwrap();
    // Warm start plus two rounds per cell.
    assert_eq!(rows.len(), 4 * 3);
    assert!(rows.iter().all(|r| r.status == "ok"));
}

#[test]
fn append_skips_completed_and_resumes_partial() {
    let cfg = ExperimentConfig::parse_str(SMALL).unwrap();
    let full = tempfile::tempdir().unwrap();
    run_matrix(&cfg, &opts(full.path(), false, None)).unwrap();
    let reference = row_set(&read_rows(&full.path().join(RESULTS_FILE)).unwrap());

    // Rerunning without --append refuses; with it nothing is re-run.
    assert!(run_matrix(&cfg, &opts(full.path(), false, None)).is_err());
    let again = run_matrix(&cfg, &opts(full.path(), true, None)).unwrap();
    assert_eq!((again.ran, again.skipped), (0, 4));
    assert_eq!(row_set(&read_rows(&full.path().join(RESULTS_FILE)).unwrap()), reference);

    // Simulate an interruption: one cell pending with a partial row left behind.
    let partial = tempfile::tempdir().unwrap();
    for f in [RESULTS_FILE, MANIFEST_FILE] {
        fs::copy(full.path().join(f), partial.path().join(f)).unwrap();
    }
    let mpath = partial.path().join(MANIFEST_FILE);
    let rpath = partial.path().join(RESULTS_FILE);
    let last = read_rows(&rpath).unwrap().last().unwrap().cell();
    let mut m = Manifest::load(&mpath).unwrap();
    let entry = m.cells.iter_mut().find(|c| c.cell == last).unwrap();
    entry.status = CellStatus::Pending;
    m.save(&mpath).unwrap();
    let text = fs::read_to_string(&rpath).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&rpath, lines[..lines.len() - 2].join("\n") + "\n").unwrap();
    let resumed = run_matrix(&cfg, &opts(partial.path(), true, None)).unwrap();
    assert_eq!((resumed.ran, resumed.skipped), (1, 3));
    let rows = read_rows(&rpath).unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(row_set(&rows), reference);
}

#[test]
fn parallel_and_serial_results_match() {
    let cfg = ExperimentConfig::parse_str(SMALL).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_matrix(&cfg, &opts(a.path(), false, Some(1))).unwrap();
    run_matrix(&cfg, &opts(b.path(), false, Some(4))).unwrap();
    let ra = read_rows(&a.path().join(RESULTS_FILE)).unwrap();
    let rb = read_rows(&b.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(row_set(&ra), row_set(&rb));
}

#[test]
fn replay_reproduces_rows() {
    let cfg = ExperimentConfig::parse_str(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_matrix(&cfg, &opts(dir.path(), false, None)).unwrap();
    let manifest = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    let rows = read_rows(&dir.path().join(RESULTS_FILE)).unwrap();
    for (i, entry) in manifest.cells.iter().enumerate() {
        let replayed = replay_cell(&manifest, i).unwrap();
        let original: Vec<ResultRow> = rows.iter().filter(|r| r.cell() == entry.cell).cloned().collect();
        assert_eq!(row_set(&replayed), row_set(&original));
    }
}

#[test]
fn failing_cells_set_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    // 700 + 200 rows exceed the 747-row surrogate IHDP table at run time.
    let text = "[dataset]\nname = \"ihdp\"\npool_size = 700\ntest_size = 200\n[loop]\nn_init = 10\nbudget = 20\n\
                [experiment]\nmethods = [\"random\"]\nseeds = [0]\n";
    let cfg_path = dir.path().join("bad.toml");
    fs::write(&cfg_path, text).unwrap();
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg_path).arg("--out").arg(&out).status().unwrap();
    assert!(!status.success());
    let rows = read_rows(&out.join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].status, "failed");
    assert_eq!(rows[0].step, None);
    let m = Manifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert!(m.cells[0].failure.as_deref().unwrap().contains("747"));

    let good = dir.path().join("good.toml");
    fs::write(&good, SMALL).unwrap();
    let status = bin().arg("run").arg(&good).arg("--out").arg(dir.path().join("ok")).status().unwrap();
    assert!(status.success());
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    fs::write(&cfg_path, SMALL).unwrap();
    let status = bin().arg("run").arg(&cfg_path).env("CAUSAL_EPIG_OUTPUT", dir.path().join("root")).status().unwrap();
    assert!(status.success());
    assert!(dir.path().join("root/exp").join(RESULTS_FILE).exists());
}

#[test]
fn empty_results_give_header_only_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join(RESULTS_FILE);
    fs::write(&results, "dataset,variant,estimator,method,seed,step,n_labeled,sqrt_pehe_pool,sqrt_pehe_test,acq_seconds,status\n")
        .unwrap();
    let (s, i) = emit_summary(&results, None).unwrap();
    assert_eq!(fs::read_to_string(s).unwrap().trim_end(), SUMMARY_COLUMNS.join(","));
    assert_eq!(fs::read_to_string(i).unwrap().trim_end(), IMPROVEMENT_COLUMNS.join(","));
}

#[test]
fn two_run_fixture_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join(RESULTS_FILE);
    let fixture = "\
dataset,variant,estimator,method,seed,step,n_labeled,sqrt_pehe_pool,sqrt_pehe_test,acq_seconds,status
d,standard,cmgp,random,0,0,10,2.0,4.0,0,ok
d,standard,cmgp,random,1,0,10,4.0,6.0,0,ok
d,standard,cmgp,m,0,0,10,1.0,3.0,0,ok
d,standard,cmgp,m,1,0,10,2.0,3.0,0,ok
d,standard,cmgp,m,2,,,,,,failed
";
    fs::write(&results, fixture).unwrap();
    let (s, i) = emit_summary(&results, Some(&dir.path().join("sum"))).unwrap();
    let summary = fs::read_to_string(s).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], SUMMARY_COLUMNS.join(","));
    // Method m pool: mean of {1, 2} = 1.5, sd = √0.5.
    let sd = 0.5f64.sqrt();
    assert!(lines.contains(&format!("d,standard,m,cmgp,0,10,sqrt_pehe_pool,1.5,{sd},2").as_str()), "{summary}");
    assert!(lines.contains(&"d,standard,random,cmgp,0,10,sqrt_pehe_test,5,1.4142135623730951,2"), "{summary}");
    let imp = fs::read_to_string(i).unwrap();
    // Pool: of means (3 − 1.5)/3 = 0.5; per seed mean of {0.5, 0.5} = 0.5.
    assert!(imp.lines().any(|l| l == "d,standard,m,cmgp,0,10,sqrt_pehe_pool,0.5,0.5,2"), "{imp}");
    // Test: of means (5 − 3)/5 = 0.4; per seed mean of {0.25, 0.5} = 0.375.
    assert!(imp.lines().any(|l| l == "d,standard,m,cmgp,0,10,sqrt_pehe_test,0.4,0.375,2"), "{imp}");
}

#[test]
fn malformed_results_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join(RESULTS_FILE);
    fs::write(
        &results,
        "dataset,variant,estimator,method,seed,step,n_labeled,sqrt_pehe_pool,sqrt_pehe_test,acq_seconds,status\n\
         d,standard,cmgp,random,0,0,10,2.0,4.0,0,ok\n\
         d,standard,cmgp,random,zero,0,10,2.0,4.0,0,ok\n",
    )
    .unwrap();
    let err = format!("{:#}", emit_summary(&results, None).unwrap_err());
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn gen_data_writes_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cb.csv");
    let status = bin().args(["gen-data", "causalbald"]).arg(&out).args(["--rows", "50", "--seed", "3"]).status().unwrap();
    assert!(status.success());
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["x0", "t", "y", "mu0", "mu1", "tau", "propensity"]);
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let v: Vec<f64> = rec.iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(v[5], v[4] - v[3]);
        n += 1;
    }
    assert_eq!(n, 50);
    let actg = dir.path().join("actg.csv");
    assert!(bin().args(["gen-data", "actg"]).arg(&actg).status().unwrap().success());
    assert_eq!(fs::read_to_string(&actg).unwrap().lines().count(), 814);
}
