//! Dumps one generated dataset with its ground truth for inspection.

use std::path::Path;

use anyhow::{bail, Result};
use causal_epig::data::Arm;
use causal_epig::dgp::{
    gen_actg_outcomes, gen_causalbald, gen_hahn, gen_ihdp_outcomes, load_covariates_csv, surrogate_covariates,
    Dataset, DatasetKind,
};
use causal_epig::rng::stream;

pub const DEFAULT_ROWS: usize = 1000;

/// Generates `dataset`. `rows` applies to synthetic kinds; semi-synthetic kinds
/// use the covariate file, or a surrogate table of the cohort's size.
pub fn generate(dataset: &str, shift: bool, rows: Option<usize>, seed: u64, covariates: Option<&Path>) -> Result<Dataset> {
    let kind = DatasetKind::parse(dataset)?;
    if shift && !kind.supports_shift() {
        bail!("{kind} has no shift variant");
    }
    let mut rng = stream(seed, &["gen-data", kind.name()]);
    let n = rows.unwrap_or(DEFAULT_ROWS);
    let data = match kind {
        DatasetKind::CausalBald => gen_causalbald(n, shift, &mut rng)?,
        DatasetKind::Hahn(p) => gen_hahn(n, p, shift, &mut rng)?,
        DatasetKind::Ihdp | DatasetKind::Actg => {
            let schema = kind.schema().expect("semi-synthetic kinds have a schema");
            let (xs, arms) = match covariates {
                Some(path) => load_covariates_csv(path, schema)?,
                None => surrogate_covariates(schema, rows.unwrap_or(schema.cohort_size()), &mut rng),
            };
            if kind == DatasetKind::Ihdp {
                gen_ihdp_outcomes(&xs, &arms, shift, &mut rng)?
            } else {
                gen_actg_outcomes(&xs, &arms, &mut rng)?
            }
        }
    };
    Ok(data)
}

pub fn column_names(dataset: &str, dim: usize) -> Result<Vec<String>> {
    let kind = DatasetKind::parse(dataset)?;
    Ok(match kind.schema() {
        Some(s) => s.columns().iter().map(|c| c.to_string()).collect(),
        None => (0..dim).map(|j| format!("x{j}")).collect(),
    })
}

/// Writes covariates, `t`, `y`, `mu0`, `mu1`, `tau` and, when known, `propensity`.
pub fn write_dataset(dataset: &str, data: &Dataset, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    let mut header = column_names(dataset, data.dim())?;
    header.extend(["t", "y", "mu0", "mu1", "tau"].map(String::from));
    if data.propensity_true.is_some() {
        header.push("propensity".into());
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.covariates.row(i).iter().map(f64::to_string).collect();
        rec.push(if data.arms[i] == Arm::Treated { "1" } else { "0" }.into());
        for v in [data.outcomes[i], data.mu0[i], data.mu1[i], data.tau_true[i]] {
            rec.push(v.to_string());
        }
        if let Some(p) = &data.propensity_true {
            rec.push(p[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
