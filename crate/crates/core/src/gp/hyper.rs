//! Derivative-free hyperparameter search on the log marginal likelihood.
//!
//! Parameters are searched in log space (the CMGP coregionalization matrix
//! through its Cholesky entries, so every candidate is PSD) by a multi-start
//! coordinate pattern search.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::kernel::{CoregionalizationConfig, GpKernel, GpModelKind, KernelConfig, KernelFamily, DEFAULT_JITTER};
use super::posterior::fit_gp;
use crate::data::LabeledSet;
use crate::error::{input, numerical, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub family: KernelFamily,
    pub restarts: usize,
    pub evals_per_restart: usize,
    /// Starting point of the first restart; a data-driven heuristic otherwise.
    pub initial: Option<GpKernel>,
}

impl SearchConfig {
    pub fn new(family: KernelFamily) -> Self {
        Self { family, restarts: 3, evals_per_restart: 50, initial: None }
    }
}

/// Box constraints of the log-parameter vector, scaled by the outcome variance.
struct Layout {
    kind: GpModelKind,
    family: KernelFamily,
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

const LOG_LENGTH_RANGE: (f64, f64) = (-4.605170185988091, 6.907755278982137); // [1e-2, 1e3]

impl Layout {
    fn new(kind: GpModelKind, family: KernelFamily, dim: usize, outcome_var: f64) -> Self {
        let lv = outcome_var.ln();
        let var_range = (lv + (1e-4f64).ln(), lv + (1e2f64).ln());
        let noise_range = (lv + (1e-6f64).ln(), lv + (10f64).ln());
        let sd_range = (0.5 * var_range.0, 0.5 * var_range.1);
        let b_bound = 10.0 * outcome_var.sqrt();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut push = |r: (f64, f64)| {
            lower.push(r.0);
            upper.push(r.1);
        };
        match kind {
            GpModelKind::Cmgp => {
                (0..dim).for_each(|_| push(LOG_LENGTH_RANGE));
                push(sd_range);
                push((-b_bound, b_bound));
                push((sd_range.0 - 4.0, sd_range.1));
                push(noise_range);
            }
            GpModelKind::Nsgp => {
                for _ in 0..2 {
                    (0..dim).for_each(|_| push(LOG_LENGTH_RANGE));
                    push(var_range);
                }
                push(noise_range);
            }
        }
        Self { kind, family, dim, lower, upper }
    }

    fn len(&self) -> usize {
        self.lower.len()
    }

    fn clamp(&self, theta: &mut [f64]) {
        for (i, v) in theta.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Indices holding unconstrained (non-log) values.
    fn is_linear(&self, i: usize) -> bool {
        self.kind == GpModelKind::Cmgp && i == self.dim + 1
    }

    fn decode(&self, theta: &[f64]) -> Result<GpKernel> {
        let d = self.dim;
        match self.kind {
            GpModelKind::Cmgp => {
                let ls = theta[..d].iter().map(|v| v.exp()).collect();
                let noise = theta[d + 3].exp();
                let base = KernelConfig::new(self.family, ls, 1.0, noise)?;
                let coreg = CoregionalizationConfig::from_cholesky(theta[d].exp(), theta[d + 1], theta[d + 2].exp());
                Ok(GpKernel::Cmgp { base, coreg })
            }
            GpModelKind::Nsgp => {
                let noise = theta[2 * d + 2].exp();
                let arm = |off: usize| {
                    let ls = theta[off..off + d].iter().map(|v| v.exp()).collect();
                    KernelConfig::new(self.family, ls, theta[off + d].exp(), noise)
                };
                Ok(GpKernel::Nsgp { control: arm(0)?, treated: arm(d + 1)? })
            }
        }
    }

    fn encode(&self, kernel: &GpKernel) -> Result<Vec<f64>> {
        let mut theta = Vec::with_capacity(self.len());
        match (self.kind, kernel) {
            (GpModelKind::Cmgp, GpKernel::Cmgp { base, coreg }) => {
                theta.extend(base.lengthscales.iter().map(|l| l.ln()));
                // Fold the base signal variance into B.
                let s = base.signal_variance;
                let (l00, l10, l11) = coreg.cholesky_entries();
                theta.push((l00 * s.sqrt()).ln());
                theta.push(l10 * s.sqrt());
                theta.push((l11 * s.sqrt()).ln());
                theta.push(base.noise_variance.ln());
            }
            (GpModelKind::Nsgp, GpKernel::Nsgp { control, treated }) => {
                for k in [control, treated] {
                    theta.extend(k.lengthscales.iter().map(|l| l.ln()));
                    theta.push(k.signal_variance.ln());
                }
                theta.push(control.noise_variance.ln());
            }
            _ => return input("initial kernel does not match the requested model kind"),
        }
        if theta.len() != self.len() {
            return input("initial kernel dimension does not match the data");
        }
        self.clamp(&mut theta);
        Ok(theta)
    }
}

fn outcome_variance(data: &LabeledSet) -> f64 {
    let n = data.len() as f64;
    let mean = data.outcomes.iter().sum::<f64>() / n;
    let var = data.outcomes.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    if var.is_finite() && var > 1e-8 {
        var
    } else {
        1.0
    }
}

/// Data-driven starting kernel: lengthscales `sd_j·√d`, prior variance equal to
/// the outcome variance, noise a tenth of it, arms correlated at 0.5 (CMGP).
pub fn heuristic_kernel(data: &LabeledSet, kind: GpModelKind, family: KernelFamily) -> Result<GpKernel> {
    let d = data.dim();
    let vy = outcome_variance(data);
    let n = data.len() as f64;
    let lengthscales: Vec<f64> = (0..d)
        .map(|j| {
            let col = data.covariates.column(j);
            let m = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            let sd = if sd > 1e-8 { sd } else { 1.0 };
            (sd * (d as f64).sqrt()).clamp(0.05, 500.0)
        })
        .collect();
    let noise = 0.1 * vy;
    match kind {
        GpModelKind::Cmgp => {
            let base = KernelConfig::new(family, lengthscales, 1.0, noise)?;
            let s = vy.sqrt();
            let coreg = CoregionalizationConfig::from_cholesky(s, 0.5 * s, 0.75f64.sqrt() * s);
            Ok(GpKernel::Cmgp { base, coreg })
        }
        GpModelKind::Nsgp => Ok(GpKernel::Nsgp {
            control: KernelConfig::new(family, lengthscales.clone(), vy, noise)?,
            treated: KernelConfig::new(family, lengthscales, vy, noise)?,
        }),
    }
}

/// Returns the kernel with the highest log marginal likelihood found by a
/// multi-start coordinate search (default 3 restarts × 50 evaluations).
///
/// The first restart begins at `search.initial` (or the heuristic kernel) and
/// that starting point is itself a candidate, so the result never scores below it.
pub fn optimize_hyperparams<R: Rng + ?Sized>(
    data: &LabeledSet,
    kind: GpModelKind,
    search: &SearchConfig,
    rng: &mut R,
) -> Result<GpKernel> {
    if data.len() < 5 {
        return input(format!("hyperparameter search needs at least 5 labeled points, got {}", data.len()));
    }
    if search.restarts == 0 || search.evals_per_restart == 0 {
        return input("search needs at least one restart and one evaluation");
    }
    let layout = Layout::new(kind, search.family, data.dim(), outcome_variance(data));
    let initial = match &search.initial {
        Some(k) => k.clone(),
        None => heuristic_kernel(data, kind, search.family)?,
    };
    let start = layout.encode(&initial)?;

    let objective = |theta: &[f64]| -> f64 {
        layout
            .decode(theta)
            .and_then(|k| fit_gp(data, &k))
            .map(|post| post.log_marginal_likelihood())
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for restart in 0..search.restarts {
        let mut theta = start.clone();
        if restart > 0 {
            for (i, v) in theta.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                let scale = if layout.is_linear(i) { layout.upper[i] * 0.1 } else { 1.0 };
                *v += z * scale;
            }
            layout.clamp(&mut theta);
        }
        let (f, theta) = coordinate_search(&layout, theta, search.evals_per_restart, &objective);
        if f.is_finite() && best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, theta));
        }
    }
    match best {
        Some((_, theta)) => {
            let mut kernel = layout.decode(&theta)?;
            set_jitter(&mut kernel, DEFAULT_JITTER);
            Ok(kernel)
        }
        None => numerical("every hyperparameter candidate failed to factorize"),
    }
}

fn set_jitter(kernel: &mut GpKernel, jitter: f64) {
    match kernel {
        GpKernel::Cmgp { base, .. } => base.jitter = jitter,
        GpKernel::Nsgp { control, treated } => {
            control.jitter = jitter;
            treated.jitter = jitter;
        }
    }
}

/// Compass search: try ±step along each coordinate, expand on success,
/// halve the step of coordinates that fail in both directions.
fn coordinate_search(
    layout: &Layout,
    mut theta: Vec<f64>,
    budget: usize,
    objective: &dyn Fn(&[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let p = theta.len();
    let mut value = objective(&theta);
    let mut evals = 1;
    let mut step: Vec<f64> = (0..p)
        .map(|i| if layout.is_linear(i) { 0.25 * layout.upper[i] } else { 1.0 })
        .collect();
    while evals < budget {
        let mut progressed = false;
        for i in 0..p {
            if evals >= budget {
                break;
            }
            let mut improved = false;
            for dir in [1.0, -1.0] {
                if evals >= budget {
                    break;
                }
                let mut cand = theta.clone();
                cand[i] += dir * step[i];
                layout.clamp(&mut cand);
                if cand[i] == theta[i] {
                    continue;
                }
                let f = objective(&cand);
                evals += 1;
                if f > value {
                    theta = cand;
                    value = f;
                    step[i] = (step[i] * 2.0).min(layout.upper[i] - layout.lower[i]);
                    improved = true;
                    break;
                }
            }
            if improved {
                progressed = true;
            } else {
                step[i] *= 0.5;
            }
        }
        if !progressed && step.iter().all(|s| *s < 1e-6) {
            break;
        }
    }
    (value, theta)
}
