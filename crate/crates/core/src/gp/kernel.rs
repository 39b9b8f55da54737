//! Stationary base kernels and the two treatment-aware joint kernels.

use nalgebra::DMatrix;

use crate::data::{Arm, Point};
use crate::error::{input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Rbf,
    Matern52,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Matern52 => "matern52",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(KernelFamily::Rbf),
            "matern52" => Ok(KernelFamily::Matern52),
            other => input(format!("unknown kernel family `{other}` (expected rbf or matern52)")),
        }
    }
}

pub const DEFAULT_JITTER: f64 = 1e-8;

/// Hyperparameters of one stationary ARD kernel plus the observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub jitter: f64,
}

impl KernelConfig {
    pub fn new(
        family: KernelFamily,
        lengthscales: Vec<f64>,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        let cfg = Self { family, lengthscales, signal_variance, noise_variance, jitter: DEFAULT_JITTER };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_jitter(mut self, jitter: f64) -> Result<Self> {
        self.jitter = jitter;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return input("kernel needs at least one lengthscale");
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return input(format!("lengthscales must be positive, got {l}"));
        }
        for (name, v) in [("signal_variance", self.signal_variance), ("noise_variance", self.noise_variance)] {
            if !(v.is_finite() && v > 0.0) {
                return input(format!("{name} must be positive, got {v}"));
            }
        }
        if !(1e-10..=1e-3).contains(&self.jitter) {
            return input(format!("jitter must lie in [1e-10, 1e-3], got {}", self.jitter));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Scaled distance `sqrt(Σ ((a_d − b_d)/ℓ_d)²)`.
    fn scaled_distance_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| {
                let z = (x - y) / l;
                z * z
            })
            .sum()
    }

    /// Kernel value without the dimension check; callers guarantee shapes.
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2 = self.scaled_distance_sq(a, b);
        match self.family {
            KernelFamily::Rbf => self.signal_variance * (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                let s5r = (5.0 * r2).sqrt();
                self.signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * (-s5r).exp()
            }
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dims(a, b, self.dim())?;
        Ok(self.eval_unchecked(a, b))
    }
}

fn check_dims(a: &[f64], b: &[f64], dim: usize) -> Result<()> {
    if a.len() != dim || b.len() != dim {
        return input(format!(
            "kernel inputs have dimensions {} and {}, kernel expects {dim}",
            a.len(),
            b.len()
        ));
    }
    Ok(())
}

/// Squared-exponential kernel `σ² exp(−½ Σ ((x1_d − x2_d)/ℓ_d)²)`, ignoring `cfg.family`.
pub fn rbf_kernel(x1: &[f64], x2: &[f64], cfg: &KernelConfig) -> Result<f64> {
    let cfg = KernelConfig { family: KernelFamily::Rbf, ..cfg.clone() };
    cfg.eval(x1, x2)
}

/// Matérn-5/2 kernel `σ² (1 + √5 r + 5r²/3) exp(−√5 r)`, ignoring `cfg.family`.
pub fn matern52_kernel(x1: &[f64], x2: &[f64], cfg: &KernelConfig) -> Result<f64> {
    let cfg = KernelConfig { family: KernelFamily::Matern52, ..cfg.clone() };
    cfg.eval(x1, x2)
}

/// 2×2 task covariance `B` of the linear model of coregionalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoregionalizationConfig {
    pub task_covariance: [[f64; 2]; 2],
}

impl CoregionalizationConfig {
    pub fn new(task_covariance: [[f64; 2]; 2]) -> Result<Self> {
        let b = task_covariance;
        if b.iter().flatten().any(|v| !v.is_finite()) {
            return input("task covariance has non-finite entries");
        }
        if (b[0][1] - b[1][0]).abs() > 1e-12 * (1.0 + b[0][1].abs()) {
            return input("task covariance must be symmetric");
        }
        let tol = 1e-12 * (1.0 + b[0][0].abs() + b[1][1].abs());
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        if b[0][0] < -tol || b[1][1] < -tol || det < -tol * (1.0 + b[0][0].abs().max(b[1][1].abs())) {
            return input("task covariance must be positive semidefinite");
        }
        Ok(Self { task_covariance: b })
    }

    pub fn identity() -> Self {
        Self { task_covariance: [[1.0, 0.0], [0.0, 1.0]] }
    }

    /// Builds `B = L Lᵀ` from the lower-triangular factor `[[l00, 0], [l10, l11]]`.
    pub fn from_cholesky(l00: f64, l10: f64, l11: f64) -> Self {
        let b01 = l00 * l10;
        Self { task_covariance: [[l00 * l00, b01], [b01, l10 * l10 + l11 * l11]] }
    }

    /// Inverse of [`Self::from_cholesky`], with the diagonal entries of the factor made positive.
    pub fn cholesky_entries(&self) -> (f64, f64, f64) {
        let b = self.task_covariance;
        let l00 = b[0][0].max(1e-300).sqrt();
        let l10 = b[0][1] / l00;
        let l11 = (b[1][1] - l10 * l10).max(1e-300).sqrt();
        (l00, l10, l11)
    }

    pub fn get(&self, a: Arm, b: Arm) -> f64 {
        self.task_covariance[a.index()][b.index()]
    }
}

/// CMGP kernel `B[t1, t2] · k(x1, x2)`.
pub fn cmgp_joint_kernel(
    p1: Point<'_>,
    p2: Point<'_>,
    base: &KernelConfig,
    coreg: &CoregionalizationConfig,
) -> Result<f64> {
    Ok(coreg.get(p1.arm, p2.arm) * base.eval(p1.x, p2.x)?)
}

/// Case-dispatch non-stationary kernel: `k₀` on control pairs, `k₁` on
/// treated pairs, `k₀ + k₁` across arms.
///
/// The cross-arm sum exceeds the geometric mean of the two diagonal blocks,
/// so this kernel is indefinite whenever both arms are observed at nearby
/// covariates. [`GpKernel::Nsgp`] therefore drops the cross-arm term.
pub fn nsgp_joint_kernel(
    p1: Point<'_>,
    p2: Point<'_>,
    control: &KernelConfig,
    treated: &KernelConfig,
) -> Result<f64> {
    match (p1.arm, p2.arm) {
        (Arm::Control, Arm::Control) => control.eval(p1.x, p2.x),
        (Arm::Treated, Arm::Treated) => treated.eval(p1.x, p2.x),
        _ => Ok(control.eval(p1.x, p2.x)? + treated.eval(p1.x, p2.x)?),
    }
}

/// Which treatment-aware GP formulation a posterior uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpModelKind {
    Cmgp,
    Nsgp,
}

impl GpModelKind {
    pub fn name(self) -> &'static str {
        match self {
            GpModelKind::Cmgp => "cmgp",
            GpModelKind::Nsgp => "nsgp",
        }
    }
}

/// A complete treatment-aware covariance function over `X × {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum GpKernel {
    /// Coregionalized kernel; the base kernel's signal variance is folded into `B`.
    Cmgp { base: KernelConfig, coreg: CoregionalizationConfig },
    /// Arm-specific kernels; noise and jitter are read from `control`.
    Nsgp { control: KernelConfig, treated: KernelConfig },
}

impl GpKernel {
    pub fn kind(&self) -> GpModelKind {
        match self {
            GpKernel::Cmgp { .. } => GpModelKind::Cmgp,
            GpKernel::Nsgp { .. } => GpModelKind::Nsgp,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GpKernel::Cmgp { base, .. } => base.dim(),
            GpKernel::Nsgp { control, .. } => control.dim(),
        }
    }

    pub fn noise_variance(&self) -> f64 {
        match self {
            GpKernel::Cmgp { base, .. } => base.noise_variance,
            GpKernel::Nsgp { control, .. } => control.noise_variance,
        }
    }

    pub fn jitter(&self) -> f64 {
        match self {
            GpKernel::Cmgp { base, .. } => base.jitter,
            GpKernel::Nsgp { control, .. } => control.jitter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GpKernel::Cmgp { base, .. } => base.validate(),
            GpKernel::Nsgp { control, treated } => {
                control.validate()?;
                treated.validate()?;
                if control.dim() != treated.dim() {
                    return input("NSGP arm kernels have different input dimensions");
                }
                Ok(())
            }
        }
    }

    pub(crate) fn eval_unchecked(&self, p1: Point<'_>, p2: Point<'_>) -> f64 {
        match self {
            GpKernel::Cmgp { base, coreg } => {
                let b = coreg.get(p1.arm, p2.arm);
                if b == 0.0 {
                    0.0
                } else {
                    b * base.eval_unchecked(p1.x, p2.x)
                }
            }
            GpKernel::Nsgp { control, treated } => match (p1.arm, p2.arm) {
                (Arm::Control, Arm::Control) => control.eval_unchecked(p1.x, p2.x),
                (Arm::Treated, Arm::Treated) => treated.eval_unchecked(p1.x, p2.x),
                _ => 0.0,
            },
        }
    }

    pub fn eval(&self, p1: Point<'_>, p2: Point<'_>) -> Result<f64> {
        check_dims(p1.x, p2.x, self.dim())?;
        Ok(self.eval_unchecked(p1, p2))
    }

    /// Cross-covariance matrix `K(a, b)`.
    pub fn cross(&self, a: &[Point<'_>], b: &[Point<'_>]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval_unchecked(a[i], b[j]))
    }

    /// Symmetric Gram matrix `K(a, a)`.
    pub fn gram(&self, a: &[Point<'_>]) -> DMatrix<f64> {
        let n = a.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval_unchecked(a[i], a[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Prior variance `k(p, p)`.
    pub fn prior_variance(&self, p: Point<'_>) -> f64 {
        self.eval_unchecked(p, p)
    }
}
