//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{numerical, Result};

/// Largest jitter added to a diagonal before giving up on a factorization.
pub const MAX_JITTER: f64 = 1e-3;

/// Cholesky factorization of `a + jitter·I`, escalating the jitter by ×10
/// from `start` up to [`MAX_JITTER`]. Returns the factor and the jitter used.
pub fn cholesky_with_jitter(a: &DMatrix<f64>, start: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = start;
    loop {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            if chol.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok((chol, jitter));
            }
        }
        if jitter >= MAX_JITTER {
            return numerical(format!(
                "Cholesky factorization failed for a {}×{} matrix even with jitter {jitter:e}",
                a.nrows(),
                a.ncols()
            ));
        }
        jitter = (jitter * 10.0).min(MAX_JITTER);
    }
}

/// Cholesky with a jitter expressed relative to the mean diagonal of `a`.
///
/// The scale-free variant is used for small belief covariances whose units
/// are arbitrary; escalation runs from `1e-10` to `1e-3` of the mean diagonal.
pub fn cholesky_relative(a: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = a.nrows().max(1);
    let scale = (a.diagonal().iter().sum::<f64>() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = 1e-10;
    loop {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += rel * scale;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, rel * scale));
        }
        if rel >= MAX_JITTER {
            return numerical(format!(
                "covariance block of size {} is not positive definite",
                a.nrows()
            ));
        }
        rel *= 10.0;
    }
}

pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Unbiased sample covariance (divisor `n − 1`) of the rows of `draws`.
pub fn sample_covariance(draws: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = draws.nrows();
    let means: Vec<f64> = draws.column_iter().map(|c| c.sum() / n as f64).collect();
    let mut centered = draws.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let mut cov = centered.transpose() * &centered;
    cov /= (n as f64 - 1.0).max(1.0);
    symmetrize(&mut cov);
    (means, cov)
}

/// Replaces `m` by `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
