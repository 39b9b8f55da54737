//! Sampling estimate of Gaussian mutual information, used to cross-check the
//! closed forms.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{input, Result};
use crate::linalg::{cholesky_relative, log_det};
use crate::posterior::{JointGaussianBelief, Quantity};
use crate::rng::{derive_seed, indexed};

const CHUNK: usize = 1 << 16;

/// Estimates `I(a; b) = H(a) + H(b) − H(a, b)` from `n_samples` draws of the
/// belief, using log-determinants of the sample covariances.
///
/// Draws are generated in fixed-size chunks with per-chunk RNG streams and
/// accumulated in chunk order, so the estimate does not depend on the number
/// of worker threads.
pub fn mc_mi_oracle<R: Rng + ?Sized>(
    belief: &JointGaussianBelief,
    block_a: &[Quantity],
    block_b: &[Quantity],
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_samples < 2 {
        return input("the Monte Carlo oracle needs at least 2 samples");
    }
    let ia = belief.indices_of(block_a)?;
    let ib = belief.indices_of(block_b)?;
    if ia.is_empty() || ib.is_empty() || ia.iter().any(|i| ib.contains(i)) {
        return input("oracle blocks must be non-empty and disjoint");
    }
    let idx: Vec<usize> = ia.iter().chain(&ib).copied().collect();
    let k = idx.len();
    let cov = belief.cov().select_rows(&idx).select_columns(&idx);
    let (chol, _) = cholesky_relative(&cov)?;
    let l = chol.l();
    let base = derive_seed(rng.random(), &["mc-mi-oracle"]);
    let n_chunks = n_samples.div_ceil(CHUNK);

    // Each chunk returns the sum and the sum of outer products of its draws.
    let lower: Vec<f64> = (0..k * k).map(|i| l[(i / k, i % k)]).collect();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = indexed(base, c);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut sum = vec![0.0; k];
            let mut outer = vec![0.0; k * k];
            let mut z = vec![0.0; k];
            let mut x = vec![0.0; k];
            for _ in 0..count {
                for v in z.iter_mut() {
                    *v = r.sample(StandardNormal);
                }
                for i in 0..k {
                    x[i] = (0..=i).map(|j| lower[i * k + j] * z[j]).sum();
                    sum[i] += x[i];
                }
                for i in 0..k {
                    for j in 0..=i {
                        outer[i * k + j] += x[i] * x[j];
                    }
                }
            }
            (sum, outer)
        })
        .collect();
    let mut sum = DVector::zeros(k);
    let mut outer = DMatrix::zeros(k, k);
    for (s, o) in &partials {
        for i in 0..k {
            sum[i] += s[i];
            for j in 0..=i {
                outer[(i, j)] += o[i * k + j];
                if i != j {
                    outer[(j, i)] += o[i * k + j];
                }
            }
        }
    }
    let n = n_samples as f64;
    let mean = &sum / n;
    let sample_cov = (outer - n * &mean * mean.transpose()) / (n - 1.0);

    let na = ia.len();
    let logdet = |m: DMatrix<f64>| -> Result<f64> { Ok(log_det(&cholesky_relative(&m)?.0)) };
    let h_a = logdet(sample_cov.view((0, 0), (na, na)).into_owned())?;
    let h_b = logdet(sample_cov.view((na, na), (k - na, k - na)).into_owned())?;
    let h_ab = logdet(sample_cov)?;
    Ok(0.5 * (h_a + h_b - h_ab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::mi::gaussian_mi_scalar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(cov: f64) -> JointGaussianBelief {
        JointGaussianBelief::new(
            vec![Quantity::Outcome, Quantity::Effect { target: 0 }],
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, cov, cov, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn oracle_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y = [Quantity::Outcome];
        let t = [Quantity::Effect { target: 0 }];
        let zero = mc_mi_oracle(&pair(0.0), &y, &t, 10_000_000, &mut rng).unwrap();
        assert!(zero.abs() < 0.005, "{zero}");
        let est = mc_mi_oracle(&pair(0.6), &y, &t, 10_000_000, &mut rng).unwrap();
        assert!((est - gaussian_mi_scalar(1.0, 1.0, 0.6).unwrap()).abs() < 0.01, "{est}");
    }

    #[test]
    fn error_shrinks_with_sample_size() {
        let y = [Quantity::Outcome];
        let t = [Quantity::Effect { target: 0 }];
        let truth = gaussian_mi_scalar(1.0, 1.0, 0.6).unwrap();
        let mut errs = Vec::new();
        for n in [1_000, 100_000, 10_000_000] {
            let mut total = 0.0;
            for seed in 0..5 {
                let est = mc_mi_oracle(&pair(0.6), &y, &t, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                total += (est - truth).abs();
            }
            errs.push(total / 5.0);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn oracle_is_deterministic_per_seed() {
        let y = [Quantity::Outcome];
        let t = [Quantity::Effect { target: 0 }];
        let a = mc_mi_oracle(&pair(0.3), &y, &t, 200_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = mc_mi_oracle(&pair(0.3), &y, &t, 200_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
