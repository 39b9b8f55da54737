//! Closed-form mutual information between jointly Gaussian quantities.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{input, numerical, Result};
use crate::linalg::{cholesky_relative, symmetrize};
use crate::posterior::{JointGaussianBelief, Quantity, VARIANCE_FLOOR};

/// Smallest value allowed inside a log-determinant ratio.
pub const DET_FLOOR: f64 = 1e-300;

/// Relative tolerance on `|cov| ≤ √(var_a·var_b)` before the inputs are
/// declared inconsistent.
pub const CORRELATION_SLACK: f64 = 1e-6;

/// `−½ log(ratio)` with the ratio clamped into `[DET_FLOOR, 1]`.
fn half_neg_log(ratio: f64) -> f64 {
    -0.5 * ratio.clamp(DET_FLOOR, 1.0).ln()
}

/// `I(a; b)` for two scalar Gaussians: `½ log(v_a v_b / (v_a v_b − c²))`.
pub fn gaussian_mi_scalar(var_a: f64, var_b: f64, cov_ab: f64) -> Result<f64> {
    if !(var_a.is_finite() && var_b.is_finite() && cov_ab.is_finite()) {
        return input("non-finite moments passed to gaussian_mi_scalar");
    }
    if var_a <= VARIANCE_FLOOR || var_b <= VARIANCE_FLOOR || cov_ab == 0.0 {
        return Ok(0.0);
    }
    let bound = (var_a * var_b).sqrt();
    if cov_ab.abs() > bound * (1.0 + CORRELATION_SLACK) {
        return numerical(format!(
            "covariance {cov_ab:e} exceeds √(var_a·var_b) = {bound:e}; belief is not positive semidefinite"
        ));
    }
    let rho2 = (cov_ab / bound).powi(2);
    Ok(half_neg_log(1.0 - rho2))
}

/// A covariance block factored once and reused against many scalar partners.
///
/// Components with variance at or below the floor are deterministic, carry
/// no information and are dropped before factoring.
#[derive(Debug, Clone)]
pub struct FactoredBlock {
    keep: Vec<usize>,
    variances: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl FactoredBlock {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return input("covariance block must be square");
        }
        let keep: Vec<usize> = (0..cov.nrows()).filter(|&i| cov[(i, i)] > VARIANCE_FLOOR).collect();
        let variances = keep.iter().map(|&i| cov[(i, i)]).collect();
        let chol = if keep.len() > 1 {
            let mut sub = cov.select_rows(&keep).select_columns(&keep);
            symmetrize(&mut sub);
            Some(cholesky_relative(&sub)?.0)
        } else {
            None
        };
        Ok(Self { keep, variances, chol })
    }

    pub fn dim(&self) -> usize {
        self.keep.len()
    }

    /// `I(a; b)` where `a` is scalar with variance `var_a` and `cov_ab[i] = Cov[a, b_i]`.
    pub fn mi_with_scalar(&self, var_a: f64, cov_ab: &[f64]) -> Result<f64> {
        if var_a <= VARIANCE_FLOOR || self.keep.is_empty() {
            return Ok(0.0);
        }
        if self.keep.len() == 1 {
            return gaussian_mi_scalar(var_a, self.variances[0], cov_ab[self.keep[0]]);
        }
        let c = DVector::from_iterator(self.keep.len(), self.keep.iter().map(|&i| cov_ab[i]));
        if c.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let chol = self.chol.as_ref().expect("factor present for blocks of size > 1");
        let w = chol.l_dirty().solve_lower_triangular(&c).expect("Cholesky diagonal is positive");
        let ratio = 1.0 - w.norm_squared() / var_a;
        if ratio < -2.0 * CORRELATION_SLACK {
            return numerical("explained variance exceeds the outcome variance; belief is not positive semidefinite");
        }
        Ok(half_neg_log(ratio))
    }
}

fn lookup(belief: &JointGaussianBelief, block: &[Quantity]) -> Result<Vec<usize>> {
    if block.is_empty() {
        return input("mutual information blocks must be non-empty");
    }
    belief.indices_of(block)
}

/// `I(a; b) = ½ log(|Σ_aa||Σ_bb| / |Σ|)` between two disjoint label blocks.
///
/// The value is computed as `−½ log|I − Σ_aa^{-½} Σ_ab Σ_bb⁻¹ Σ_ba Σ_aa^{-½}|`
/// with the smaller block whitened. Blocks are put into a canonical order
/// first so the result is exactly symmetric in its arguments.
pub fn gaussian_mi_block(belief: &JointGaussianBelief, block_a: &[Quantity], block_b: &[Quantity]) -> Result<f64> {
    let ia = lookup(belief, block_a)?;
    let ib = lookup(belief, block_b)?;
    if ia.iter().any(|i| ib.contains(i)) || has_duplicates(&ia) || has_duplicates(&ib) {
        return input("mutual information blocks must be disjoint and free of repeats");
    }
    mi_between_indices(belief.cov(), &ia, &ib)
}

fn has_duplicates(idx: &[usize]) -> bool {
    idx.iter().enumerate().any(|(k, i)| idx[..k].contains(i))
}

/// MI between index sets of a covariance matrix; zero-variance entries are dropped.
pub(crate) fn mi_between_indices(cov: &DMatrix<f64>, ia: &[usize], ib: &[usize]) -> Result<f64> {
    let keep = |idx: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = idx.iter().copied().filter(|&i| cov[(i, i)] > VARIANCE_FLOOR).collect();
        v.sort_unstable();
        v
    };
    let (a, b) = (keep(ia), keep(ib));
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let (small, large) = match a.len().cmp(&b.len()).then_with(|| a.cmp(&b)) {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    if small.len() == 1 && large.len() == 1 {
        let (i, j) = (small[0], large[0]);
        return gaussian_mi_scalar(cov[(i, i)], cov[(j, j)], 0.5 * (cov[(i, j)] + cov[(j, i)]));
    }
    let sigma_ll = cov.select_rows(&large).select_columns(&large);
    let sigma_ls = cov.select_rows(&large).select_columns(&small);
    if small.len() == 1 {
        let factored = FactoredBlock::new(&sigma_ll)?;
        let cross: Vec<f64> = sigma_ls.iter().copied().collect();
        return factored.mi_with_scalar(cov[(small[0], small[0])], &cross);
    }
    let mut sigma_ss = cov.select_rows(&small).select_columns(&small);
    symmetrize(&mut sigma_ss);
    let (chol_l, _) = cholesky_relative(&{
        let mut m = sigma_ll;
        symmetrize(&mut m);
        m
    })?;
    let (chol_s, _) = cholesky_relative(&sigma_ss)?;
    // M = L_s⁻¹ Σ_sl Σ_ll⁻¹ Σ_ls L_s⁻ᵀ, whose eigenvalues are squared canonical correlations.
    let w = chol_l.l_dirty().solve_lower_triangular(&sigma_ls).expect("positive diagonal");
    let explained = w.transpose() * &w;
    let ls = chol_s.l();
    let left = ls.solve_lower_triangular(&explained).expect("positive diagonal");
    let mut m = ls.solve_lower_triangular(&left.transpose()).expect("positive diagonal");
    symmetrize(&mut m);
    let mut total = 0.0;
    for rho2 in m.symmetric_eigenvalues().iter() {
        let residual = 1.0 - rho2;
        if residual < -2.0 * CORRELATION_SLACK {
            return numerical("joint covariance is not positive semidefinite");
        }
        total += half_neg_log(residual);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Arm;

    fn belief(cov: DMatrix<f64>) -> JointGaussianBelief {
        let n = cov.nrows();
        let mut labels = vec![Quantity::Outcome];
        for j in 0..n - 1 {
            labels.push(Quantity::Effect { target: j });
        }
        JointGaussianBelief::new(labels, DVector::zeros(n), cov).unwrap()
    }

    fn tau(j: usize) -> Quantity {
        Quantity::Effect { target: j }
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(gaussian_mi_scalar(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!((gaussian_mi_scalar(1.0, 1.0, 0.6).unwrap() - 0.5 * (1.0f64 / 0.64).ln()).abs() < 1e-14);
        assert!((gaussian_mi_scalar(1.0, 1.0, 0.6).unwrap() - 0.22314).abs() < 1e-5);
        assert_eq!(gaussian_mi_scalar(0.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(gaussian_mi_scalar(1.0, 1.0, 1.1).is_err());
        // Perfect correlation hits the determinant floor instead of diverging.
        assert!(gaussian_mi_scalar(1.0, 1.0, 1.0).unwrap().is_finite());
    }

    #[test]
    fn block_reduces_to_scalar_and_is_symmetric() {
        let b = belief(DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.5, 1.0, 0.0, 0.3, 0.0, 1.0]));
        let ab = gaussian_mi_block(&b, &[Quantity::Outcome], &[tau(0)]).unwrap();
        assert_eq!(ab, gaussian_mi_scalar(1.0, 1.0, 0.5).unwrap());
        let y_both = gaussian_mi_block(&b, &[Quantity::Outcome], &[tau(0), tau(1)]).unwrap();
        let both_y = gaussian_mi_block(&b, &[tau(1), tau(0)], &[Quantity::Outcome]).unwrap();
        assert_eq!(y_both, both_y);
        // Determinant-ratio oracle: |Σ_bb| = 1, |Σ| = 1 − 0.25 − 0.09.
        assert!((y_both - 0.5 * (1.0f64 / 0.66).ln()).abs() < 1e-9);
    }

    #[test]
    fn block_diagonal_gives_zero_and_overlap_is_rejected() {
        let b = belief(DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.4, 0.0, 0.4, 1.0]));
        assert_eq!(gaussian_mi_block(&b, &[Quantity::Outcome], &[tau(0), tau(1)]).unwrap(), 0.0);
        assert!(gaussian_mi_block(&b, &[tau(0)], &[tau(0), tau(1)]).is_err());
        assert!(gaussian_mi_block(&b, &[], &[tau(1)]).is_err());
        let missing = Quantity::PotentialOutcome { target: 0, arm: Arm::Control };
        assert!(gaussian_mi_block(&b, &[missing], &[tau(1)]).is_err());
    }

    #[test]
    fn two_by_two_blocks_match_determinant_ratio() {
        #[rustfmt::skip]
        let cov = DMatrix::from_row_slice(4, 4, &[
            2.0, 0.3, 0.5, 0.1,
            0.3, 1.0, 0.2, 0.4,
            0.5, 0.2, 1.5, 0.3,
            0.1, 0.4, 0.3, 1.2,
        ]);
        let b = belief(cov.clone());
        let mi = gaussian_mi_block(&b, &[Quantity::Outcome, tau(0)], &[tau(1), tau(2)]).unwrap();
        let det = |m: DMatrix<f64>| m.determinant();
        let oracle = 0.5
            * (det(cov.view((0, 0), (2, 2)).into_owned()) * det(cov.view((2, 2), (2, 2)).into_owned()) / det(cov.clone())).ln();
        assert!((mi - oracle).abs() < 1e-9);
        let swapped = gaussian_mi_block(&b, &[tau(2), tau(1)], &[tau(0), Quantity::Outcome]).unwrap();
        assert_eq!(mi, swapped);
    }

    #[test]
    fn duplicated_component_does_not_change_information() {
        #[rustfmt::skip]
        let dup = DMatrix::from_row_slice(3, 3, &[
            1.0, 0.4, 0.4,
            0.4, 1.0, 1.0,
            0.4, 1.0, 1.0,
        ]);
        let mi = gaussian_mi_block(&belief(dup), &[Quantity::Outcome], &[tau(0), tau(1)]).unwrap();
        assert!((mi - gaussian_mi_scalar(1.0, 1.0, 0.4).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn factored_block_matches_direct_evaluation() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let f = FactoredBlock::new(&sigma).unwrap();
        let mi = f.mi_with_scalar(1.0, &[0.4, 0.2]).unwrap();
        let c = DVector::from_vec(vec![0.4, 0.2]);
        let q = (c.transpose() * sigma.try_inverse().unwrap() * &c)[(0, 0)];
        assert!((mi + 0.5 * (1.0 - q).ln()).abs() < 1e-9);
        assert_eq!(f.mi_with_scalar(0.0, &[0.4, 0.2]).unwrap(), 0.0);
    }
}
