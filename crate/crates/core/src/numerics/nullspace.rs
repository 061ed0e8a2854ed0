use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Orthonormal basis (as columns) of the numerical right null space of `h`:
/// right singular vectors whose singular value is at most
/// `rank_tol * sigma_max`.
///
/// Wide matrices are padded with zero rows so the SVD returns the full
/// `n x n` right factor.
pub fn null_basis(h: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    if !(rank_tol > 0.0) {
        return Err(invalid("rank_tol", "must be positive"));
    }
    let (m, n) = h.shape();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let a = if m < n { h.clone().resize_vertically(n, 0.0) } else { h.clone() };
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&j| sv[j] <= rank_tol * smax)
        .map(|j| v_t.row(j).transpose())
        .collect();
    if cols.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Minimum-norm least-squares solution `H^+ y`.
pub fn pseudo_solve(h: &DMatrix<f64>, y: &DVector<f64>, rank_tol: f64) -> Result<DVector<f64>> {
    let svd = h.clone().svd(true, true);
    let eps = rank_tol * svd.singular_values.max();
    svd.solve(y, eps)
        .map_err(|e| crate::error::Error::LinearProgram(format!("pseudo-inverse failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_channel, FadingDistribution};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(h: &DMatrix<f64>, z: &DMatrix<f64>) {
        let k = z.ncols();
        let gram = z.transpose() * z;
        assert!((gram - DMatrix::identity(k, k)).amax() < 1e-10);
        if h.norm() > 0.0 && k > 0 {
            assert!((h * z).norm() / h.norm() <= 10.0 * DEFAULT_RANK_TOL);
        }
    }

    #[test]
    fn row_of_ones() {
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let z = null_basis(&h, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(z.shape(), (2, 1));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z[0].abs() - s).abs() < 1e-14);
        assert!((z[0] + z[1]).abs() < 1e-14);
        check(&h, &z);
    }

    #[test]
    fn full_column_rank_is_trivial() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(null_basis(&h, DEFAULT_RANK_TOL).unwrap().ncols(), 0);
    }

    #[test]
    fn zero_matrix_is_everything() {
        let h = DMatrix::zeros(2, 3);
        let z = null_basis(&h, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(z.shape(), (3, 3));
        check(&h, &z);
    }

    #[test]
    fn random_wide_and_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let m = rng.random_range(1..7);
            let n = rng.random_range(m..10);
            let h = sample_channel(m, n, FadingDistribution::Gaussian, &mut rng);
            let z = null_basis(&h, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(z.ncols(), n - m);
            check(&h, &z);
        }
        // Rank 2 matrix with 4 rows and 5 columns.
        let a = sample_channel(4, 2, FadingDistribution::Gaussian, &mut rng);
        let b = sample_channel(2, 5, FadingDistribution::Gaussian, &mut rng);
        let h = a * b;
        let z = null_basis(&h, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(z.ncols(), 3);
        check(&h, &z);
    }

    #[test]
    fn pseudo_solve_is_min_norm() {
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = pseudo_solve(&h, &DVector::from_vec(vec![2.0]), DEFAULT_RANK_TOL).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-14);
    }
}
