//! Small shared linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{EuncError, Result};

/// Eigendecomposition-based factor `L` of a symmetric PSD matrix with
/// `L * L^T = m`. Eigenvalues in `[-clamp_tol, 0)` are clamped to zero;
/// anything below `-clamp_tol` is an error carrying the offending eigenvalue.
pub fn psd_factor(m: &DMatrix<f64>, clamp_tol: f64) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -clamp_tol {
            return Err(EuncError::InvalidSpec {
                reason: format!("covariance block has negative eigenvalue {v:.6e}"),
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sqrt = DMatrix::from_diagonal(&vals.map(f64::sqrt));
    Ok(&eig.eigenvectors * sqrt)
}

/// Numerical rank from singular values with the usual relative threshold
/// `max(nrows, ncols) * eps * sigma_max`, overridable via `tol`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: Option<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    let threshold =
        tol.unwrap_or_else(|| m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax);
    svd.singular_values.iter().filter(|&&s| s > threshold).count()
}

/// Ratio of extreme eigenvalues of a symmetric PSD matrix, plus the 2-norm
/// condition number of a design whose Gram it is.
pub fn gram_eig_extremes(gram: &DMatrix<f64>) -> (f64, f64) {
    let eig = gram.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    (min.max(0.0), max.max(0.0))
}

/// Solve the symmetric positive-definite system `a x = b`, falling back to an
/// SVD-based pseudo-solve when Cholesky fails marginally.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Some(chol.solve(b));
    }
    let svd = a.clone().svd(true, true);
    svd.solve(b, f64::EPSILON * a.nrows() as f64).ok()
}

/// Inverse of a symmetric positive-definite matrix.
pub fn invert_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Some(chol.inverse());
    }
    a.clone().try_inverse()
}

/// Sample column means.
pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Sample standard deviations per column (n-1 denominator).
pub fn column_sds(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let means = column_means(m);
    DVector::from_iterator(
        m.ncols(),
        m.column_iter().enumerate().map(|(j, c)| {
            let mu = means[j];
            let ss: f64 = c.iter().map(|x| (x - mu).powi(2)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        }),
    )
}

/// Cross covariance `cov(x, y)` with the n-1 denominator; columns of `x`
/// index rows of the result.
pub fn cross_covariance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(x.nrows(), y.nrows());
    let n = x.nrows() as f64;
    let mx = column_means(x);
    let my = column_means(y);
    let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mx[j]);
    let yc = DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] - my[j]);
    xc.transpose() * yc / (n - 1.0)
}
