//! Polynomial sieve regression: least squares on the total-degree monomial
//! basis with a small ridge.

use nalgebra::DMatrix;

use crate::error::{EuncError, Result};

/// Monomial exponent tuples of total degree <= degree over p variables, in
/// graded lexicographic order (constant term first).
pub fn basis_exponents(p: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, dim: usize, remaining: u32) {
        if dim + 1 == current.len() {
            current[dim] = remaining;
            out.push(current.clone());
            current[dim] = 0;
            return;
        }
        for e in 0..=remaining {
            current[dim] = e;
            rec(out, current, dim + 1, remaining - e);
        }
        current[dim] = 0;
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; p];
    for total in 0..=degree as u32 {
        rec(&mut out, &mut current, 0, total);
    }
    out
}

fn design(a: &DMatrix<f64>, exponents: &[Vec<u32>]) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, exponents.len(), |i, k| {
        exponents[k]
            .iter()
            .enumerate()
            .map(|(j, &e)| a[(i, j)].powi(e as i32))
            .product()
    })
}

#[derive(Debug, Clone)]
pub struct SieveFit {
    exponents: Vec<Vec<u32>>,
    /// Basis-column scales used to normalize the Gram matrix.
    scales: Vec<f64>,
    /// Coefficients, one column per output dimension.
    coefs: DMatrix<f64>,
}

impl SieveFit {
    pub fn predict(&self, a_query: &DMatrix<f64>) -> DMatrix<f64> {
        let mut b = design(a_query, &self.exponents);
        for (k, &s) in self.scales.iter().enumerate() {
            for i in 0..b.nrows() {
                b[(i, k)] /= s;
            }
        }
        b * &self.coefs
    }
}

/// Least squares of each z column on the polynomial basis, solved through
/// the column-equilibrated normal equations with ridge `ridge`.
pub fn fit_sieve(a: &DMatrix<f64>, z: &DMatrix<f64>, degree: usize, ridge: f64) -> Result<SieveFit> {
    let n = a.nrows();
    let exponents = basis_exponents(a.ncols(), degree);
    let mut b = design(a, &exponents);
    // Equilibrate columns to unit rms so the ridge acts on a common scale.
    let mut scales = vec![1.0; exponents.len()];
    for k in 0..b.ncols() {
        let rms = (b.column(k).iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if rms > 0.0 {
            scales[k] = rms;
            for i in 0..n {
                b[(i, k)] /= rms;
            }
        }
    }
    let gram = b.transpose() * &b / n as f64;
    let mut ridged = gram.clone();
    for k in 0..ridged.nrows() {
        ridged[(k, k)] += ridge;
    }
    let rhs = b.transpose() * z / n as f64;
    let chol = ridged.cholesky().ok_or(EuncError::SingularBasis)?;
    // Iterative refinement against the unridged normal equations: the ridge
    // acts as a repair for rank-deficient bases while well-posed fits
    // converge to the exact least-squares solution.
    let mut coefs = chol.solve(&rhs);
    for _ in 0..2 {
        let residual = &rhs - &gram * &coefs;
        coefs += chol.solve(&residual);
    }
    if coefs.iter().any(|v| !v.is_finite()) {
        return Err(EuncError::SingularBasis);
    }
    Ok(SieveFit {
        exponents,
        scales,
        coefs,
    })
}
