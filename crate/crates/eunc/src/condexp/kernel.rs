//! Nadaraya-Watson and local-linear smoother weights with a Gaussian
//! product kernel and per-dimension bandwidths.

use nalgebra::{DMatrix, DVector};

/// Nadaraya-Watson weights at one query point. Nonnegative and summing to
/// one; if the kernel mass underflows everywhere the nearest training point
/// receives all weight.
pub fn nw_weights(a_train: &DMatrix<f64>, bandwidths: &[f64], query: &[f64]) -> Vec<f64> {
    let n = a_train.nrows();
    let p = a_train.ncols();
    let mut w = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..n {
        let mut quad = 0.0;
        for j in 0..p {
            let d = (a_train[(i, j)] - query[j]) / bandwidths[j];
            quad += d * d;
        }
        let k = (-0.5 * quad).exp();
        w[i] = k;
        total += k;
    }
    if total <= 0.0 || !total.is_finite() {
        // all mass underflowed: fall back to the nearest neighbour
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let mut quad = 0.0;
            for j in 0..p {
                let d = (a_train[(i, j)] - query[j]) / bandwidths[j];
                quad += d * d;
            }
            if quad < best_d {
                best_d = quad;
                best = i;
            }
        }
        let mut w = vec![0.0; n];
        w[best] = 1.0;
        return w;
    }
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Effective local-linear weights at one query point: the first row of
/// (X'WX)^-1 X'W with X = [1, A - query]. They sum to one (the smoother
/// reproduces constants and linear functions) but may be negative. Falls
/// back to the Nadaraya-Watson weights when the local design is singular.
pub fn local_linear_weights(a_train: &DMatrix<f64>, bandwidths: &[f64], query: &[f64]) -> Vec<f64> {
    let n = a_train.nrows();
    let p = a_train.ncols();
    let kw = nw_weights(a_train, bandwidths, query);
    // X'WX and X'W built over the (1 + p)-column local design.
    let dim = p + 1;
    let mut xtwx = DMatrix::zeros(dim, dim);
    for i in 0..n {
        if kw[i] == 0.0 {
            continue;
        }
        let mut xi = vec![1.0; dim];
        for j in 0..p {
            xi[j + 1] = a_train[(i, j)] - query[j];
        }
        for r in 0..dim {
            for c in 0..dim {
                xtwx[(r, c)] += kw[i] * xi[r] * xi[c];
            }
        }
    }
    let e1 = DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let first_row = match xtwx.cholesky().map(|ch| ch.solve(&e1)) {
        Some(v) => v,
        None => return kw,
    };
    let mut weights = vec![0.0; n];
    let mut sum = 0.0;
    for i in 0..n {
        if kw[i] == 0.0 {
            continue;
        }
        let mut xi_dot = first_row[0];
        for j in 0..p {
            xi_dot += first_row[j + 1] * (a_train[(i, j)] - query[j]);
        }
        weights[i] = kw[i] * xi_dot;
        sum += weights[i];
    }
    // a numerically degenerate local design loses the affine-reproduction
    // identity; the constant-reproducing kernel weights are safer there
    let drift = (sum - 1.0).abs();
    if drift.is_nan() || drift >= 1e-10 {
        return kw;
    }
    weights
}
