//! Gauss quadrature rules (Golub-Welsch) and an adaptive panel integrator.

use nalgebra::DMatrix;
use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    // Jacobi matrix for Legendre polynomials: off-diagonal k / sqrt(4k^2 - 1).
    let mut jac = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let w = 2.0 * eig.eigenvectors[(0, i)].powi(2);
            (eig.eigenvalues[i], w)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Nodes and weights of the n-point Gauss-Hermite rule (weight e^{-x^2}).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut jac = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = jac.symmetric_eigen();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let w = sqrt_pi * eig.eigenvectors[(0, i)].powi(2);
            (eig.eigenvalues[i], w)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn gl15() -> &'static Vec<(f64, f64)> {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

fn gl31() -> &'static Vec<(f64, f64)> {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(31))
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * rule
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Adaptive Gauss-Legendre integration of `f` over [a, b] to absolute
/// tolerance `tol`. The interval is pre-split into 16 uniform panels so
/// narrow features cannot hide between the nodes of one wide panel; each
/// panel is accepted when the 15- and 31-point rules agree, otherwise
/// bisected (depth-capped).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let coarse = panel(f, a, b, gl15());
        let fine = panel(f, a, b, gl31());
        if (fine - coarse).abs() <= tol || depth >= 24 {
            return fine;
        }
        let mid = 0.5 * (a + b);
        recurse(f, a, mid, tol * 0.5, depth + 1) + recurse(f, mid, b, tol * 0.5, depth + 1)
    }
    if a >= b {
        return 0.0;
    }
    const SPLITS: usize = 16;
    let width = (b - a) / SPLITS as f64;
    (0..SPLITS)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == SPLITS { b } else { lo + width };
            recurse(f, lo, hi, tol / SPLITS as f64, 0)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        // A degree-n rule integrates polynomials of degree 2n-1 exactly.
        let rule = gauss_legendre(5);
        let integral: f64 = rule.iter().map(|&(x, w)| w * x.powi(8)).sum();
        assert_abs_diff_eq!(integral, 2.0 / 9.0, epsilon = 1e-13);
    }

    #[test]
    fn hermite_moments_of_gaussian() {
        // Int e^{-x^2} x^2 dx = sqrt(pi)/2.
        let rule = gauss_hermite(20);
        let integral: f64 = rule.iter().map(|&(x, w)| w * x * x).sum();
        assert_abs_diff_eq!(integral, PI.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let f = |x: f64| x.abs();
        let integral = integrate_adaptive(&f, -1.0, 2.0, 1e-12);
        assert_abs_diff_eq!(integral, 2.5, epsilon = 1e-10);
    }
}
