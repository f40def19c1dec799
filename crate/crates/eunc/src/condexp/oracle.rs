//! Ground-truth E(Z|A) for single-treatment scenarios, via one-dimensional
//! quadrature against the treatment-noise density. Serves as the accuracy
//! oracle for the fitted first stages.

use nalgebra::DVector;

use crate::error::{EuncError, Result};
use crate::quadrature::integrate_adaptive;
use crate::scenario::{NoiseSpec, ScenarioSpec};

/// Posterior mean E[zeta | zeta + eps = a] for zeta ~ N(0, var_zeta) and an
/// independent noise eps, by adaptive quadrature over the support of the
/// posterior.
pub fn posterior_mean(var_zeta: f64, eps: &NoiseSpec, a: f64) -> f64 {
    let sd = var_zeta.sqrt();
    let (eps_lo, eps_hi) = eps.support();
    let lo = (a - eps_hi).max(-40.0 * sd);
    let hi = (a - eps_lo).min(40.0 * sd);
    if lo >= hi {
        // query so deep in a tail that the joint density underflows; the
        // posterior collapses onto the nearest feasible boundary point
        return if a - eps_hi > 0.0 { a - eps_hi } else { a - eps_lo };
    }
    let phi = |z: f64| (-0.5 * (z / sd).powi(2)).exp();
    let joint = |z: f64| phi(z) * eps.density(a - z);
    let i0 = integrate_adaptive(&joint, lo, hi, 1e-12);
    let i1 = integrate_adaptive(&|z| z * joint(z), lo, hi, 1e-12);
    if i0 > 0.0 && i0.is_finite() && i1.is_finite() {
        i1 / i0
    } else {
        lo.max(0.0_f64.min(hi))
    }
}

/// The true conditional expectation E(Z|A=a) for a single-treatment
/// scenario: kappa_i * E[zeta | zeta + eps_A = a] with
/// zeta = gamma'Z + lambda'U and kappa_i = cov(Z_i, zeta) / var(zeta).
pub fn oracle_condexp(spec: &ScenarioSpec, a: f64) -> Result<DVector<f64>> {
    if spec.p != 1 {
        return Err(EuncError::UnsupportedSpec(format!(
            "oracle supports a single treatment, got p={}",
            spec.p
        )));
    }
    if spec.extra_confounder.is_some() {
        return Err(EuncError::UnsupportedSpec(
            "oracle does not cover the extra-confounder variant".into(),
        ));
    }
    spec.validate()?;
    let gamma = spec.gamma.row(0).transpose();
    let lambda = spec.lambda.row(0).transpose();
    // var(zeta) = gamma'gamma + lambda'lambda + 2 gamma' Sigma lambda
    let var_zeta = gamma.dot(&gamma)
        + lambda.dot(&lambda)
        + 2.0 * (gamma.transpose() * &spec.sigma * &lambda)[(0, 0)];
    if var_zeta <= 0.0 {
        return Err(EuncError::UnsupportedSpec(
            "zeta is degenerate: no Z/U channel into the treatment".into(),
        ));
    }
    let post = posterior_mean(var_zeta, &spec.treatment_noise[0], a);
    // cov(Z_i, zeta) = gamma_i + (Sigma lambda)_i
    let sig_lambda = &spec.sigma * &lambda;
    Ok(DVector::from_fn(spec.l, |i, _| {
        (gamma[i] + sig_lambda[i]) / var_zeta * post
    }))
}

/// Oracle values at many query points (column vector per query, stacked as
/// rows to match `CondExpModel::predict`).
pub fn oracle_condexp_many(spec: &ScenarioSpec, queries: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
    let mut out = nalgebra::DMatrix::zeros(queries.len(), spec.l);
    for (i, &a) in queries.iter().enumerate() {
        let v = oracle_condexp(spec, a)?;
        for k in 0..spec.l {
            out[(i, k)] = v[k];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::scenario::NoiseSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_noise_gives_linear_posterior() {
        // Jointly Gaussian case: E(Z|a) = kappa * var_zeta/(var_zeta + var_eps) * a.
        let mut spec = presets::table1_case(1).unwrap();
        spec.treatment_noise = vec![NoiseSpec::Gaussian { mean: 0.0, sd: 1.5 }];
        let var_zeta = 1.0 + 0.25; // gamma=1, lambda=0.5, xi=0
        let kappa = 1.0 / var_zeta;
        let shrink = var_zeta / (var_zeta + 2.25);
        for a in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            let got = oracle_condexp(&spec, a).unwrap()[0];
            assert_abs_diff_eq!(got, kappa * shrink * a, epsilon = 1e-8);
        }
    }

    #[test]
    fn symmetric_families_vanish_at_zero() {
        let spec = presets::example1();
        assert_abs_diff_eq!(oracle_condexp(&spec, 0.0).unwrap()[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn best_linear_coefficient_matches_moment_ratio() {
        // The population projection slope of the oracle curve onto A equals
        // E(ZA)/E(A^2) = 3/7 for the uniform-noise example: evaluate
        // E[A * kappa * E(zeta|A)] / E[A^2] by direct quadrature over the
        // joint law of (zeta, eps).
        let spec = presets::example1();
        let var_zeta: f64 = 2.0;
        let sd = var_zeta.sqrt();
        let eps = &spec.treatment_noise[0];
        let phi = |z: f64| {
            (-0.5 * (z / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        // E[A m(A)] with m the oracle curve and A = zeta + eps
        let inner = |z: f64| {
            let f = |e: f64| {
                let a = z + e;
                a * oracle_condexp(&spec, a).unwrap()[0] * eps.density(e)
            };
            integrate_adaptive(&f, -1.0, 1.0, 1e-9) * phi(z)
        };
        let num = integrate_adaptive(&inner, -8.0 * sd, 8.0 * sd, 1e-7);
        let denom = 7.0 / 3.0; // E[A^2]
        assert_abs_diff_eq!(num / denom, 3.0 / 7.0, epsilon = 1e-4);
    }

    #[test]
    fn exponential_posterior_matches_closed_form() {
        // For eps ~ Exp(rate), the posterior is a tilted normal truncated at
        // a: mean = m - sd * pdf(d)/cdf(d), m = rate * var, d = (a - m)/sd.
        use statrs::distribution::{Continuous, ContinuousCDF, Normal};
        let spec = presets::table1_case(1).unwrap();
        let var_zeta: f64 = 1.25;
        let sd = var_zeta.sqrt();
        let m = 0.1 * var_zeta;
        let std_norm = Normal::new(0.0, 1.0).unwrap();
        for a in [-1.0, 0.5, 2.0, 10.0, 40.0] {
            let d = (a - m) / sd;
            let expected = m - sd * std_norm.pdf(d) / std_norm.cdf(d);
            let got = posterior_mean(var_zeta, &spec.treatment_noise[0], a);
            assert_abs_diff_eq!(got, expected, epsilon = 1e-7);
        }
    }

    #[test]
    fn multi_treatment_rejected() {
        let spec = presets::example3();
        assert!(matches!(
            oracle_condexp(&spec, 0.0),
            Err(EuncError::UnsupportedSpec(_))
        ));
    }
}
