//! Executable identifiability checks: normality screening of Z and A,
//! cross-covariance rank, the population rank condition, and the linear
//! independence of A and the fitted conditional expectation.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::dataset::StandardizedDataset;
use crate::error::{EuncError, Result};
use crate::linalg::{cross_covariance, gram_eig_extremes, numerical_rank};

/// log of the standard normal CDF, accurate deep into both tails.
fn std_normal_log_cdf(z: f64) -> f64 {
    let t = -z / std::f64::consts::SQRT_2;
    if t < 25.0 {
        (0.5 * erfc(t)).ln()
    } else {
        // asymptotic tail: erfc(t) ~ exp(-t^2) / (t sqrt(pi))
        -t * t - t.ln() - 0.5 * std::f64::consts::PI.ln() - std::f64::consts::LN_2
    }
}

/// log of the standard normal survival function.
fn std_normal_log_sf(z: f64) -> f64 {
    std_normal_log_cdf(-z)
}

/// Default significance level for the normality screen.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Default eigenvalue-ratio threshold for the collinearity check.
pub const DEFAULT_LI_THRESHOLD: f64 = 1e-6;

/// Anderson-Darling test of composite normality (estimated mean and
/// variance) with the small-sample adjusted statistic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AndersonDarling {
    pub statistic: f64,
    pub adjusted_statistic: f64,
    pub p_value: f64,
}

/// A^2 against the normal family with estimated parameters; p-value from the
/// piecewise-exponential approximation for the composite normal null.
pub fn anderson_darling(sample: &[f64]) -> Result<AndersonDarling> {
    let n = sample.len();
    if n < 8 {
        return Err(EuncError::SampleTooSmall { min: 8, got: n });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(EuncError::Precondition("non-finite value in sample".into()));
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if sd <= 0.0 {
        return Err(EuncError::DegenerateColumn {
            name: "sample".into(),
            sd,
            limit: 0.0,
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    for i in 0..n {
        let zi = (sorted[i] - mean) / sd;
        let zr = (sorted[n - 1 - i] - mean) / sd;
        let k = (2 * (i + 1) - 1) as f64;
        sum += k * (std_normal_log_cdf(zi) + std_normal_log_sf(zr));
    }
    let statistic = -nf - sum / nf;
    let adjusted = statistic * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    Ok(AndersonDarling {
        statistic,
        adjusted_statistic: adjusted,
        p_value: ad_p_value(adjusted),
    })
}

/// Piecewise approximation of the composite-normal-null p-value from the
/// adjusted statistic.
pub fn ad_p_value(a2_star: f64) -> f64 {
    if a2_star >= 100.0 {
        // far outside the approximation's fitted range (its quadratic turns
        // back up near 300); the p-value is zero to double precision anyway
        return 0.0;
    }
    let p = if a2_star < 0.2 {
        1.0 - (-13.436 + 101.14 * a2_star - 223.73 * a2_star * a2_star).exp()
    } else if a2_star < 0.34 {
        1.0 - (-8.318 + 42.796 * a2_star - 59.938 * a2_star * a2_star).exp()
    } else if a2_star < 0.6 {
        (0.9177 - 4.279 * a2_star - 1.38 * a2_star * a2_star).exp()
    } else {
        (1.2937 - 5.709 * a2_star + 0.0186 * a2_star * a2_star).exp()
    };
    p.clamp(0.0, 1.0)
}

/// Numerical rank of the sample cross-covariance cov(A, Z).
#[derive(Debug, Clone, Serialize)]
pub struct CovRank {
    pub rank: usize,
    pub full_row_rank: bool,
    /// Set when p > l: the covariate block cannot span the treatments.
    pub treatments_exceed_covariates: bool,
}

pub fn cov_rank_check(data: &StandardizedDataset, tol: Option<f64>) -> CovRank {
    let p = data.data().p();
    let l = data.data().l();
    let cov_az = cross_covariance(data.data().a(), data.data().z());
    let rank = numerical_rank(&cov_az, tol);
    if p > l {
        CovRank {
            rank,
            full_row_rank: false,
            treatments_exceed_covariates: true,
        }
    } else {
        CovRank {
            rank,
            full_row_rank: rank == p,
            treatments_exceed_covariates: false,
        }
    }
}

/// Population rank condition: the rank of the augmented matrix
/// (Gamma + Lambda Sigma', Gamma Sigma + Lambda) must equal the rank of
/// Gamma + Lambda Sigma'.
pub fn rank_condition_population(
    gamma: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> Result<bool> {
    let p = gamma.nrows();
    let l = gamma.ncols();
    let t = lambda.ncols();
    if lambda.nrows() != p || sigma.nrows() != l || sigma.ncols() != t {
        return Err(EuncError::DimensionMismatch(format!(
            "gamma {p}x{l}, lambda {}x{}, sigma {}x{}",
            lambda.nrows(),
            lambda.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let m1 = gamma + lambda * sigma.transpose();
    let m2 = gamma * sigma + lambda;
    let mut aug = DMatrix::zeros(p, l + t);
    aug.view_mut((0, 0), (p, l)).copy_from(&m1);
    aug.view_mut((0, l), (p, t)).copy_from(&m2);
    Ok(numerical_rank(&aug, None) == numerical_rank(&m1, None))
}

/// Linear-independence verdict for the stacked design [A, m_hat].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearIndependence {
    pub independent: bool,
    /// 2-norm condition number of the column-normalized design.
    pub condition_number: f64,
    pub eig_ratio: f64,
    pub threshold: f64,
}

/// Forms the Gram matrix of the unit-norm-scaled columns [A, m_hat];
/// independent iff the smallest-to-largest eigenvalue ratio exceeds the
/// threshold.
pub fn linear_independence_check(
    a: &DMatrix<f64>,
    m_hat: &DMatrix<f64>,
    threshold: f64,
) -> LinearIndependence {
    assert_eq!(a.nrows(), m_hat.nrows(), "row-aligned inputs required");
    let n = a.nrows();
    let k = a.ncols() + m_hat.ncols();
    let mut stacked = DMatrix::zeros(n, k);
    stacked.view_mut((0, 0), (n, a.ncols())).copy_from(a);
    stacked
        .view_mut((0, a.ncols()), (n, m_hat.ncols()))
        .copy_from(m_hat);
    for mut col in stacked.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let gram = stacked.transpose() * &stacked;
    let (emin, emax) = gram_eig_extremes(&gram);
    let eig_ratio = if emax > 0.0 { emin / emax } else { 0.0 };
    let condition_number = if emin > 0.0 {
        (emax / emin).sqrt()
    } else {
        f64::INFINITY
    };
    LinearIndependence {
        independent: eig_ratio > threshold,
        condition_number,
        eig_ratio,
        threshold,
    }
}

/// Aggregated diagnostics for one dataset.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub alpha_level: f64,
    pub ad_pvalues_z: Vec<f64>,
    pub ad_pvalues_a: Vec<f64>,
    /// Z must look Gaussian: every column non-rejected at alpha / l.
    pub z_gaussian_pass: bool,
    /// A must look non-Gaussian: at least one column rejected at alpha.
    pub a_non_gaussian_pass: bool,
    /// Treatment columns that failed to reject normality.
    pub gaussian_looking_a: Vec<usize>,
    pub cov_az_rank: usize,
    pub cov_az_full_row_rank: bool,
    pub linear_independence: Option<LinearIndependence>,
    pub overall_pass: bool,
}

impl DiagnosticsReport {
    /// Normality and rank screens, before the conditional expectation is
    /// fitted. `linear_independence` is attached later by the pipeline.
    pub fn screen(data: &StandardizedDataset, alpha_level: f64) -> Result<Self> {
        let l = data.data().l();
        let p = data.data().p();
        let col = |m: &DMatrix<f64>, j: usize| -> Vec<f64> { m.column(j).iter().copied().collect() };
        let mut ad_pvalues_z = Vec::with_capacity(l);
        for j in 0..l {
            ad_pvalues_z.push(anderson_darling(&col(data.data().z(), j))?.p_value);
        }
        let mut ad_pvalues_a = Vec::with_capacity(p);
        for j in 0..p {
            ad_pvalues_a.push(anderson_darling(&col(data.data().a(), j))?.p_value);
        }
        // Bonferroni across the l covariate tests.
        let z_level = alpha_level / l as f64;
        let z_gaussian_pass = ad_pvalues_z.iter().all(|&pv| pv >= z_level);
        let gaussian_looking_a: Vec<usize> = ad_pvalues_a
            .iter()
            .enumerate()
            .filter(|(_, &pv)| pv >= alpha_level)
            .map(|(j, _)| j)
            .collect();
        let a_non_gaussian_pass = gaussian_looking_a.len() < p;
        let cov = cov_rank_check(data, None);
        Ok(DiagnosticsReport {
            alpha_level,
            ad_pvalues_z,
            ad_pvalues_a,
            z_gaussian_pass,
            a_non_gaussian_pass,
            gaussian_looking_a,
            cov_az_rank: cov.rank,
            cov_az_full_row_rank: cov.full_row_rank,
            linear_independence: None,
            overall_pass: false,
        })
    }

    /// The pre-fit screens alone.
    pub fn screen_pass(&self) -> bool {
        self.z_gaussian_pass && self.a_non_gaussian_pass && self.cov_az_full_row_rank
    }

    pub fn attach_linear_independence(&mut self, li: LinearIndependence) {
        self.linear_independence = Some(li);
        self.overall_pass = self.screen_pass() && li.independent;
    }

    /// Key-value text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let fmt_vec = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        out.push_str(&format!("alpha_level: {}\n", self.alpha_level));
        out.push_str(&format!("ad_pvalues_z: [{}]\n", fmt_vec(&self.ad_pvalues_z)));
        out.push_str(&format!("ad_pvalues_a: [{}]\n", fmt_vec(&self.ad_pvalues_a)));
        out.push_str(&format!("z_gaussian_pass: {}\n", self.z_gaussian_pass));
        out.push_str(&format!(
            "a_non_gaussian_pass: {}\n",
            self.a_non_gaussian_pass
        ));
        if !self.gaussian_looking_a.is_empty() {
            out.push_str(&format!(
                "gaussian_looking_a: {:?}\n",
                self.gaussian_looking_a
            ));
        }
        out.push_str(&format!("cov_az_rank: {}\n", self.cov_az_rank));
        out.push_str(&format!(
            "cov_az_full_row_rank: {}\n",
            self.cov_az_full_row_rank
        ));
        match &self.linear_independence {
            Some(li) => {
                out.push_str(&format!("linear_independence: {}\n", li.independent));
                out.push_str(&format!("condition_number: {:.4e}\n", li.condition_number));
            }
            None => out.push_str("linear_independence: not evaluated\n"),
        }
        out.push_str(&format!("overall_pass: {}\n", self.overall_pass));
        out
    }
}


#[cfg(test)]
mod extra_tests {
    use super::*;
    use crate::dataset::{standardize, Dataset};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn more_treatments_than_covariates_flagged() {
        // p > l: the covariate block cannot span the treatments, whatever
        // the numerical rank says.
        let n = 60;
        let z = DMatrix::from_fn(n, 1, |i, _| ((i * 13 % 17) as f64) - 8.0);
        let a = DMatrix::from_fn(n, 2, |i, j| {
            z[(i, 0)] * (j as f64 + 0.5) + ((i * (7 + j) % 23) as f64)
        });
        let y = DVector::from_fn(n, |i, _| a[(i, 0)] + a[(i, 1)]);
        let s = standardize(&Dataset::new(z, a, y, None).unwrap()).unwrap();
        let r = cov_rank_check(&s, None);
        assert!(r.treatments_exceed_covariates);
        assert!(!r.full_row_rank);
        assert!(r.rank <= 1);
    }
}
