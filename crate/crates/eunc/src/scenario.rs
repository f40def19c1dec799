//! Data-generating-process parameterization: noise families and the full
//! structural scenario used for simulation and for analytic moments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{EuncError, Result};
use crate::linalg::psd_factor;

/// Eigenvalues of the (Z,U) covariance block may round this far below zero
/// before the spec is rejected; values in [-PSD_TOL, 0) are clamped.
pub const PSD_TOL: f64 = 1e-10;

/// A univariate noise family with finite, strictly positive variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    StudentT { nu: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            NoiseSpec::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && *sd > 0.0,
            NoiseSpec::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            NoiseSpec::Exponential { rate } => rate.is_finite() && *rate > 0.0,
            NoiseSpec::StudentT { nu } => nu.is_finite() && *nu > 2.0,
        };
        if ok {
            Ok(())
        } else {
            Err(EuncError::InvalidSpec {
                reason: format!("invalid noise parameters: {self:?}"),
            })
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            NoiseSpec::Gaussian { mean, .. } => *mean,
            NoiseSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            NoiseSpec::Exponential { rate } => 1.0 / rate,
            NoiseSpec::StudentT { .. } => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            NoiseSpec::Gaussian { sd, .. } => sd * sd,
            NoiseSpec::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            NoiseSpec::Exponential { rate } => 1.0 / (rate * rate),
            NoiseSpec::StudentT { nu } => nu / (nu - 2.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Gaussian { mean, sd } => {
                Normal::new(*mean, *sd).expect("validated").sample(rng)
            }
            NoiseSpec::Uniform { lo, hi } => Uniform::new(*lo, *hi).sample(rng),
            NoiseSpec::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            NoiseSpec::StudentT { nu } => StudentT::new(*nu).expect("validated").sample(rng),
        }
    }

    /// Raw moment E[X^k] in closed form. Student-t moments of order >= nu do
    /// not exist and report `UnsupportedMoment`.
    pub fn raw_moment(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Ok(1.0);
        }
        match self {
            NoiseSpec::Gaussian { mean, sd } => {
                // Binomial expansion of (mean + sd*N)^k over central normal moments.
                let mut total = 0.0;
                for j in (0..=k).step_by(2) {
                    let double_fact: f64 = (1..j).step_by(2).map(|i| i as f64).product();
                    total += binomial(k, j) * mean.powi((k - j) as i32) * sd.powi(j as i32)
                        * double_fact;
                }
                Ok(total)
            }
            NoiseSpec::Uniform { lo, hi } => {
                let kp = k as i32 + 1;
                Ok((hi.powi(kp) - lo.powi(kp)) / (f64::from(kp) * (hi - lo)))
            }
            NoiseSpec::Exponential { rate } => {
                let mut fact = 1.0;
                for i in 2..=k {
                    fact *= f64::from(i);
                }
                Ok(fact / rate.powi(k as i32))
            }
            NoiseSpec::StudentT { nu } => {
                if f64::from(k) >= *nu {
                    return Err(EuncError::UnsupportedMoment(format!(
                        "student_t(nu={nu}) has no finite moment of order {k}"
                    )));
                }
                if k % 2 == 1 {
                    return Ok(0.0);
                }
                let m = k / 2;
                let mut value = nu.powi(m as i32);
                for i in 1..=m {
                    value *= f64::from(2 * i - 1) / (nu - f64::from(2 * i));
                }
                Ok(value)
            }
        }
    }

    /// Density, zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            NoiseSpec::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            NoiseSpec::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            NoiseSpec::Exponential { rate } => {
                if x >= 0.0 {
                    rate * (-rate * x).exp()
                } else {
                    0.0
                }
            }
            NoiseSpec::StudentT { nu } => {
                let half = 0.5 * (nu + 1.0);
                let log_norm = ln_gamma(half)
                    - ln_gamma(0.5 * nu)
                    - 0.5 * (nu * std::f64::consts::PI).ln();
                (log_norm - half * (1.0 + x * x / nu).ln()).exp()
            }
        }
    }

    /// Support interval (may be unbounded).
    pub fn support(&self) -> (f64, f64) {
        match self {
            NoiseSpec::Gaussian { .. } | NoiseSpec::StudentT { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            NoiseSpec::Uniform { lo, hi } => (*lo, *hi),
            NoiseSpec::Exponential { .. } => (0.0, f64::INFINITY),
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out = out * f64::from(n - i) / f64::from(i + 1);
    }
    out
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// An extra observed-by-nobody confounder W with loadings on every treatment
/// and on the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraConfounder {
    pub noise: NoiseSpec,
    pub loadings_a: Vec<f64>,
    pub loading_y: f64,
}

/// Full parameterization of the structural data-generating process.
///
/// Z in R^l and U in R^t are jointly Gaussian with unit variances and
/// cross-covariance `sigma`; treatments follow
/// `A = gamma Z + lambda U + eps_A` plus optional within-treatment causal
/// coefficients (`treatment_dag`, strictly lower triangular, applied in
/// index order) and optional extra-confounder loadings; the outcome is
/// `Y = alpha' A + beta' Z + s' U (+ loading_y W) + eps_Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub p: usize,
    pub l: usize,
    pub t: usize,
    pub gamma: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub s: DVector<f64>,
    pub treatment_noise: Vec<NoiseSpec>,
    pub outcome_noise: NoiseSpec,
    pub extra_confounder: Option<ExtraConfounder>,
    pub treatment_dag: Option<DMatrix<f64>>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.l == 0 || self.t == 0 {
            return Err(EuncError::InvalidSpec {
                reason: "p, l and t must all be at least 1".into(),
            });
        }
        let dims = [
            (self.gamma.shape(), (self.p, self.l), "gamma"),
            (self.lambda.shape(), (self.p, self.t), "lambda"),
            (self.sigma.shape(), (self.l, self.t), "sigma"),
        ];
        for (got, want, name) in dims {
            if got != want {
                return Err(EuncError::DimensionMismatch(format!(
                    "{name} must be {}x{}, got {}x{}",
                    want.0, want.1, got.0, got.1
                )));
            }
        }
        if self.alpha.len() != self.p || self.beta.len() != self.l || self.s.len() != self.t {
            return Err(EuncError::DimensionMismatch(
                "alpha/beta/s length must match p/l/t".into(),
            ));
        }
        if self.treatment_noise.len() != self.p {
            return Err(EuncError::DimensionMismatch(format!(
                "need one treatment noise per treatment: got {} for p={}",
                self.treatment_noise.len(),
                self.p
            )));
        }
        for spec in &self.treatment_noise {
            spec.validate()?;
        }
        self.outcome_noise.validate()?;
        if let Some(w) = &self.extra_confounder {
            w.noise.validate()?;
            if w.loadings_a.len() != self.p {
                return Err(EuncError::DimensionMismatch(
                    "extra confounder needs one treatment loading per treatment".into(),
                ));
            }
        }
        if let Some(dag) = &self.treatment_dag {
            if dag.shape() != (self.p, self.p) {
                return Err(EuncError::DimensionMismatch(format!(
                    "treatment_dag must be {0}x{0}",
                    self.p
                )));
            }
            for i in 0..self.p {
                for j in i..self.p {
                    if dag[(i, j)] != 0.0 {
                        return Err(EuncError::InvalidSpec {
                            reason: "treatment_dag must be strictly lower triangular".into(),
                        });
                    }
                }
            }
        }
        // The joint (Z, U) covariance must be PSD.
        self.zu_factor()?;
        Ok(())
    }

    /// The (l+t) x (l+t) covariance of the joint Gaussian (Z, U).
    pub fn zu_covariance(&self) -> DMatrix<f64> {
        let d = self.l + self.t;
        let mut cov = DMatrix::identity(d, d);
        for i in 0..self.l {
            for j in 0..self.t {
                cov[(i, self.l + j)] = self.sigma[(i, j)];
                cov[(self.l + j, i)] = self.sigma[(i, j)];
            }
        }
        cov
    }

    /// Factor L with L L' = cov(Z,U), eigenvalue-clamped per the PSD policy.
    pub fn zu_factor(&self) -> Result<DMatrix<f64>> {
        psd_factor(&self.zu_covariance(), PSD_TOL)
    }

    /// Coefficients of each treatment on the independent base components
    /// (Z.., U.., eps_A.., W), with the within-treatment coefficients
    /// substituted out in index order. Row j describes treatment j.
    pub fn resolved_treatment_coefficients(&self) -> DMatrix<f64> {
        let nb = self.l + self.t + self.p + 1;
        let mut rows = DMatrix::zeros(self.p, nb);
        for j in 0..self.p {
            for i in 0..self.l {
                rows[(j, i)] = self.gamma[(j, i)];
            }
            for i in 0..self.t {
                rows[(j, self.l + i)] = self.lambda[(j, i)];
            }
            rows[(j, self.l + self.t + j)] = 1.0;
            if let Some(w) = &self.extra_confounder {
                rows[(j, nb - 1)] = w.loadings_a[j];
            }
            if let Some(dag) = &self.treatment_dag {
                for i in 0..j {
                    let c = dag[(j, i)];
                    if c != 0.0 {
                        for k in 0..nb {
                            rows[(j, k)] += c * rows[(i, k)];
                        }
                    }
                }
            }
        }
        rows
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| EuncError::Config(format!("scenario parse: {e}")))?;
        let spec = file.into_spec()?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Serde mirror of `ScenarioSpec` with plain nested-vector matrices, the
/// on-disk scenario file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub p: usize,
    pub l: usize,
    pub t: usize,
    pub gamma: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub s: Vec<f64>,
    pub treatment_noise: Vec<NoiseSpec>,
    pub outcome_noise: NoiseSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra_confounder: Option<ExtraConfounder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment_dag: Option<Vec<Vec<f64>>>,
}

fn to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(EuncError::DimensionMismatch(format!(
            "{name} must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl From<&ScenarioSpec> for ScenarioFile {
    fn from(spec: &ScenarioSpec) -> Self {
        ScenarioFile {
            name: spec.name.clone(),
            p: spec.p,
            l: spec.l,
            t: spec.t,
            gamma: to_rows(&spec.gamma),
            lambda: to_rows(&spec.lambda),
            sigma: to_rows(&spec.sigma),
            alpha: spec.alpha.iter().copied().collect(),
            beta: spec.beta.iter().copied().collect(),
            s: spec.s.iter().copied().collect(),
            treatment_noise: spec.treatment_noise.clone(),
            outcome_noise: spec.outcome_noise.clone(),
            extra_confounder: spec.extra_confounder.clone(),
            treatment_dag: spec.treatment_dag.as_ref().map(to_rows),
        }
    }
}

impl ScenarioFile {
    pub fn into_spec(self) -> Result<ScenarioSpec> {
        Ok(ScenarioSpec {
            gamma: to_matrix(&self.gamma, self.p, self.l, "gamma")?,
            lambda: to_matrix(&self.lambda, self.p, self.t, "lambda")?,
            sigma: to_matrix(&self.sigma, self.l, self.t, "sigma")?,
            alpha: DVector::from_vec(self.alpha),
            beta: DVector::from_vec(self.beta),
            s: DVector::from_vec(self.s),
            treatment_dag: match self.treatment_dag {
                Some(rows) => Some(to_matrix(&rows, self.p, self.p, "treatment_dag")?),
                None => None,
            },
            name: self.name,
            p: self.p,
            l: self.l,
            t: self.t,
            treatment_noise: self.treatment_noise,
            outcome_noise: self.outcome_noise,
            extra_confounder: self.extra_confounder,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_abs_diff_eq;

    #[test]
    fn raw_moments_match_known_values() {
        let u = NoiseSpec::Uniform { lo: -1.0, hi: 1.0 };
        assert_abs_diff_eq!(u.raw_moment(2).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u.raw_moment(4).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(u.raw_moment(3).unwrap(), 0.0, epsilon = 1e-15);

        let e = NoiseSpec::Exponential { rate: 0.1 };
        assert_abs_diff_eq!(e.raw_moment(1).unwrap(), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.raw_moment(3).unwrap(), 6000.0, epsilon = 1e-9);

        let g = NoiseSpec::Gaussian { mean: 2.0, sd: 3.0 };
        // E[(2+3N)^2] = 4 + 9 = 13; E[(2+3N)^4] = 16 + 6*4*9 + 3*81 = 475
        assert_abs_diff_eq!(g.raw_moment(2).unwrap(), 13.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.raw_moment(4).unwrap(), 475.0, epsilon = 1e-12);

        let t = NoiseSpec::StudentT { nu: 5.0 };
        assert_abs_diff_eq!(t.raw_moment(2).unwrap(), 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.raw_moment(4).unwrap(), 25.0, epsilon = 1e-12);
        assert!(t.raw_moment(5).is_err());
        assert!(t.raw_moment(6).is_err());
    }

    #[test]
    fn raw_moments_match_quadrature() {
        // Independent confirmation of the closed forms by direct integration.
        use crate::quadrature::integrate_adaptive;
        let families = [
            NoiseSpec::Uniform { lo: -2.0, hi: 2.0 },
            NoiseSpec::Exponential { rate: 0.5 },
            NoiseSpec::Gaussian { mean: 1.0, sd: 2.0 },
            NoiseSpec::StudentT { nu: 9.0 },
        ];
        for fam in families {
            for k in 1..=4u32 {
                let (lo, hi) = fam.support();
                let lo = lo.max(-300.0);
                let hi = hi.min(300.0);
                let f = |x: f64| x.powi(k as i32) * fam.density(x);
                let by_quad = integrate_adaptive(&f, lo, hi, 1e-11);
                let analytic = fam.raw_moment(k).unwrap();
                let scale = analytic.abs().max(1.0);
                assert!(
                    (by_quad - analytic).abs() / scale < 1e-8,
                    "{fam:?} moment {k}: quad {by_quad} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn student_t_density_normalizes() {
        use crate::quadrature::integrate_adaptive;
        let t = NoiseSpec::StudentT { nu: 4.5 };
        let mass = integrate_adaptive(&|x| t.density(x), -400.0, 400.0, 1e-10);
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn invalid_noise_parameters_rejected() {
        assert!(NoiseSpec::StudentT { nu: 2.0 }.validate().is_err());
        assert!(NoiseSpec::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(NoiseSpec::Exponential { rate: 0.0 }.validate().is_err());
        assert!(NoiseSpec::Gaussian { mean: 0.0, sd: 0.0 }.validate().is_err());
    }

    #[test]
    fn non_psd_sigma_rejected() {
        let mut spec = presets::table1_case(1).unwrap();
        spec.sigma[(0, 0)] = 1.5;
        match spec.validate() {
            Err(EuncError::InvalidSpec { reason }) => {
                assert!(reason.contains("eigenvalue"), "{reason}")
            }
            other => panic!("expected InvalidSpec, got {other:?}"),
        }
    }

    #[test]
    fn dag_must_be_strictly_lower() {
        let mut spec = presets::example3();
        let dag = spec.treatment_dag.as_mut().unwrap();
        dag[(0, 1)] = 1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let spec = presets::table23_case(4).unwrap();
        let text = spec.to_toml_string();
        let back = ScenarioSpec::from_toml_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn resolved_coefficients_substitute_dag() {
        // Example 3: A2 = A1 + Z2 + U + e2 resolves to Z1 + Z2 + 2U + e1 + e2.
        let spec = presets::example3();
        let coefs = spec.resolved_treatment_coefficients();
        let row: Vec<f64> = (0..coefs.ncols()).map(|k| coefs[(1, k)]).collect();
        assert_eq!(row, vec![1.0, 1.0, 2.0, 1.0, 1.0, 0.0]);
    }
}
