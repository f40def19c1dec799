//! Exact mixed moments of the observables (Z, A, Y) under a scenario.
//!
//! Every observable is a linear form over independent base components: the
//! jointly Gaussian (Z, U) block, the treatment noises, the optional extra
//! confounder W, and the outcome noise. A requested monomial expands into a
//! polynomial over base components; Gaussian blocks are handled by the
//! Isserlis pairing formula and each independent noise contributes its raw
//! moments (closed form where available, adaptive quadrature otherwise).

use nalgebra::DMatrix;
use std::collections::HashMap;

use crate::error::{EuncError, Result};
use crate::quadrature::integrate_adaptive;
use crate::scenario::{NoiseSpec, ScenarioSpec};

/// Maximum total degree of a requested monomial.
pub const MAX_DEGREE: u32 = 8;

/// An observable of the structural model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    Z(usize),
    A(usize),
    Y,
}

/// One factor of a requested monomial: a variable raised to a power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonomialTerm {
    pub var: VarRef,
    pub power: u32,
}

impl MonomialTerm {
    pub fn new(var: VarRef, power: u32) -> Self {
        MonomialTerm { var, power }
    }
}

/// Raw moment of a noise family, preferring the closed form and falling back
/// to adaptive quadrature at absolute tolerance 1e-9 when no closed form
/// exists for the requested order.
pub fn raw_moment(noise: &NoiseSpec, k: u32) -> Result<f64> {
    match noise.raw_moment(k) {
        Ok(v) => Ok(v),
        Err(err) => {
            if moment_exists(noise, k) {
                Ok(raw_moment_by_quadrature(noise, k, 1e-9))
            } else {
                Err(err)
            }
        }
    }
}

fn moment_exists(noise: &NoiseSpec, k: u32) -> bool {
    match noise {
        NoiseSpec::StudentT { nu } => f64::from(k) < *nu,
        _ => true,
    }
}

/// Direct numerical integration of E[X^k]; exposed for oracle cross-checks.
pub fn raw_moment_by_quadrature(noise: &NoiseSpec, k: u32, tol: f64) -> f64 {
    let (lo, hi) = noise.support();
    let sd = noise.variance().sqrt();
    let center = noise.mean();
    let lo = lo.max(center - 60.0 * sd).min(hi);
    let hi = hi.min(center + 60.0 * sd).max(lo);
    let f = |x: f64| x.powi(k as i32) * noise.density(x);
    integrate_adaptive(&f, lo, hi, tol)
}

/// Isserlis (Wick) moment of a zero-mean Gaussian vector: expectation of the
/// product of the components listed in `idx` (with repetition), summed over
/// perfect pairings of covariances.
fn gaussian_product_moment(idx: &[usize], cov: &DMatrix<f64>) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    for k in 1..idx.len() {
        let c = cov[(first, idx[k])];
        if c == 0.0 {
            continue;
        }
        let rest: Vec<usize> = idx[1..]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k - 1)
            .map(|(_, &v)| v)
            .collect();
        total += c * gaussian_product_moment(&rest, cov);
    }
    total
}

/// Sparse polynomial over base components, keyed by exponent vectors.
type Poly = HashMap<Vec<u8>, f64>;

fn poly_mul_linear(poly: &Poly, linear: &[f64]) -> Poly {
    let mut out: Poly = HashMap::with_capacity(poly.len() * 4);
    for (exp, &coef) in poly {
        for (k, &c) in linear.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut e = exp.clone();
            e[k] += 1;
            *out.entry(e).or_insert(0.0) += coef * c;
        }
    }
    out
}

struct BaseSystem {
    l: usize,
    t: usize,
    p: usize,
    nb: usize,
    zu_cov: DMatrix<f64>,
    /// Linear form of each observable over the base components
    /// (Z.., U.., eps_A.., W, eps_Y).
    forms: Vec<Vec<f64>>,
}

impl BaseSystem {
    fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let (l, t, p) = (spec.l, spec.t, spec.p);
        let nb = l + t + p + 2;
        // resolved_treatment_coefficients covers (Z, U, eps_A, W); widen by
        // the eps_Y slot.
        let treat = spec.resolved_treatment_coefficients();
        let mut forms: Vec<Vec<f64>> = Vec::with_capacity(l + p + 1);
        for i in 0..l {
            let mut f = vec![0.0; nb];
            f[i] = 1.0;
            forms.push(f);
        }
        for j in 0..p {
            let mut f = vec![0.0; nb];
            for k in 0..(l + t + p + 1) {
                f[k] = treat[(j, k)];
            }
            forms.push(f);
        }
        let mut y = vec![0.0; nb];
        for j in 0..p {
            for (k, slot) in y.iter_mut().enumerate().take(l + t + p + 1) {
                *slot += spec.alpha[j] * treat[(j, k)];
            }
        }
        for (k, slot) in y.iter_mut().enumerate().take(l) {
            *slot += spec.beta[k];
        }
        for (k, slot) in y.iter_mut().enumerate().skip(l).take(t) {
            *slot += spec.s[k - l];
        }
        if let Some(conf) = &spec.extra_confounder {
            y[l + t + p] += conf.loading_y;
        }
        y[nb - 1] = 1.0;
        forms.push(y);
        Ok(BaseSystem {
            l,
            t,
            p,
            nb,
            zu_cov: spec.zu_covariance(),
            forms,
        })
    }

    fn form_of(&self, var: VarRef) -> Result<&Vec<f64>> {
        let idx = match var {
            VarRef::Z(i) if i < self.l => i,
            VarRef::A(j) if j < self.p => self.l + j,
            VarRef::Y => self.l + self.p,
            other => {
                return Err(EuncError::DimensionMismatch(format!(
                    "variable {other:?} out of range"
                )))
            }
        };
        Ok(&self.forms[idx])
    }

    fn expectation(&self, spec: &ScenarioSpec, poly: &Poly) -> Result<f64> {
        let mut total = 0.0;
        for (exp, &coef) in poly {
            if coef == 0.0 {
                continue;
            }
            // Gaussian block.
            let mut idx = Vec::new();
            for (k, &e) in exp.iter().take(self.l + self.t).enumerate() {
                for _ in 0..e {
                    idx.push(k);
                }
            }
            let mut term = gaussian_product_moment(&idx, &self.zu_cov);
            if term == 0.0 {
                continue;
            }
            // Independent noises contribute raw moments.
            for j in 0..self.p {
                let e = exp[self.l + self.t + j];
                if e > 0 {
                    term *= raw_moment(&spec.treatment_noise[j], u32::from(e))?;
                }
            }
            let ew = exp[self.l + self.t + self.p];
            if ew > 0 {
                let conf = spec.extra_confounder.as_ref().ok_or_else(|| {
                    EuncError::UnsupportedMoment("extra confounder absent".into())
                })?;
                term *= raw_moment(&conf.noise, u32::from(ew))?;
            }
            let ey = exp[self.nb - 1];
            if ey > 0 {
                term *= raw_moment(&spec.outcome_noise, u32::from(ey))?;
            }
            total += coef * term;
        }
        Ok(total)
    }
}

/// Exact expectation of each requested monomial (a product of
/// (variable, power) factors) under the scenario's population law.
pub fn population_moments(spec: &ScenarioSpec, monomials: &[Vec<MonomialTerm>]) -> Result<Vec<f64>> {
    let system = BaseSystem::new(spec)?;
    monomials
        .iter()
        .map(|terms| {
            let degree: u32 = terms.iter().map(|t| t.power).sum();
            if degree > MAX_DEGREE {
                return Err(EuncError::UnsupportedMoment(format!(
                    "total degree {degree} exceeds {MAX_DEGREE}"
                )));
            }
            let mut poly: Poly = HashMap::new();
            poly.insert(vec![0u8; system.nb], 1.0);
            for term in terms {
                let form = system.form_of(term.var)?;
                for _ in 0..term.power {
                    poly = poly_mul_linear(&poly, form);
                }
            }
            system.expectation(spec, &poly)
        })
        .collect()
}

/// Convenience: E[prod of single-power variables].
pub fn population_moment(spec: &ScenarioSpec, terms: &[MonomialTerm]) -> Result<f64> {
    Ok(population_moments(spec, &[terms.to_vec()])?[0])
}

/// The linear-independence condition matrix for a two-treatment,
/// two-covariate scenario: entry (i, j) is E[w_j * g_i] with
/// w = (A1, A2, Z1, Z2) and g = (A1, A2, A1^3, A2^3). Returns the matrix
/// and its determinant; a nonzero determinant certifies that the only
/// vanishing linear combination of (A, E(Z|A)) is the trivial one.
pub fn example3_condition_matrix(spec: &ScenarioSpec) -> Result<(DMatrix<f64>, f64)> {
    if spec.p != 2 || spec.l != 2 {
        return Err(EuncError::DimensionMismatch(format!(
            "condition matrix requires p=2, l=2; got p={}, l={}",
            spec.p, spec.l
        )));
    }
    let w = [VarRef::A(0), VarRef::A(1), VarRef::Z(0), VarRef::Z(1)];
    let g = [
        (VarRef::A(0), 1),
        (VarRef::A(1), 1),
        (VarRef::A(0), 3),
        (VarRef::A(1), 3),
    ];
    let mut requests = Vec::with_capacity(16);
    for &(gv, gp) in &g {
        for &wv in &w {
            requests.push(vec![MonomialTerm::new(wv, 1), MonomialTerm::new(gv, gp)]);
        }
    }
    let values = population_moments(spec, &requests)?;
    let m = DMatrix::from_fn(4, 4, |i, j| values[i * 4 + j]);
    let det = m.determinant();
    Ok((m, det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::scenario::NoiseSpec;
    use approx::assert_abs_diff_eq;

    fn zm(i: usize, p: u32) -> MonomialTerm {
        MonomialTerm::new(VarRef::Z(i), p)
    }
    fn am(j: usize, p: u32) -> MonomialTerm {
        MonomialTerm::new(VarRef::A(j), p)
    }

    #[test]
    fn example1_ratios() {
        let spec = presets::example1();
        let vals = population_moments(
            &spec,
            &[
                vec![zm(0, 1), am(0, 1)],
                vec![am(0, 2)],
                vec![zm(0, 1), am(0, 3)],
                vec![am(0, 4)],
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(vals[0] / vals[1], 3.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2] / vals[3], 35.0 / 81.0, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_coefficients_give_zero_cross_moment() {
        let mut spec = presets::table1_case(1).unwrap();
        spec.gamma[(0, 0)] = 0.0;
        spec.lambda[(0, 0)] = 0.0;
        spec.sigma[(0, 0)] = 0.0;
        let v = population_moment(&spec, &[zm(0, 1), am(0, 1)]).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn treatment_variance_identity() {
        // var(A) = gamma^2 + lambda'lambda + 2 gamma xi'lambda + var(eps_A)
        // for the single-treatment model.
        for case in [1, 4, 6] {
            let spec = presets::table1_case(case).unwrap();
            let gamma = spec.gamma[(0, 0)];
            let lambda = spec.lambda[(0, 0)];
            let xi = spec.sigma[(0, 0)];
            let expected = gamma * gamma
                + lambda * lambda
                + 2.0 * gamma * xi * lambda
                + spec.treatment_noise[0].variance();
            let ea2 = population_moment(&spec, &[am(0, 2)]).unwrap();
            let ea = population_moment(&spec, &[am(0, 1)]).unwrap();
            assert_abs_diff_eq!(ea2 - ea * ea, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn degree_cap_enforced() {
        let spec = presets::example1();
        assert!(matches!(
            population_moment(&spec, &[am(0, 9)]),
            Err(EuncError::UnsupportedMoment(_))
        ));
    }

    #[test]
    fn student_t_missing_moment_reported() {
        let mut spec = presets::table1_case(1).unwrap();
        spec.treatment_noise = vec![NoiseSpec::StudentT { nu: 5.0 }];
        assert!(population_moment(&spec, &[am(0, 6)]).is_err());
    }

    #[test]
    fn moments_match_monte_carlo() {
        // Degree <= 4 moments agree with large-sample averages within 4 SEs.
        use crate::dgp::sample;
        use crate::rng::Seed;
        for spec in [presets::table1_case(4).unwrap(), presets::example3()] {
            let n = 200_000;
            let d = sample(&spec, n, Seed(31)).unwrap();
            let requests: Vec<Vec<MonomialTerm>> = vec![
                vec![zm(0, 1), am(0, 1)],
                vec![am(0, 2)],
                vec![am(0, 4)],
                vec![zm(0, 1), am(0, 3)],
                vec![am(0, 1), MonomialTerm::new(VarRef::Y, 1)],
            ];
            let expected = population_moments(&spec, &requests).unwrap();
            let eval = |terms: &[MonomialTerm], i: usize| -> f64 {
                terms
                    .iter()
                    .map(|t| {
                        let v = match t.var {
                            VarRef::Z(k) => d.z()[(i, k)],
                            VarRef::A(k) => d.a()[(i, k)],
                            VarRef::Y => d.y()[i],
                        };
                        v.powi(t.power as i32)
                    })
                    .product()
            };
            for (req, want) in requests.iter().zip(&expected) {
                let vals: Vec<f64> = (0..n).map(|i| eval(req, i)).collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let se = (var / n as f64).sqrt();
                assert!(
                    (mean - want).abs() < 4.0 * se.max(1e-12),
                    "{}: monomial {req:?}: mc {mean} vs exact {want} (se {se})",
                    spec.name
                );
            }
        }
    }

    #[test]
    fn example3_matrix_values() {
        // Exact condition matrix of the two-treatment uniform-noise example,
        // cross-checked against independent rational arithmetic and Monte
        // Carlo (40M draws) during development.
        let spec = presets::example3();
        let (m, det) = example3_condition_matrix(&spec).unwrap();
        let expected = [
            [7.0 / 3.0, 10.0 / 3.0, 1.0, 0.0],
            [10.0 / 3.0, 23.0 / 3.0, 1.0, 1.0],
            [81.0 / 5.0, 116.0 / 5.0, 7.0, 0.0],
            [1148.0 / 15.0, 2611.0 / 15.0, 23.0, 23.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(m[(i, j)], expected[i][j], epsilon = 1e-9);
            }
        }
        assert_abs_diff_eq!(det, 64.0 / 225.0, epsilon = 1e-9);
        assert!(det.abs() > 1e-6, "unique zero solution requires det != 0");
    }

    #[test]
    fn near_copy_treatment_gives_singular_matrix() {
        // A2 an (almost) exact copy of A1 collapses the column space.
        let mut spec = presets::example3();
        spec.gamma[(1, 1)] = 0.0;
        spec.lambda[(1, 0)] = 0.0;
        spec.treatment_noise[1] = NoiseSpec::Uniform {
            lo: -1e-6,
            hi: 1e-6,
        };
        let (_, det) = example3_condition_matrix(&spec).unwrap();
        assert!(det.abs() < 1e-6, "det {det}");
    }

    #[test]
    fn wrong_shape_rejected() {
        let spec = presets::table1_case(1).unwrap();
        assert!(matches!(
            example3_condition_matrix(&spec),
            Err(EuncError::DimensionMismatch(_))
        ));
    }
}
