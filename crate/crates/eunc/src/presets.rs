//! Built-in scenarios: the seven single-treatment benchmark cases, the nine
//! two-treatment cases, the analytic examples, and the sensitivity bases.

use nalgebra::{DMatrix, DVector};

use crate::error::{EuncError, Result};
use crate::scenario::{ExtraConfounder, NoiseSpec, ScenarioSpec};

fn exp_noise() -> NoiseSpec {
    NoiseSpec::Exponential { rate: 0.1 }
}

fn std_normal() -> NoiseSpec {
    NoiseSpec::Gaussian { mean: 0.0, sd: 1.0 }
}

/// Single-treatment benchmark case k in 1..=7. All cases share alpha = 1,
/// lambda = s = 0.5, eps_A ~ Exp(0.1), eps_Y ~ N(0,1); the (gamma, beta, xi)
/// triple encodes which edges are present (weak edge = 0.01).
pub fn table1_case(k: usize) -> Result<ScenarioSpec> {
    let (gamma, beta, xi) = match k {
        1 => (1.0, 0.0, 0.0),
        2 => (0.01, 0.0, 0.0),
        3 => (1.0, 1.0, 0.0),
        4 => (1.0, 0.0, 0.5),
        5 => (1.0, 1.0, 0.5),
        6 => (0.0, 0.0, 0.5),
        7 => (0.0, 1.0, 0.5),
        _ => {
            return Err(EuncError::Config(format!(
                "single-treatment case must be 1..=7, got {k}"
            )))
        }
    };
    Ok(single_treatment(
        &format!("table1_case{k}"),
        gamma,
        beta,
        xi,
        exp_noise(),
    ))
}

/// Single-treatment scenario with the shared alpha/lambda/s values.
pub fn single_treatment(
    name: &str,
    gamma: f64,
    beta: f64,
    xi: f64,
    treatment_noise: NoiseSpec,
) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        p: 1,
        l: 1,
        t: 1,
        gamma: DMatrix::from_element(1, 1, gamma),
        lambda: DMatrix::from_element(1, 1, 0.5),
        sigma: DMatrix::from_element(1, 1, xi),
        alpha: DVector::from_element(1, 1.0),
        beta: DVector::from_element(1, beta),
        s: DVector::from_element(1, 0.5),
        treatment_noise: vec![treatment_noise],
        outcome_noise: std_normal(),
        extra_confounder: None,
        treatment_dag: None,
    }
}

/// Two-treatment benchmark case k in 1..=9: p = 2, l = 2, a scalar latent
/// confounder, Lambda = (0.5, 0.5)', s = 0.5, alpha = (1, 1)', a unit
/// A1 -> A2 coefficient, and eps_{A1}, eps_{A2} ~ Exp(0.1). Gamma is
/// diagonal (Z1 -> A1, Z2 -> A2) with weak edges at 0.01.
pub fn table23_case(k: usize) -> Result<ScenarioSpec> {
    let (g1, g2, b1, b2, xi) = match k {
        1 => (1.0, 1.0, 0.0, 0.0, 0.0),
        2 => (0.01, 1.0, 0.0, 0.0, 0.0),
        3 => (0.01, 0.01, 0.0, 0.0, 0.0),
        4 => (1.0, 1.0, 1.0, 0.0, 0.0),
        5 => (1.0, 1.0, 1.0, 1.0, 0.0),
        6 => (0.01, 1.0, 1.0, 1.0, 0.0),
        7 => (0.01, 0.01, 1.0, 1.0, 0.0),
        8 => (0.0, 0.0, 0.0, 0.0, 0.5),
        9 => (0.0, 0.0, 1.0, 1.0, 0.5),
        _ => {
            return Err(EuncError::Config(format!(
                "two-treatment case must be 1..=9, got {k}"
            )))
        }
    };
    Ok(ScenarioSpec {
        name: format!("table23_case{k}"),
        p: 2,
        l: 2,
        t: 1,
        gamma: DMatrix::from_row_slice(2, 2, &[g1, 0.0, 0.0, g2]),
        lambda: DMatrix::from_row_slice(2, 1, &[0.5, 0.5]),
        sigma: DMatrix::from_row_slice(2, 1, &[xi, xi]),
        alpha: DVector::from_vec(vec![1.0, 1.0]),
        beta: DVector::from_vec(vec![b1, b2]),
        s: DVector::from_element(1, 0.5),
        treatment_noise: vec![exp_noise(), exp_noise()],
        outcome_noise: std_normal(),
        extra_confounder: None,
        treatment_dag: Some(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])),
    })
}

/// The analytic single-treatment example: Z, U standard normal and
/// independent, eps_A ~ U(-1, 1), gamma = lambda = 1.
pub fn example1() -> ScenarioSpec {
    ScenarioSpec {
        name: "example1".to_string(),
        p: 1,
        l: 1,
        t: 1,
        gamma: DMatrix::from_element(1, 1, 1.0),
        lambda: DMatrix::from_element(1, 1, 1.0),
        sigma: DMatrix::from_element(1, 1, 0.0),
        alpha: DVector::from_element(1, 1.0),
        beta: DVector::from_element(1, 1.0),
        s: DVector::from_element(1, 1.0),
        treatment_noise: vec![NoiseSpec::Uniform { lo: -1.0, hi: 1.0 }],
        outcome_noise: std_normal(),
        extra_confounder: None,
        treatment_dag: None,
    }
}

/// The analytic two-treatment example: A1 = Z1 + U + e1 with e1 ~ U(-1,1),
/// A2 = A1 + Z2 + U + e2 with e2 ~ U(-2,2).
pub fn example3() -> ScenarioSpec {
    ScenarioSpec {
        name: "example3".to_string(),
        p: 2,
        l: 2,
        t: 1,
        gamma: DMatrix::identity(2, 2),
        lambda: DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
        sigma: DMatrix::zeros(2, 1),
        alpha: DVector::from_vec(vec![1.0, 1.0]),
        beta: DVector::from_vec(vec![1.0, 1.0]),
        s: DVector::from_element(1, 1.0),
        treatment_noise: vec![
            NoiseSpec::Uniform { lo: -1.0, hi: 1.0 },
            NoiseSpec::Uniform { lo: -2.0, hi: 2.0 },
        ],
        outcome_noise: std_normal(),
        extra_confounder: None,
        treatment_dag: Some(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])),
    }
}

/// Sensitivity base with Student-t treatment noise (all unit edges,
/// lambda = s = 0.5); `xi` toggles the U-Z dependence.
pub fn sensitivity_student_eps_a(nu: f64, xi: f64) -> ScenarioSpec {
    let mut spec = single_treatment(
        &format!("sens_epsA_t{nu}_xi{xi}"),
        1.0,
        1.0,
        xi,
        NoiseSpec::StudentT { nu },
    );
    spec.name = spec.name.replace('.', "_");
    spec
}

/// Sensitivity base with exponential treatment noise plus an additional
/// Student-t confounder W loading 0.5 on the treatment and the outcome.
pub fn sensitivity_extra_confounder(nu: f64, xi: f64) -> ScenarioSpec {
    let mut spec = single_treatment(
        &format!("sens_W_t{nu}_xi{xi}"),
        1.0,
        1.0,
        xi,
        exp_noise(),
    );
    spec.extra_confounder = Some(ExtraConfounder {
        noise: NoiseSpec::StudentT { nu },
        loadings_a: vec![0.5],
        loading_y: 0.5,
    });
    spec.name = spec.name.replace('.', "_");
    spec
}

/// Case 1 with Gaussian treatment noise: the identification assumption is
/// violated by construction and the pipeline is expected to FAIL.
pub fn gaussian_noise_case1() -> ScenarioSpec {
    single_treatment("case1_gaussian_epsA", 1.0, 0.0, 0.0, std_normal())
}

/// All built-in scenarios by name.
pub fn by_name(name: &str) -> Result<ScenarioSpec> {
    if let Some(k) = name.strip_prefix("table1_case") {
        if let Ok(k) = k.parse() {
            return table1_case(k);
        }
    }
    if let Some(k) = name.strip_prefix("table23_case") {
        if let Ok(k) = k.parse() {
            return table23_case(k);
        }
    }
    match name {
        "example1" => Ok(example1()),
        "example3" => Ok(example3()),
        "case1_gaussian_epsA" => Ok(gaussian_noise_case1()),
        _ => Err(EuncError::Config(format!("unknown scenario {name:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for k in 1..=7 {
            table1_case(k).unwrap().validate().unwrap();
        }
        for k in 1..=9 {
            table23_case(k).unwrap().validate().unwrap();
        }
        example1().validate().unwrap();
        example3().validate().unwrap();
        gaussian_noise_case1().validate().unwrap();
        sensitivity_student_eps_a(5.0, 0.5).validate().unwrap();
        sensitivity_extra_confounder(5.0, 0.0).validate().unwrap();
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(by_name("table1_case4").unwrap().name, "table1_case4");
        assert_eq!(by_name("table23_case9").unwrap().name, "table23_case9");
        assert!(by_name("table1_case8").is_err());
        assert!(by_name("nope").is_err());
    }
}
