//! Sampling synthetic datasets from the structural model.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::rng::Seed;
use crate::scenario::ScenarioSpec;

/// Draw an n-row dataset from the scenario. (Z, U) are jointly Gaussian with
/// unit variances and cross-covariance sigma; treatments are built as
/// Gamma Z + Lambda U + eps_A with within-treatment coefficients applied in
/// index order and optional extra-confounder loadings; the outcome adds its
/// structural terms. The latent U and W never appear in the returned
/// dataset. Identical (spec, n, seed) produce bit-identical output.
pub fn sample(spec: &ScenarioSpec, n: usize, seed: Seed) -> Result<Dataset> {
    spec.validate()?;
    if n < 2 {
        return Err(crate::error::EuncError::Precondition(format!(
            "need n >= 2, got {n}"
        )));
    }
    let mut rng = seed.rng();
    let l = spec.l;
    let p = spec.p;
    let t = spec.t;
    let factor = spec.zu_factor()?;

    let mut z = DMatrix::zeros(n, l);
    let mut a = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);

    let mut raw = DVector::zeros(l + t);
    let mut a_row = vec![0.0; p];
    for i in 0..n {
        // Fixed draw order per row: (Z,U) normals, then treatment noises,
        // then W, then the outcome noise.
        for k in 0..(l + t) {
            raw[k] = StandardNormal.sample(&mut rng);
        }
        let zu = &factor * &raw;
        let eps_a: Vec<f64> = spec
            .treatment_noise
            .iter()
            .map(|ns| ns.sample(&mut rng))
            .collect();
        let w = spec
            .extra_confounder
            .as_ref()
            .map(|c| c.noise.sample(&mut rng));
        let eps_y = spec.outcome_noise.sample(&mut rng);

        for j in 0..p {
            let mut v = eps_a[j];
            for k in 0..l {
                v += spec.gamma[(j, k)] * zu[k];
            }
            for k in 0..t {
                v += spec.lambda[(j, k)] * zu[l + k];
            }
            if let (Some(conf), Some(wv)) = (&spec.extra_confounder, w) {
                v += conf.loadings_a[j] * wv;
            }
            if let Some(dag) = &spec.treatment_dag {
                for k in 0..j {
                    v += dag[(j, k)] * a_row[k];
                }
            }
            a_row[j] = v;
        }

        let mut yv = eps_y;
        for (j, &av) in a_row.iter().enumerate() {
            yv += spec.alpha[j] * av;
        }
        for k in 0..l {
            yv += spec.beta[k] * zu[k];
        }
        for k in 0..t {
            yv += spec.s[k] * zu[l + k];
        }
        if let (Some(conf), Some(wv)) = (&spec.extra_confounder, w) {
            yv += conf.loading_y * wv;
        }

        for k in 0..l {
            z[(i, k)] = zu[k];
        }
        for j in 0..p {
            a[(i, j)] = a_row[j];
        }
        y[i] = yv;
    }

    Dataset::new(z, a, y, None)
}
