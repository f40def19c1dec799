//! Pluggable nonparametric estimation of the vector conditional expectation
//! E(Z|A), the first stage of the estimator.

mod boost;
mod kernel;
mod oracle;
mod sieve;

pub use boost::BoostConfig;
pub use kernel::{local_linear_weights, nw_weights};
pub use oracle::{oracle_condexp, oracle_condexp_many, posterior_mean};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EuncError, Result};
use crate::rng::Seed;

/// Minimum sample size for fitting.
pub const MIN_FIT_SAMPLES: usize = 20;

/// Dimension guard for kernel smoothers.
pub const MAX_KERNEL_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondExpMethod {
    KernelNw,
    LocalLinear,
    SievePoly,
    BoostedStumps,
}

impl CondExpMethod {
    pub fn label(self) -> &'static str {
        match self {
            CondExpMethod::KernelNw => "kernel_nw",
            CondExpMethod::LocalLinear => "local_linear",
            CondExpMethod::SievePoly => "sieve_poly",
            CondExpMethod::BoostedStumps => "boosted_stumps",
        }
    }
}

/// First-stage configuration. The bandwidth grid is expressed as factors c
/// in h = c * sd(A_j) * n^{-1/(4+p)}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondExpConfig {
    pub method: CondExpMethod,
    /// Total polynomial degree of the sieve basis.
    pub degree: usize,
    /// Ridge added to the sieve Gram matrix.
    pub ridge: f64,
    pub bandwidth_grid: Vec<f64>,
    pub cv_folds: usize,
    pub seed: u64,
    pub boosting: BoostConfig,
}

impl Default for CondExpConfig {
    fn default() -> Self {
        CondExpConfig {
            method: CondExpMethod::SievePoly,
            degree: 5,
            ridge: 1e-8,
            bandwidth_grid: vec![0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            cv_folds: 5,
            seed: 0,
            boosting: BoostConfig::default(),
        }
    }
}

/// Fit summary carried by the model.
#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub in_sample_mse: f64,
    pub cv_mse: Option<f64>,
    pub bandwidths: Option<Vec<f64>>,
    pub boost_rounds: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum FittedState {
    Kernel {
        /// Training inputs (n x p) and targets (n x l).
        a: DMatrix<f64>,
        z: DMatrix<f64>,
        bandwidths: Vec<f64>,
        /// Componentwise training range used by the clamping policy.
        lo: Vec<f64>,
        hi: Vec<f64>,
        local_linear: bool,
    },
    Sieve(sieve::SieveFit),
    Boost(Vec<boost::BoostedModel>),
}

/// A fitted vector-valued regressor for E(Z|A). Prediction is
/// deterministic; queries outside the training range are clamped
/// componentwise to it for the kernel smoothers and evaluated directly for
/// the sieve and boosting.
#[derive(Debug, Clone)]
pub struct CondExpModel {
    method: CondExpMethod,
    input_dim: usize,
    output_dim: usize,
    state: FittedState,
    pub fit_diagnostics: FitDiagnostics,
}

impl CondExpModel {
    pub fn method(&self) -> CondExpMethod {
        self.method
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Evaluate the fitted conditional expectation at each query row.
    pub fn predict(&self, a_query: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(
            a_query.ncols(),
            self.input_dim,
            "query dimension must match the fitted input dimension"
        );
        match &self.state {
            FittedState::Kernel {
                a,
                z,
                bandwidths,
                lo,
                hi,
                local_linear,
            } => {
                let mut out = DMatrix::zeros(a_query.nrows(), self.output_dim);
                let mut q = vec![0.0; self.input_dim];
                for i in 0..a_query.nrows() {
                    for j in 0..self.input_dim {
                        q[j] = a_query[(i, j)].clamp(lo[j], hi[j]);
                    }
                    let w = if *local_linear {
                        kernel::local_linear_weights(a, bandwidths, &q)
                    } else {
                        kernel::nw_weights(a, bandwidths, &q)
                    };
                    for k in 0..self.output_dim {
                        let mut acc = 0.0;
                        for (r, &wr) in w.iter().enumerate() {
                            acc += wr * z[(r, k)];
                        }
                        out[(i, k)] = acc;
                    }
                }
                out
            }
            FittedState::Sieve(fit) => fit.predict(a_query),
            FittedState::Boost(models) => {
                let mut out = DMatrix::zeros(a_query.nrows(), self.output_dim);
                for (k, model) in models.iter().enumerate() {
                    let col = model.predict(a_query);
                    for i in 0..a_query.nrows() {
                        out[(i, k)] = col[i];
                    }
                }
                out
            }
        }
    }
}

/// Fit one model per output dimension with shared hyperparameters.
pub fn fit(a: &DMatrix<f64>, z: &DMatrix<f64>, cfg: &CondExpConfig) -> Result<CondExpModel> {
    let n = a.nrows();
    if n < MIN_FIT_SAMPLES {
        return Err(EuncError::TooFewSamples {
            min: MIN_FIT_SAMPLES,
            got: n,
        });
    }
    if z.nrows() != n {
        return Err(EuncError::DimensionMismatch(
            "a and z must have the same number of rows".into(),
        ));
    }
    let p = a.ncols();
    let l = z.ncols();
    match cfg.method {
        CondExpMethod::KernelNw | CondExpMethod::LocalLinear => {
            if p > MAX_KERNEL_DIM {
                return Err(EuncError::Precondition(format!(
                    "kernel smoothers support p <= {MAX_KERNEL_DIM}, got {p}"
                )));
            }
            let local_linear = cfg.method == CondExpMethod::LocalLinear;
            let (bandwidths, cv_mse) = select_bandwidth(a, z, cfg, local_linear)?;
            let lo: Vec<f64> = (0..p).map(|j| a.column(j).min()).collect();
            let hi: Vec<f64> = (0..p).map(|j| a.column(j).max()).collect();
            let mut model = CondExpModel {
                method: cfg.method,
                input_dim: p,
                output_dim: l,
                state: FittedState::Kernel {
                    a: a.clone(),
                    z: z.clone(),
                    bandwidths: bandwidths.clone(),
                    lo,
                    hi,
                    local_linear,
                },
                fit_diagnostics: FitDiagnostics {
                    in_sample_mse: 0.0,
                    cv_mse: Some(cv_mse),
                    bandwidths: Some(bandwidths),
                    boost_rounds: None,
                },
            };
            model.fit_diagnostics.in_sample_mse = in_sample_mse(&model, a, z);
            Ok(model)
        }
        CondExpMethod::SievePoly => {
            let fit = sieve::fit_sieve(a, z, cfg.degree, cfg.ridge)?;
            let mut model = CondExpModel {
                method: cfg.method,
                input_dim: p,
                output_dim: l,
                state: FittedState::Sieve(fit),
                fit_diagnostics: FitDiagnostics {
                    in_sample_mse: 0.0,
                    cv_mse: None,
                    bandwidths: None,
                    boost_rounds: None,
                },
            };
            model.fit_diagnostics.in_sample_mse = in_sample_mse(&model, a, z);
            Ok(model)
        }
        CondExpMethod::BoostedStumps => {
            let models: Vec<boost::BoostedModel> = (0..l)
                .map(|k| {
                    let target: Vec<f64> = z.column(k).iter().copied().collect();
                    boost::fit_boosted(a, &target, &cfg.boosting, Seed(cfg.seed).derive(k as u64))
                })
                .collect();
            let rounds = models.iter().map(|m| m.rounds()).collect();
            let mut model = CondExpModel {
                method: cfg.method,
                input_dim: p,
                output_dim: l,
                state: FittedState::Boost(models),
                fit_diagnostics: FitDiagnostics {
                    in_sample_mse: 0.0,
                    cv_mse: None,
                    bandwidths: None,
                    boost_rounds: Some(rounds),
                },
            };
            model.fit_diagnostics.in_sample_mse = in_sample_mse(&model, a, z);
            Ok(model)
        }
    }
}

fn in_sample_mse(model: &CondExpModel, a: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let pred = model.predict(a);
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..z.ncols() {
            acc += (pred[(i, k)] - z[(i, k)]).powi(2);
        }
    }
    acc / (a.nrows() * z.ncols()) as f64
}

/// Reference bandwidth h0_j = sd(A_j) * n^{-1/(4+p)}.
pub fn reference_bandwidths(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows() as f64;
    let p = a.ncols();
    let sds = crate::linalg::column_sds(a);
    (0..p)
        .map(|j| sds[j].max(1e-12) * n.powf(-1.0 / (4.0 + p as f64)))
        .collect()
}

/// The seeded-shuffle fold partition used by cross-validation: `n` indices
/// shuffled deterministically and split into `folds` contiguous chunks.
pub fn cv_fold_indices(n: usize, folds: usize, seed: Seed) -> Vec<Vec<usize>> {
    let folds = folds.max(2).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed.derive(0x62_77).rng();
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    (0..folds)
        .map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect()
}

/// Cross-validated mean squared prediction error of the kernel smoother at
/// the given bandwidths over the seeded fold partition.
pub fn cv_mse_for_bandwidth(
    a: &DMatrix<f64>,
    z: &DMatrix<f64>,
    h: &[f64],
    folds: &[Vec<usize>],
    local_linear: bool,
) -> f64 {
    let n = a.nrows();
    let mut sse = 0.0;
    let mut count = 0usize;
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        if train_idx.is_empty() || test_idx.is_empty() {
            continue;
        }
        let a_train = DMatrix::from_fn(train_idx.len(), a.ncols(), |i, j| a[(train_idx[i], j)]);
        let z_train = DMatrix::from_fn(train_idx.len(), z.ncols(), |i, j| z[(train_idx[i], j)]);
        let mut q = vec![0.0; a.ncols()];
        for &ti in test_idx {
            for j in 0..a.ncols() {
                q[j] = a[(ti, j)];
            }
            let w = if local_linear {
                kernel::local_linear_weights(&a_train, h, &q)
            } else {
                kernel::nw_weights(&a_train, h, &q)
            };
            for k in 0..z.ncols() {
                let mut pred = 0.0;
                for (r, &wr) in w.iter().enumerate() {
                    pred += wr * z_train[(r, k)];
                }
                sse += (pred - z[(ti, k)]).powi(2);
                count += 1;
            }
        }
    }
    let _ = n;
    sse / count.max(1) as f64
}

/// 5-fold cross-validated bandwidth selection over the factor grid, folds
/// formed by a seeded shuffle. Returns the per-dimension bandwidths and the
/// winning CV mean squared error. Ties prefer the larger bandwidth.
pub fn select_bandwidth(
    a: &DMatrix<f64>,
    z: &DMatrix<f64>,
    cfg: &CondExpConfig,
    local_linear: bool,
) -> Result<(Vec<f64>, f64)> {
    if cfg.bandwidth_grid.is_empty() {
        return Err(EuncError::Precondition("bandwidth grid is empty".into()));
    }
    let n = a.nrows();
    let base = reference_bandwidths(a);
    let folds = cv_fold_indices(n, cfg.cv_folds, Seed(cfg.seed));

    let mut best: Option<(f64, f64)> = None; // (factor, cv mse)
    for &factor in &cfg.bandwidth_grid {
        let h: Vec<f64> = base.iter().map(|b| b * factor).collect();
        let mse = cv_mse_for_bandwidth(a, z, &h, &folds, local_linear);
        let better = match best {
            None => true,
            // strictly better, or equal within fp noise and larger h
            Some((bf, bm)) => mse < bm - 1e-15 || (mse <= bm + 1e-15 && factor > bf),
        };
        if better {
            best = Some((factor, mse));
        }
    }
    let (factor, mse) = best.expect("grid nonempty");
    Ok((base.iter().map(|b| b * factor).collect(), mse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn linear_data(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = DMatrix::from_fn(n, 1, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64);
        let z = a.map(|v| 2.0 * v);
        (a, z)
    }

    #[test]
    fn all_methods_recover_noiseless_linear_target() {
        let (a, z) = linear_data(2000);
        let q = DMatrix::from_row_slice(3, 1, &[-0.5, 0.1, 0.7]);
        for (method, tol) in [
            (CondExpMethod::SievePoly, 1e-6),
            (CondExpMethod::KernelNw, 0.05),
            (CondExpMethod::LocalLinear, 0.05),
            (CondExpMethod::BoostedStumps, 0.05),
        ] {
            let cfg = CondExpConfig {
                method,
                ..CondExpConfig::default()
            };
            let model = fit(&a, &z, &cfg).unwrap();
            let pred = model.predict(&q);
            for i in 0..q.nrows() {
                assert!(
                    (pred[(i, 0)] - 2.0 * q[(i, 0)]).abs() < tol,
                    "{method:?} at {}: {} vs {}",
                    q[(i, 0)],
                    pred[(i, 0)],
                    2.0 * q[(i, 0)]
                );
            }
        }
    }

    #[test]
    fn pure_noise_target_predicts_mean() {
        let n = 400;
        let mut rng = Seed(3).rng();
        let a = DMatrix::from_fn(n, 1, |_, _| rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0);
        let z = DMatrix::from_fn(n, 1, |_, _| rand::Rng::gen::<f64>(&mut rng) - 0.5);
        let zbar = z.column(0).mean();
        let cfg = CondExpConfig {
            method: CondExpMethod::KernelNw,
            ..CondExpConfig::default()
        };
        let model = fit(&a, &z, &cfg).unwrap();
        let pred = model.predict(&DMatrix::from_element(1, 1, 0.3));
        assert!((pred[(0, 0)] - zbar).abs() < 0.08, "{} vs {zbar}", pred[(0, 0)]);
    }

    /// Test-local exhaustive CV oracle: independent Gaussian-kernel
    /// smoother evaluated over the published fold partition.
    fn exhaustive_cv_oracle(
        a: &DMatrix<f64>,
        z: &DMatrix<f64>,
        grid: &[f64],
        seed: u64,
    ) -> (f64, Vec<f64>) {
        let folds = cv_fold_indices(a.nrows(), 5, Seed(seed));
        let base = reference_bandwidths(a);
        let mut losses = Vec::new();
        for &factor in grid {
            let h = base[0] * factor;
            let mut sse = 0.0;
            let mut count = 0usize;
            for (f, test_idx) in folds.iter().enumerate() {
                let train: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| *g != f)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();
                for &ti in test_idx {
                    let q = a[(ti, 0)];
                    let mut wsum = 0.0;
                    let mut acc = 0.0;
                    for &tr in &train {
                        let w = (-0.5 * ((a[(tr, 0)] - q) / h).powi(2)).exp();
                        wsum += w;
                        acc += w * z[(tr, 0)];
                    }
                    if wsum > 0.0 {
                        sse += (acc / wsum - z[(ti, 0)]).powi(2);
                        count += 1;
                    }
                }
            }
            losses.push(sse / count as f64);
        }
        // argmin with ties resolved toward the larger factor
        let mut best = 0usize;
        for (i, &l) in losses.iter().enumerate() {
            if l < losses[best] - 1e-15 || (l <= losses[best] + 1e-15 && grid[i] > grid[best]) {
                best = i;
            }
        }
        (grid[best], losses)
    }

    #[test]
    fn bandwidth_selection_matches_exhaustive_cv() {
        // On a noiseless linear target and on pure noise, the selected
        // bandwidth is the argmin of the independently recomputed CV loss.
        let n = 200;
        let mut rng = Seed(41).rng();
        let a = DMatrix::from_fn(n, 1, |_, _| rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0);
        let targets = [
            a.map(|v| 2.0 * v),
            DMatrix::from_fn(n, 1, |_, _| rand::Rng::gen::<f64>(&mut rng) - 0.5),
        ];
        for z in targets {
            let cfg = CondExpConfig::default();
            let (h, _) = select_bandwidth(&a, &z, &cfg, false).unwrap();
            let (oracle_factor, losses) =
                exhaustive_cv_oracle(&a, &z, &cfg.bandwidth_grid, cfg.seed);
            let base = reference_bandwidths(&a);
            assert!(
                (h[0] / base[0] - oracle_factor).abs() < 1e-12,
                "selected {} vs oracle {oracle_factor} (losses {losses:?})",
                h[0] / base[0]
            );
        }
    }

    #[test]
    fn exactly_constant_target_ties_to_largest_bandwidth() {
        // A constant target gives zero CV loss everywhere; the tie-break
        // prefers maximal smoothing.
        let n = 100;
        let a = DMatrix::from_fn(n, 1, |i, _| i as f64 / n as f64);
        let z = DMatrix::from_element(n, 1, 0.7);
        let cfg = CondExpConfig::default();
        let (h, mse) = select_bandwidth(&a, &z, &cfg, false).unwrap();
        let base = reference_bandwidths(&a);
        assert!((h[0] / base[0] - 3.0).abs() < 1e-12, "selected {h:?}");
        assert!(mse < 1e-25);
    }

    #[test]
    fn local_linear_ties_to_largest_bandwidth_on_linear_target() {
        // The local-linear smoother reproduces linear targets at any
        // bandwidth, so every factor ties at (numerically) zero CV loss.
        let n = 200;
        let mut rng = Seed(42).rng();
        let a = DMatrix::from_fn(n, 1, |_, _| rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0);
        let z = a.map(|v| 2.0 * v);
        let cfg = CondExpConfig::default();
        let (h, mse) = select_bandwidth(&a, &z, &cfg, true).unwrap();
        let base = reference_bandwidths(&a);
        assert!(mse < 1e-12, "cv mse {mse}");
        assert!((h[0] / base[0] - 3.0).abs() < 1e-12, "selected {h:?}");
    }

    #[test]
    fn step_target_selects_small_bandwidth() {
        let n = 200;
        let mut rng = Seed(43).rng();
        let a = DMatrix::from_fn(n, 1, |_, _| rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0);
        let z = a.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let cfg = CondExpConfig::default();
        let (h, _) = select_bandwidth(&a, &z, &cfg, false).unwrap();
        let sd_a = crate::linalg::column_sds(&a)[0];
        assert!(h[0] < sd_a, "h {} vs sd {sd_a}", h[0]);
        let (oracle_factor, _) = exhaustive_cv_oracle(&a, &z, &cfg.bandwidth_grid, cfg.seed);
        let base = reference_bandwidths(&a);
        assert!((h[0] / base[0] - oracle_factor).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_rejected() {
        let (a, z) = linear_data(10);
        assert!(matches!(
            fit(&a, &z, &CondExpConfig::default()),
            Err(EuncError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn kernel_dimension_guard() {
        let n = 40;
        let a = DMatrix::from_fn(n, 6, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let z = DMatrix::from_fn(n, 1, |i, _| i as f64);
        let cfg = CondExpConfig {
            method: CondExpMethod::KernelNw,
            ..CondExpConfig::default()
        };
        assert!(matches!(
            fit(&a, &z, &cfg),
            Err(EuncError::Precondition(_))
        ));
    }

    #[test]
    fn predictions_deterministic() {
        let (a, mut z) = linear_data(200);
        let mut rng = Seed(5).rng();
        for v in z.iter_mut() {
            *v += rand::Rng::gen::<f64>(&mut rng) * 0.1;
        }
        let cfg = CondExpConfig {
            method: CondExpMethod::BoostedStumps,
            ..CondExpConfig::default()
        };
        let m1 = fit(&a, &z, &cfg).unwrap();
        let m2 = fit(&a, &z, &cfg).unwrap();
        let q = DMatrix::from_row_slice(2, 1, &[0.2, -0.4]);
        assert_eq!(m1.predict(&q), m2.predict(&q));
    }
}

