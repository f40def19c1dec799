//! Gradient boosting with depth-1 regression trees (stumps) and squared
//! loss, early-stopped on a holdout split.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::Seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostConfig {
    pub shrinkage: f64,
    pub subsample: f64,
    pub max_rounds: usize,
    /// Rounds without holdout improvement before stopping.
    pub patience: usize,
    /// Fraction held out for early stopping.
    pub holdout: f64,
    /// Candidate split thresholds per feature (training-quantile grid).
    pub max_thresholds: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            shrinkage: 0.1,
            subsample: 0.8,
            max_rounds: 2000,
            patience: 25,
            holdout: 0.2,
            max_thresholds: 64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Stump {
    feature: usize,
    threshold: f64,
    left_value: f64,
    right_value: f64,
}

impl Stump {
    fn eval(&self, row: &DMatrix<f64>, i: usize) -> f64 {
        if row[(i, self.feature)] <= self.threshold {
            self.left_value
        } else {
            self.right_value
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoostedModel {
    init: f64,
    shrinkage: f64,
    stumps: Vec<Stump>,
}

impl BoostedModel {
    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub fn predict(&self, a: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![self.init; a.nrows()];
        for stump in &self.stumps {
            for (i, v) in out.iter_mut().enumerate() {
                *v += self.shrinkage * stump.eval(a, i);
            }
        }
        out
    }
}

fn quantile_thresholds(values: &mut Vec<f64>, max: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() <= 1 {
        return Vec::new();
    }
    if values.len() <= max {
        return values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    (1..=max)
        .map(|q| {
            let idx = q * (values.len() - 1) / (max + 1);
            0.5 * (values[idx] + values[idx + 1].min(values[values.len() - 1]))
        })
        .collect()
}

/// Best stump for the residuals over the subsample rows, by exhaustive
/// threshold scan per feature.
fn fit_stump(
    a: &DMatrix<f64>,
    residual: &[f64],
    rows: &[usize],
    thresholds: &[Vec<f64>],
) -> Option<Stump> {
    let mut best: Option<(f64, Stump)> = None;
    for feature in 0..a.ncols() {
        for &thr in &thresholds[feature] {
            let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
            for &i in rows {
                if a[(i, feature)] <= thr {
                    ls += residual[i];
                    ln += 1;
                } else {
                    rs += residual[i];
                    rn += 1;
                }
            }
            if ln == 0 || rn == 0 {
                continue;
            }
            let lv = ls / ln as f64;
            let rv = rs / rn as f64;
            // SSE reduction relative to the zero stump.
            let gain = lv * ls + rv * rs;
            if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((
                    gain,
                    Stump {
                        feature,
                        threshold: thr,
                        left_value: lv,
                        right_value: rv,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

pub fn fit_boosted(a: &DMatrix<f64>, z: &[f64], cfg: &BoostConfig, seed: Seed) -> BoostedModel {
    let n = a.nrows();
    let mut rng = seed.rng();

    // Seeded shuffle, then split off the holdout.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_holdout = ((n as f64 * cfg.holdout) as usize).clamp(1, n - 1);
    let holdout: Vec<usize> = order[..n_holdout].to_vec();
    let train: Vec<usize> = order[n_holdout..].to_vec();

    let init = train.iter().map(|&i| z[i]).sum::<f64>() / train.len() as f64;

    let thresholds: Vec<Vec<f64>> = (0..a.ncols())
        .map(|j| {
            let mut vals: Vec<f64> = train.iter().map(|&i| a[(i, j)]).collect();
            quantile_thresholds(&mut vals, cfg.max_thresholds)
        })
        .collect();

    let mut fitted = vec![init; n];
    let mut residual: Vec<f64> = (0..n).map(|i| z[i] - fitted[i]).collect();
    let mut stumps: Vec<Stump> = Vec::new();

    let holdout_loss = |fitted: &[f64]| -> f64 {
        holdout
            .iter()
            .map(|&i| (z[i] - fitted[i]).powi(2))
            .sum::<f64>()
            / holdout.len() as f64
    };
    let mut best_loss = holdout_loss(&fitted);
    let mut best_len = 0usize;

    let n_sub = ((train.len() as f64 * cfg.subsample) as usize).max(1);
    let mut pool = train.clone();
    for _ in 0..cfg.max_rounds {
        // subsample without replacement via partial shuffle
        for i in 0..n_sub {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let Some(stump) = fit_stump(a, &residual, &pool[..n_sub], &thresholds) else {
            break;
        };
        stumps.push(stump);
        for i in 0..n {
            let delta = cfg.shrinkage * stump.eval(a, i);
            fitted[i] += delta;
            residual[i] -= delta;
        }
        let loss = holdout_loss(&fitted);
        if loss < best_loss - 1e-12 {
            best_loss = loss;
            best_len = stumps.len();
        } else if stumps.len() >= best_len + cfg.patience {
            break;
        }
    }
    stumps.truncate(best_len);
    BoostedModel {
        init,
        shrinkage: cfg.shrinkage,
        stumps,
    }
}
