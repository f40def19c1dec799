//! Bootstrap confidence intervals and the Monte Carlo benchmark harness.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::{Read, Write};
use std::time::Instant;

use crate::dataset::{standardize, Dataset};
use crate::dgp::sample;
use crate::error::{EuncError, Result};
use crate::estimators::{eunc_pipeline, tsls_estimate, PipelineConfig};
use crate::rng::Seed;
use crate::scenario::{ExtraConfounder, NoiseSpec, ScenarioSpec};

/// Percentile bootstrap interval for the raw-scale effects.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapCi {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub b_requested: usize,
    pub b_used: usize,
    pub failures: usize,
    pub method: String,
}

/// Type-7 interpolated quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = q * (m - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Case-resampled percentile interval: B resamples of the rows with
/// replacement, the refitting pipeline rerun on each (standardization,
/// first stage and second stage). The identification screen is decided on
/// the original data: a dataset that fails it (without an override) is
/// rejected up front, and the resample reruns skip the re-screening, since
/// the ties introduced by resampling systematically inflate the normality
/// statistic. Resamples that still fail (numerically collinear designs)
/// are dropped and counted; more than 10% dropped is an error.
pub fn bootstrap_ci(
    raw: &Dataset,
    cfg: &PipelineConfig,
    b: usize,
    level: f64,
    seed: Seed,
) -> Result<BootstrapCi> {
    if b < 100 {
        return Err(EuncError::Precondition(format!(
            "bootstrap needs B >= 100, got {b}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(EuncError::Precondition("level must be in (0,1)".into()));
    }
    if eunc_pipeline(raw, cfg)?.failed() {
        return Err(EuncError::Precondition(
            "dataset fails the identification diagnostics; bootstrap needs a passing or overridden pipeline".into(),
        ));
    }
    let n = raw.n();
    let p = raw.p();
    let estimates: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = seed.derive(rep as u64);
            let mut rng = rep_seed.rng();
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let resampled = raw.select_rows(&idx);
            let mut rep_cfg = cfg.clone();
            rep_cfg.condexp.seed = rep_seed.derive(0xCE).0;
            rep_cfg.override_diagnostics = true;
            match eunc_pipeline(&resampled, &rep_cfg) {
                Ok(report) => report.estimate.map(|est| est.alpha_raw),
                Err(_) => None,
            }
        })
        .collect();
    let ok: Vec<&Vec<f64>> = estimates.iter().flatten().collect();
    let failures = b - ok.len();
    if failures * 10 > b {
        return Err(EuncError::TooManyFailures {
            failed: failures,
            total: b,
        });
    }
    let tail = (1.0 - level) / 2.0;
    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    for j in 0..p {
        let mut vals: Vec<f64> = ok.iter().map(|v| v[j]).collect();
        vals.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&vals, tail));
        upper.push(quantile_sorted(&vals, 1.0 - tail));
    }
    Ok(BootstrapCi {
        level,
        lower,
        upper,
        b_requested: b,
        b_used: ok.len(),
        failures,
        method: "percentile".to_string(),
    })
}

/// Which estimators a benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Eunc,
    Tsls,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Eunc => "eunc",
            EstimatorKind::Tsls => "tsls",
        }
    }
}

/// One per-replication record, the row format of the persisted record file.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub scenario: String,
    pub estimator: String,
    pub n: usize,
    pub rep: usize,
    pub ok: bool,
    pub wall_ms: f64,
    pub alpha_raw: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
}

/// Write records as delimited text with a header row and a stable column
/// order: scenario, estimator, n, rep, status, wall_ms, then per-component
/// alpha/ci columns. Missing values are empty fields.
pub fn write_records<W: Write>(records: &[RepRecord], p: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "scenario".to_string(),
        "estimator".to_string(),
        "n".to_string(),
        "rep".to_string(),
        "status".to_string(),
        "wall_ms".to_string(),
    ];
    for j in 1..=p {
        header.push(format!("alpha_raw_{j}"));
    }
    for j in 1..=p {
        header.push(format!("ci_lower_{j}"));
    }
    for j in 1..=p {
        header.push(format!("ci_upper_{j}"));
    }
    w.write_record(&header)?;
    let fmt_opt = |v: Option<&f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    for r in records {
        let mut row = vec![
            r.scenario.clone(),
            r.estimator.clone(),
            r.n.to_string(),
            r.rep.to_string(),
            if r.ok { "ok" } else { "fail" }.to_string(),
            format!("{:.3}", r.wall_ms),
        ];
        for j in 0..p {
            row.push(fmt_opt(r.alpha_raw.get(j)));
        }
        for j in 0..p {
            row.push(fmt_opt(r.ci_lower.get(j)));
        }
        for j in 0..p {
            row.push(fmt_opt(r.ci_upper.get(j)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a record file produced by `write_records`.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RepRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let p = header.iter().filter(|h| h.starts_with("alpha_raw_")).count();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or_default();
        let parse_block = |start: usize| -> Vec<f64> {
            (0..p)
                .filter_map(|j| get(start + j).parse::<f64>().ok())
                .collect()
        };
        out.push(RepRecord {
            scenario: get(0).to_string(),
            estimator: get(1).to_string(),
            n: get(2).parse().unwrap_or(0),
            rep: get(3).parse().unwrap_or(0),
            ok: get(4) == "ok",
            wall_ms: get(5).parse().unwrap_or(0.0),
            alpha_raw: parse_block(6),
            ci_lower: parse_block(6 + p),
            ci_upper: parse_block(6 + 2 * p),
        });
    }
    Ok(out)
}

/// Per-(estimator, n) aggregate of a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorAggregate {
    pub estimator: String,
    pub n: usize,
    pub successes: usize,
    pub failures: usize,
    pub bias: Vec<f64>,
    pub sd: Vec<f64>,
    /// Fraction of intervals covering the truth, over replications that
    /// produced an interval.
    pub coverage: Option<Vec<f64>>,
}

/// Aggregate records against the true effect (raw scale). Failed
/// replications are excluded from the statistics and counted.
pub fn aggregate_records(records: &[RepRecord], alpha_true: &[f64]) -> Vec<EstimatorAggregate> {
    let p = alpha_true.len();
    let mut keys: Vec<(String, usize)> = records
        .iter()
        .map(|r| (r.estimator.clone(), r.n))
        .collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|(estimator, n)| {
            let group: Vec<&RepRecord> = records
                .iter()
                .filter(|r| &r.estimator == estimator && r.n == *n)
                .collect();
            let ok: Vec<&&RepRecord> = group.iter().filter(|r| r.ok).collect();
            let m = ok.len();
            let mut bias = vec![0.0; p];
            let mut sd = vec![0.0; p];
            if m > 0 {
                for j in 0..p {
                    let errs: Vec<f64> = ok.iter().map(|r| r.alpha_raw[j] - alpha_true[j]).collect();
                    let mean = errs.iter().sum::<f64>() / m as f64;
                    bias[j] = mean;
                    if m > 1 {
                        sd[j] = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                            / (m as f64 - 1.0))
                            .sqrt();
                    }
                }
            }
            let with_ci: Vec<&&&RepRecord> = ok
                .iter()
                .filter(|r| r.ci_lower.len() == p && r.ci_upper.len() == p)
                .collect();
            let coverage = if with_ci.is_empty() {
                None
            } else {
                Some(
                    (0..p)
                        .map(|j| {
                            with_ci
                                .iter()
                                .filter(|r| {
                                    r.ci_lower[j] <= alpha_true[j] && alpha_true[j] <= r.ci_upper[j]
                                })
                                .count() as f64
                                / with_ci.len() as f64
                        })
                        .collect(),
                )
            };
            EstimatorAggregate {
                estimator: estimator.clone(),
                n: *n,
                successes: m,
                failures: group.len() - m,
                bias,
                sd,
                coverage,
            }
        })
        .collect()
}

/// Benchmark options.
#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub estimators: Vec<EstimatorKind>,
    pub pipeline: PipelineConfig,
    /// Compute bootstrap coverage intervals for the moment estimator.
    pub with_coverage: bool,
    pub bootstrap_b: usize,
    pub level: f64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            estimators: vec![EstimatorKind::Eunc, EstimatorKind::Tsls],
            pipeline: PipelineConfig::default(),
            with_coverage: false,
            bootstrap_b: 200,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub scenario: String,
    pub alpha_true: Vec<f64>,
    pub r: usize,
    pub aggregates: Vec<EstimatorAggregate>,
    pub total_wall_ms: f64,
    #[serde(skip)]
    pub records: Vec<RepRecord>,
}

/// Monte Carlo benchmark: for each sample size and estimator, R replications
/// with per-replication derived seeds, raw-scale errors against the true
/// effect, and (optionally) bootstrap coverage for the moment estimator.
/// Replications run in a parallel pool; aggregation is a reduction over the
/// index-ordered records, so the report does not depend on thread count.
pub fn run_benchmark(
    spec: &ScenarioSpec,
    n_list: &[usize],
    r: usize,
    opts: &BenchmarkOptions,
    master_seed: Seed,
) -> Result<BenchmarkReport> {
    if r < 2 {
        return Err(EuncError::Precondition(format!("need R >= 2, got {r}")));
    }
    spec.validate()?;
    let start = Instant::now();
    let alpha_true: Vec<f64> = spec.alpha.iter().copied().collect();
    let mut records: Vec<RepRecord> = Vec::with_capacity(n_list.len() * r * opts.estimators.len());
    for (n_idx, &n) in n_list.iter().enumerate() {
        let mut batch: Vec<Vec<RepRecord>> = (0..r)
            .into_par_iter()
            .map(|rep| {
                let stream = ((n_idx as u64) << 32) | rep as u64;
                let ds_seed = master_seed.derive(stream);
                run_one_replication(spec, n, rep, ds_seed, opts)
            })
            .collect();
        for b in batch.drain(..) {
            records.extend(b);
        }
    }
    let aggregates = aggregate_records(&records, &alpha_true);
    Ok(BenchmarkReport {
        scenario: spec.name.clone(),
        alpha_true,
        r,
        aggregates,
        total_wall_ms: start.elapsed().as_secs_f64() * 1e3,
        records,
    })
}

fn run_one_replication(
    spec: &ScenarioSpec,
    n: usize,
    rep: usize,
    ds_seed: Seed,
    opts: &BenchmarkOptions,
) -> Vec<RepRecord> {
    let mut out = Vec::with_capacity(opts.estimators.len());
    let data = match sample(spec, n, ds_seed) {
        Ok(d) => d,
        Err(_) => {
            for kind in &opts.estimators {
                out.push(RepRecord {
                    scenario: spec.name.clone(),
                    estimator: kind.label().to_string(),
                    n,
                    rep,
                    ok: false,
                    wall_ms: 0.0,
                    alpha_raw: vec![],
                    ci_lower: vec![],
                    ci_upper: vec![],
                });
            }
            return out;
        }
    };
    for kind in &opts.estimators {
        let t0 = Instant::now();
        let record = match kind {
            EstimatorKind::Eunc => {
                let mut cfg = opts.pipeline.clone();
                cfg.condexp.seed = ds_seed.derive(0xCE).0;
                match eunc_pipeline(&data, &cfg) {
                    Ok(report) => match report.estimate {
                        Some(est) => {
                            let (ci_lower, ci_upper) = if opts.with_coverage {
                                match bootstrap_ci(
                                    &data,
                                    &cfg,
                                    opts.bootstrap_b,
                                    opts.level,
                                    ds_seed.derive(0xB007),
                                ) {
                                    Ok(ci) => (ci.lower, ci.upper),
                                    Err(_) => (vec![], vec![]),
                                }
                            } else {
                                (vec![], vec![])
                            };
                            RepRecord {
                                scenario: spec.name.clone(),
                                estimator: kind.label().to_string(),
                                n,
                                rep,
                                ok: true,
                                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                                alpha_raw: est.alpha_raw,
                                ci_lower,
                                ci_upper,
                            }
                        }
                        None => RepRecord {
                            scenario: spec.name.clone(),
                            estimator: kind.label().to_string(),
                            n,
                            rep,
                            ok: false,
                            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                            alpha_raw: vec![],
                            ci_lower: vec![],
                            ci_upper: vec![],
                        },
                    },
                    Err(_) => RepRecord {
                        scenario: spec.name.clone(),
                        estimator: kind.label().to_string(),
                        n,
                        rep,
                        ok: false,
                        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                        alpha_raw: vec![],
                        ci_lower: vec![],
                        ci_upper: vec![],
                    },
                }
            }
            EstimatorKind::Tsls => match standardize(&data).and_then(|s| tsls_estimate(&s, opts.level)) {
                Ok(rep_t) => RepRecord {
                    scenario: spec.name.clone(),
                    estimator: kind.label().to_string(),
                    n,
                    rep,
                    ok: true,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                    alpha_raw: rep_t.alpha_raw,
                    ci_lower: rep_t.ci_raw_lower,
                    ci_upper: rep_t.ci_raw_upper,
                },
                Err(_) => RepRecord {
                    scenario: spec.name.clone(),
                    estimator: kind.label().to_string(),
                    n,
                    rep,
                    ok: false,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                    alpha_raw: vec![],
                    ci_lower: vec![],
                    ci_upper: vec![],
                },
            },
        };
        out.push(record);
    }
    out
}

/// Sensitivity sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityAxis {
    /// Replace the treatment noise by Student-t with the swept df.
    EpsAStudentT,
    /// Add an extra Student-t confounder W (loadings 0.5 on A and Y).
    ExtraConfounderT,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityRow {
    pub nu: f64,
    pub xi: f64,
    pub mean_bias: f64,
    /// Absolute value of the mean estimation bias, the quantity tracked by
    /// the sweep.
    pub abs_mean_bias: f64,
    pub sd: f64,
    pub successes: usize,
    pub failures: usize,
}

/// Sweep the degrees of freedom over `nu_grid` for both the independent
/// (xi = 0) and confounded (xi = 0.5) covariate variants at fixed n.
pub fn run_sensitivity(
    base: &ScenarioSpec,
    axis: SensitivityAxis,
    nu_grid: &[f64],
    r: usize,
    n: usize,
    pipeline: &PipelineConfig,
    master_seed: Seed,
) -> Result<Vec<SensitivityRow>> {
    if nu_grid.iter().any(|&nu| nu <= 2.0) {
        return Err(EuncError::Precondition(
            "degrees of freedom must exceed 2".into(),
        ));
    }
    let mut rows = Vec::with_capacity(nu_grid.len() * 2);
    for (xi_idx, xi) in [0.0, 0.5].into_iter().enumerate() {
        for (nu_idx, &nu) in nu_grid.iter().enumerate() {
            let mut spec = base.clone();
            spec.sigma.fill(xi);
            match axis {
                SensitivityAxis::EpsAStudentT => {
                    spec.treatment_noise =
                        vec![NoiseSpec::StudentT { nu }; spec.p];
                    spec.name = format!("{}_epsA_t", base.name);
                }
                SensitivityAxis::ExtraConfounderT => {
                    spec.extra_confounder = Some(ExtraConfounder {
                        noise: NoiseSpec::StudentT { nu },
                        loadings_a: vec![0.5; spec.p],
                        loading_y: 0.5,
                    });
                    spec.name = format!("{}_W_t", base.name);
                }
            }
            spec.validate()?;
            let opts = BenchmarkOptions {
                estimators: vec![EstimatorKind::Eunc],
                pipeline: pipeline.clone(),
                with_coverage: false,
                bootstrap_b: 0,
                level: 0.95,
            };
            let seed = master_seed.derive((xi_idx as u64) << 40 | (nu_idx as u64) << 20);
            let report = run_benchmark(&spec, &[n], r, &opts, seed)?;
            let agg = &report.aggregates[0];
            rows.push(SensitivityRow {
                nu,
                xi,
                mean_bias: agg.bias[0],
                abs_mean_bias: agg.bias[0].abs(),
                sd: agg.sd[0],
                successes: agg.successes,
                failures: agg.failures,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub estimator: String,
    /// (n, rmse, failures) per grid point.
    pub points: Vec<(usize, f64, usize)>,
    /// Least-squares slope of log rmse against log n; absent when the
    /// errors are numerically zero everywhere.
    pub slope: Option<f64>,
    pub degenerate: bool,
}

/// Root-mean-square error of the estimator per sample size, and the slope
/// of log RMSE against log n.
pub fn rate_check(
    spec: &ScenarioSpec,
    estimator: EstimatorKind,
    n_grid: &[usize],
    r: usize,
    pipeline: &PipelineConfig,
    master_seed: Seed,
) -> Result<RateReport> {
    if n_grid.len() < 4 {
        return Err(EuncError::Precondition(format!(
            "rate check needs at least 4 grid points, got {}",
            n_grid.len()
        )));
    }
    let opts = BenchmarkOptions {
        estimators: vec![estimator],
        pipeline: pipeline.clone(),
        with_coverage: false,
        bootstrap_b: 0,
        level: 0.95,
    };
    let report = run_benchmark(spec, n_grid, r, &opts, master_seed)?;
    let alpha_true: Vec<f64> = spec.alpha.iter().copied().collect();
    let p = alpha_true.len();
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let group: Vec<&RepRecord> = report
            .records
            .iter()
            .filter(|rec| rec.n == n && rec.ok)
            .collect();
        let failures = report
            .records
            .iter()
            .filter(|rec| rec.n == n && !rec.ok)
            .count();
        let rmse = if group.is_empty() {
            f64::NAN
        } else {
            let mse: f64 = group
                .iter()
                .map(|rec| {
                    (0..p)
                        .map(|j| (rec.alpha_raw[j] - alpha_true[j]).powi(2))
                        .sum::<f64>()
                        / p as f64
                })
                .sum::<f64>()
                / group.len() as f64;
            mse.sqrt()
        };
        points.push((n, rmse, failures));
    }
    let degenerate = points.iter().all(|&(_, rmse, _)| rmse < 1e-10);
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, rmse, _)| rmse.is_finite() && rmse > 0.0)
        .map(|&(n, rmse, _)| ((n as f64).ln(), rmse.ln()))
        .collect();
    let slope = if degenerate || usable.len() < 2 {
        None
    } else {
        let mx = usable.iter().map(|v| v.0).sum::<f64>() / usable.len() as f64;
        let my = usable.iter().map(|v| v.1).sum::<f64>() / usable.len() as f64;
        let sxy: f64 = usable.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum();
        let sxx: f64 = usable.iter().map(|v| (v.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    };
    Ok(RateReport {
        estimator: estimator.label().to_string(),
        points,
        slope,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use nalgebra::{DMatrix, DVector};

    fn noiseless_quadratic(n: usize) -> Dataset {
        // Z = A^2 - 1 exactly; Y = 2A + 3Z with no residual.
        let a_vals: Vec<f64> = (0..n).map(|i| -2.0 + 5.0 * i as f64 / (n - 1) as f64).collect();
        let z = DMatrix::from_fn(n, 1, |i, _| a_vals[i] * a_vals[i] - 1.0);
        let a = DMatrix::from_fn(n, 1, |i, _| a_vals[i]);
        let y = DVector::from_fn(n, |i, _| 2.0 * a_vals[i] + 3.0 * z[(i, 0)]);
        Dataset::new(z, a, y, None).unwrap()
    }

    #[test]
    fn bootstrap_guards() {
        let data = noiseless_quadratic(40);
        let cfg = PipelineConfig {
            override_diagnostics: true,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            bootstrap_ci(&data, &cfg, 50, 0.95, Seed(1)),
            Err(EuncError::Precondition(_))
        ));
    }

    #[test]
    fn bootstrap_collapses_on_noiseless_data() {
        let data = noiseless_quadratic(60);
        let cfg = PipelineConfig {
            override_diagnostics: true,
            ..PipelineConfig::default()
        };
        let ci = bootstrap_ci(&data, &cfg, 120, 0.95, Seed(5)).unwrap();
        assert!((ci.lower[0] - 2.0).abs() < 1e-8, "{ci:?}");
        assert!((ci.upper[0] - 2.0).abs() < 1e-8, "{ci:?}");
    }

    #[test]
    fn bootstrap_is_scale_equivariant() {
        let data = noiseless_quadratic(60);
        let c = 3.7;
        let scaled = Dataset::new(
            data.z().clone(),
            data.a().clone(),
            data.y() * c,
            None,
        )
        .unwrap();
        let cfg = PipelineConfig {
            override_diagnostics: true,
            ..PipelineConfig::default()
        };
        let ci = bootstrap_ci(&data, &cfg, 120, 0.95, Seed(5)).unwrap();
        let ci_scaled = bootstrap_ci(&scaled, &cfg, 120, 0.95, Seed(5)).unwrap();
        assert!((ci_scaled.lower[0] - c * ci.lower[0]).abs() < 1e-6);
        assert!((ci_scaled.upper[0] - c * ci.upper[0]).abs() < 1e-6);
    }

    #[test]
    fn record_file_round_trip() {
        let records = vec![
            RepRecord {
                scenario: "s".into(),
                estimator: "eunc".into(),
                n: 100,
                rep: 0,
                ok: true,
                wall_ms: 1.25,
                alpha_raw: vec![1.01, 0.99],
                ci_lower: vec![0.9, 0.9],
                ci_upper: vec![1.1, 1.1],
            },
            RepRecord {
                scenario: "s".into(),
                estimator: "eunc".into(),
                n: 100,
                rep: 1,
                ok: false,
                wall_ms: 0.5,
                alpha_raw: vec![],
                ci_lower: vec![],
                ci_upper: vec![],
            },
        ];
        let mut buf = Vec::new();
        write_records(&records, 2, &mut buf).unwrap();
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].alpha_raw, records[0].alpha_raw);
        assert!(!back[1].ok);
        assert!(back[1].alpha_raw.is_empty());
    }

    #[test]
    fn benchmark_is_deterministic_across_thread_counts() {
        let spec = presets::table1_case(1).unwrap();
        let opts = BenchmarkOptions {
            estimators: vec![EstimatorKind::Eunc, EstimatorKind::Tsls],
            with_coverage: false,
            ..BenchmarkOptions::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_benchmark(&spec, &[120], 8, &opts, Seed(404)).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.aggregates, b.aggregates);
        let strip = |recs: &[RepRecord]| -> Vec<(String, usize, bool, Vec<f64>)> {
            recs.iter()
                .map(|r| (r.estimator.clone(), r.rep, r.ok, r.alpha_raw.clone()))
                .collect()
        };
        assert_eq!(strip(&a.records), strip(&b.records));
    }

    #[test]
    fn rate_check_grid_guard() {
        let spec = presets::table1_case(1).unwrap();
        assert!(rate_check(
            &spec,
            EstimatorKind::Eunc,
            &[100, 200],
            4,
            &PipelineConfig::default(),
            Seed(0)
        )
        .is_err());
    }
}
