//! Run configuration: a key-value tree loaded from TOML, merged with
//! command-line overrides.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eunc::condexp::{BoostConfig, CondExpConfig, CondExpMethod};
use eunc::dataset::{ColumnTransform, CsvRoles};
use eunc::estimators::PipelineConfig;
use eunc::presets;
use eunc::scenario::ScenarioSpec;

/// Seed used when neither the config nor the command line provides one.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub simulate: Option<SimulateBlock>,
    pub data: Option<DataBlock>,
    pub condexp: Option<CondExpBlock>,
    pub diagnostics: Option<DiagnosticsBlock>,
    pub inference: Option<InferenceBlock>,
    pub benchmark: Option<BenchmarkBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    /// Built-in scenario name (see `eunc::presets`).
    pub scenario: Option<String>,
    /// Path to a scenario file; takes precedence over `scenario`.
    pub scenario_path: Option<PathBuf>,
    pub n: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub path: PathBuf,
    pub z: Vec<String>,
    pub a: Vec<String>,
    pub y: String,
    /// Column name -> transform ("log").
    #[serde(default)]
    pub transforms: BTreeMap<String, String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondExpBlock {
    pub method: Option<String>,
    pub degree: Option<usize>,
    pub bandwidth_grid: Option<Vec<f64>>,
    pub boosting: Option<BoostBlock>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostBlock {
    pub shrinkage: Option<f64>,
    pub subsample: Option<f64>,
    pub max_rounds: Option<usize>,
    pub patience: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    pub alpha: Option<f64>,
    pub li_threshold: Option<f64>,
    #[serde(rename = "override")]
    pub override_diagnostics: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceBlock {
    pub bootstrap: Option<bool>,
    pub bootstrap_b: Option<usize>,
    pub level: Option<f64>,
    pub tsls: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkBlock {
    /// Scenario names or file paths.
    pub scenarios: Vec<String>,
    pub n: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub estimators: Vec<String>,
    pub with_coverage: Option<bool>,
    pub bootstrap_b: Option<usize>,
    pub level: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        Ok(cfg)
    }

    pub fn csv_roles(&self) -> Result<(PathBuf, CsvRoles)> {
        let data = self
            .data
            .as_ref()
            .context("config is missing the [data] block")?;
        if !data.path.exists() {
            bail!("data file {} does not exist", data.path.display());
        }
        let mut transforms = Vec::new();
        for (col, t) in &data.transforms {
            match t.as_str() {
                "log" => transforms.push((col.clone(), ColumnTransform::Log)),
                other => bail!("unknown transform {other:?} for column {col:?} (supported: log)"),
            }
        }
        Ok((
            data.path.clone(),
            CsvRoles {
                z: data.z.clone(),
                a: data.a.clone(),
                y: data.y.clone(),
                transforms,
            },
        ))
    }
}

pub fn parse_method(name: &str) -> Result<CondExpMethod> {
    Ok(match name {
        "kernel_nw" => CondExpMethod::KernelNw,
        "local_linear" => CondExpMethod::LocalLinear,
        "sieve_poly" | "sieve" => CondExpMethod::SievePoly,
        "boosted_stumps" | "boosting" | "gb" => CondExpMethod::BoostedStumps,
        other => bail!(
            "unknown first-stage method {other:?} (expected kernel_nw, local_linear, sieve_poly or boosted_stumps)"
        ),
    })
}

/// Build the pipeline configuration from the config blocks.
pub fn pipeline_config(cfg: &RunConfig, override_flag: bool, seed: u64) -> Result<PipelineConfig> {
    let mut condexp = CondExpConfig {
        seed,
        ..CondExpConfig::default()
    };
    if let Some(block) = &cfg.condexp {
        if let Some(m) = &block.method {
            condexp.method = parse_method(m)?;
        }
        if let Some(d) = block.degree {
            condexp.degree = d;
        }
        if let Some(grid) = &block.bandwidth_grid {
            condexp.bandwidth_grid = grid.clone();
        }
        if let Some(boost) = &block.boosting {
            let mut b = BoostConfig::default();
            if let Some(v) = boost.shrinkage {
                b.shrinkage = v;
            }
            if let Some(v) = boost.subsample {
                b.subsample = v;
            }
            if let Some(v) = boost.max_rounds {
                b.max_rounds = v;
            }
            if let Some(v) = boost.patience {
                b.patience = v;
            }
            condexp.boosting = b;
        }
    }
    let mut pipeline = PipelineConfig {
        condexp,
        override_diagnostics: override_flag,
        ..PipelineConfig::default()
    };
    if let Some(block) = &cfg.diagnostics {
        if let Some(a) = block.alpha {
            if !(0.0 < a && a < 1.0) {
                bail!("diagnostics alpha must be in (0,1)");
            }
            pipeline.alpha_level = a;
        }
        if let Some(t) = block.li_threshold {
            pipeline.li_threshold = t;
        }
        if block.override_diagnostics == Some(true) {
            pipeline.override_diagnostics = true;
        }
    }
    Ok(pipeline)
}

/// Resolve a scenario by built-in name or file path.
pub fn resolve_scenario(token: &str) -> Result<ScenarioSpec> {
    if let Ok(spec) = presets::by_name(token) {
        return Ok(spec);
    }
    let path = Path::new(token);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return Ok(ScenarioSpec::from_toml_str(&text)?);
    }
    bail!("scenario {token:?} is neither a built-in name nor an existing file")
}
