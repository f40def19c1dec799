//! Causal-effect estimation under Gaussian unmeasured confounding.
//!
//! The estimator identifies treatment effects from observational data by
//! pairing an auxiliary Gaussian covariate Z with non-Gaussian treatment
//! noise: the conditional expectation E(Z|A) absorbs the confounding
//! channel, so regressing the outcome on the treatments together with a
//! nonparametric estimate of E(Z|A) recovers the direct effects. The crate
//! provides the domain types, a simulation engine with exact population
//! moments for oracle checks, identifiability diagnostics, pluggable
//! first-stage regressors, the moment estimator with a two-stage
//! least-squares baseline, bootstrap inference, and a Monte Carlo benchmark
//! harness.

pub mod condexp;
pub mod dataset;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod moments;
pub mod presets;
pub mod quadrature;
pub mod rng;
pub mod scenario;

pub use dataset::{standardize, destandardize_effect, ColumnNames, Dataset, StandardizedDataset};
pub use error::{EuncError, Result};
pub use rng::Seed;
pub use scenario::{NoiseSpec, ScenarioSpec};
