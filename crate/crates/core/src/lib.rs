//! Forecasting toolkit for cycle-length series: a seeded generator for three
//! regularity regimes, lag-window features, OLS/Huber/Lasso/OMP regressors,
//! ARIMA, an LSTM trained by backpropagation through time, and the
//! multi-cycle evaluation harness that compares them.

pub mod arima;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod features;
pub mod kv;
pub mod linear_models;
pub mod lstm;
pub mod models;
pub mod report;
pub mod rng;
pub mod stats;

pub use datagen::{case_preset, generate, summarize, CaseId, CycleRecord, CycleSeries, GeneratorConfig};
pub use error::{Error, Result};
pub use eval::{compare_models, compute_metrics, rolling_eval, EvalConfig, MetricReport};
pub use features::{make_windows, SupervisedWindows};
pub use models::{FittedModel, ModelSpec};
