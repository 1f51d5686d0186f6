//! The six forecasters behind one contract: fit on a training series, then
//! predict the next (cycle, period) pair from any history.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::arima::{fit_arima, forecast_arima, ArimaConfig, ArimaFit};
use crate::datagen::{CaseId, CycleSeries};
use crate::error::{Error, Result};
use crate::features::{fit_scaler, lag_row, make_windows, ScalerParams, SupervisedWindows, CHANNELS, DEFAULT_LAGS};
use crate::linear_models::{
    fit_dropping_singular, fit_huber, fit_lasso, fit_ols, fit_omp, predict_linear, HuberConfig, LassoConfig,
    LinearFit, OmpConfig,
};
use crate::lstm::{forward_sequence, init_network, train, Architecture, LstmNetwork, Mode, TrainConfig};

/// A model that can be fit on a training series.
pub trait Forecaster: Sync {
    fn tag(&self) -> String;
    fn fit(&self, train: &CycleSeries) -> Result<Box<dyn Predictor>>;
}

/// A fitted model: one-step-ahead prediction from an observed (or partly
/// predicted) history of `(cycle, period)` pairs.
pub trait Predictor: Send {
    fn predict_next(&self, history: &[[f64; 2]]) -> Result<[f64; 2]>;

    fn as_fitted(&self) -> Option<&FittedModel> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKindTag {
    Ols,
    Huber,
    Lasso,
    Omp,
    Arima,
    Lstm,
}

impl ModelKindTag {
    pub const ALL: [ModelKindTag; 6] = [
        ModelKindTag::Ols,
        ModelKindTag::Huber,
        ModelKindTag::Lasso,
        ModelKindTag::Omp,
        ModelKindTag::Arima,
        ModelKindTag::Lstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKindTag::Ols => "ols",
            ModelKindTag::Huber => "huber",
            ModelKindTag::Lasso => "lasso",
            ModelKindTag::Omp => "omp",
            ModelKindTag::Arima => "arima",
            ModelKindTag::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKindTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKindTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmSpec {
    pub train: TrainConfig,
    /// Seeds the weight initialization.
    pub init_seed: u64,
}

impl LstmSpec {
    /// Architecture and epoch budget per regime: one 64-unit layer for 100
    /// epochs on Case 1, the 128/64/32 stack for 1600 epochs otherwise.
    pub fn for_case(case: CaseId, seed: u64) -> Self {
        let (architecture, epochs) = match case {
            CaseId::Case1 => (Architecture::Single64, 100),
            CaseId::Case2 | CaseId::Case3 => (Architecture::Stacked, 1600),
        };
        Self {
            train: TrainConfig {
                epochs,
                learning_rate: 1e-3,
                seed,
                architecture,
            },
            init_seed: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Ols,
    Huber(HuberConfig),
    Lasso(LassoConfig),
    Omp(OmpConfig),
    Arima(ArimaConfig),
    Lstm(LstmSpec),
}

/// Unfitted model plus the lag window shared by the window-based models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lags: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            lags: DEFAULT_LAGS,
        }
    }

    pub fn with_lags(mut self, lags: usize) -> Self {
        self.lags = lags;
        self
    }

    pub fn kind_tag(&self) -> ModelKindTag {
        match self.kind {
            ModelKind::Ols => ModelKindTag::Ols,
            ModelKind::Huber(_) => ModelKindTag::Huber,
            ModelKind::Lasso(_) => ModelKindTag::Lasso,
            ModelKind::Omp(_) => ModelKindTag::Omp,
            ModelKind::Arima(_) => ModelKindTag::Arima,
            ModelKind::Lstm(_) => ModelKindTag::Lstm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::InvalidConfig("window length must be positive".into()));
        }
        match &self.kind {
            ModelKind::Ols => Ok(()),
            ModelKind::Huber(c) => c.validate(),
            ModelKind::Lasso(c) => c.validate(),
            ModelKind::Omp(c) => c.validate(CHANNELS * self.lags),
            ModelKind::Arima(c) => c.validate(),
            ModelKind::Lstm(s) => {
                s.train.validate()?;
                if s.train.learning_rate <= 0.0 {
                    return Err(Error::InvalidConfig("learning rate must be in (0, 1]".into()));
                }
                if s.train.architecture == Architecture::Custom {
                    return Err(Error::InvalidConfig("lstm architecture must be single64 or stacked".into()));
                }
                Ok(())
            }
        }
    }

    /// Hyperparameters as `key=value` pairs for run logs.
    pub fn hyperparameters(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        match &self.kind {
            ModelKind::Ols => {}
            ModelKind::Huber(c) => {
                out.push(("delta".into(), c.delta.to_string()));
                out.push(("max_iter".into(), c.max_iter.to_string()));
                out.push(("tol".into(), c.tol.to_string()));
            }
            ModelKind::Lasso(c) => {
                out.push(("lambda".into(), c.lambda.to_string()));
                out.push(("max_iter".into(), c.max_iter.to_string()));
                out.push(("tol".into(), c.tol.to_string()));
            }
            ModelKind::Omp(c) => {
                out.push(("k".into(), c.max_predictors.to_string()));
                out.push(("residual_tol".into(), c.residual_tol.to_string()));
            }
            ModelKind::Arima(c) => {
                out.push(("p".into(), c.p.to_string()));
                out.push(("d".into(), c.d.to_string()));
                out.push(("q".into(), c.q.to_string()));
            }
            ModelKind::Lstm(s) => {
                out.push(("architecture".into(), s.train.architecture.to_string()));
                out.push(("epochs".into(), s.train.epochs.to_string()));
                out.push(("learning_rate".into(), s.train.learning_rate.to_string()));
                out.push(("seed".into(), s.train.seed.to_string()));
            }
        }
        if !matches!(self.kind, ModelKind::Arima(_)) {
            out.insert(0, ("lags".into(), self.lags.to_string()));
        }
        out
    }

    pub fn fit_model(&self, train_series: &CycleSeries) -> Result<FittedModel> {
        self.validate()?;
        match &self.kind {
            ModelKind::Arima(config) => {
                let cycle = fit_arima(&train_series.cycle_lengths(), config)?;
                let period = fit_arima(&train_series.period_lengths(), config)?;
                Ok(FittedModel::Arima { cycle, period })
            }
            ModelKind::Lstm(spec) => {
                let windows = make_windows(train_series, self.lags, 1)?;
                let scaler = fit_scaler(&windows)?.pooled_by_channel(CHANNELS);
                let scaled = scale_windows(&windows, &scaler);
                let net = init_network(spec.train.architecture, spec.init_seed)?;
                let outcome = train(net, &scaled, &spec.train)?;
                Ok(FittedModel::Lstm {
                    network: outcome.network,
                    scaler,
                    lags: self.lags,
                    loss_curve: outcome.loss_curve,
                })
            }
            linear => {
                let windows = make_windows(train_series, self.lags, 1)?;
                let (x, y) = (&windows.inputs, &windows.targets);
                let fit = match linear {
                    ModelKind::Ols => fit_dropping_singular(x, |d| fit_ols(d, y))?,
                    ModelKind::Huber(c) => fit_dropping_singular(x, |d| fit_huber(d, y, c))?,
                    ModelKind::Lasso(c) => fit_lasso(x, y, c)?,
                    ModelKind::Omp(c) => fit_omp(x, y, c)?,
                    ModelKind::Arima(_) | ModelKind::Lstm(_) => unreachable!(),
                };
                Ok(FittedModel::Linear { fit, lags: self.lags })
            }
        }
    }
}

impl Forecaster for ModelSpec {
    fn tag(&self) -> String {
        self.kind_tag().to_string()
    }

    fn fit(&self, train_series: &CycleSeries) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_model(train_series)?))
    }
}

fn scale_windows(windows: &SupervisedWindows, scaler: &ScalerParams) -> SupervisedWindows {
    let scale = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| scaler.scale_value(j % CHANNELS, m[(i, j)]));
    SupervisedWindows {
        inputs: scale(&windows.inputs),
        targets: scale(&windows.targets),
        lags: windows.lags,
        horizon: windows.horizon,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear {
        fit: LinearFit,
        lags: usize,
    },
    Arima {
        cycle: ArimaFit,
        period: ArimaFit,
    },
    Lstm {
        network: LstmNetwork,
        /// One column per channel, pooled over lag positions.
        scaler: ScalerParams,
        lags: usize,
        loss_curve: Vec<f64>,
    },
}

impl FittedModel {
    pub fn tag(&self) -> String {
        match self {
            FittedModel::Linear { fit, .. } => fit.tag.to_string(),
            FittedModel::Arima { .. } => "arima".into(),
            FittedModel::Lstm { .. } => "lstm".into(),
        }
    }

    pub fn loss_curve(&self) -> Option<&[f64]> {
        match self {
            FittedModel::Lstm { loss_curve, .. } => Some(loss_curve),
            _ => None,
        }
    }

    /// Flat-text artifact: linear fits and ARIMA as `key=value`, the LSTM as
    /// its network container followed by the scaler and window length.
    pub fn to_text(&self) -> String {
        match self {
            FittedModel::Linear { fit, lags } => format!("lags={lags}\n{}", fit.to_kv()),
            FittedModel::Arima { cycle, period } => {
                let prefix = |name: &str, text: String| -> String {
                    text.lines().map(|l| format!("{name}.{l}\n")).collect()
                };
                prefix("cycle", cycle.to_kv()) + &prefix("period", period.to_kv())
            }
            FittedModel::Lstm {
                network,
                scaler,
                lags,
                ..
            } => format!(
                "{}scaler.min={}\nscaler.max={}\nlags={lags}\n",
                network.to_text(),
                crate::kv::join(&scaler.min),
                crate::kv::join(&scaler.max)
            ),
        }
    }
}

impl Predictor for FittedModel {
    fn predict_next(&self, history: &[[f64; 2]]) -> Result<[f64; 2]> {
        match self {
            FittedModel::Linear { fit, lags } => {
                let p = predict_linear(fit, &lag_row(history, *lags)?)?;
                Ok([p[0], p[1]])
            }
            FittedModel::Arima { cycle, period } => {
                let cycles: Vec<f64> = history.iter().map(|p| p[0]).collect();
                let periods: Vec<f64> = history.iter().map(|p| p[1]).collect();
                let c = forecast_arima(&cycle.conditioned_on(&cycles)?, 1)?;
                let p = forecast_arima(&period.conditioned_on(&periods)?, 1)?;
                Ok([c[0], p[0]])
            }
            FittedModel::Lstm {
                network, scaler, lags, ..
            } => {
                let row = lag_row(history, *lags)?;
                let scaled: Vec<f64> = row
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| scaler.scale_value(j % CHANNELS, v))
                    .collect();
                let out = forward_sequence(network, &scaled, Mode::Infer)?.prediction;
                Ok([scaler.unscale_value(0, out[0]), scaler.unscale_value(1, out[1])])
            }
        }
    }

    fn as_fitted(&self) -> Option<&FittedModel> {
        Some(self)
    }
}

/// Default spec for each model kind; the LSTM follows the case regime.
pub fn default_spec(tag: ModelKindTag, case: CaseId, seed: u64) -> ModelSpec {
    ModelSpec::new(match tag {
        ModelKindTag::Ols => ModelKind::Ols,
        ModelKindTag::Huber => ModelKind::Huber(HuberConfig::default()),
        ModelKindTag::Lasso => ModelKind::Lasso(LassoConfig::default()),
        ModelKindTag::Omp => ModelKind::Omp(OmpConfig::default()),
        ModelKindTag::Arima => ModelKind::Arima(ArimaConfig::default()),
        ModelKindTag::Lstm => ModelKind::Lstm(LstmSpec::for_case(case, seed)),
    })
}
