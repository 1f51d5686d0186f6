//! Holdout evaluation: the last `horizon` cycles are withheld, every model is
//! fit once on the rest and then forecasts the withheld block.

use std::fmt;
use std::str::FromStr;

use crate::datagen::CycleSeries;
use crate::error::{Error, Result};
use crate::features::train_test_split;
use crate::models::{Forecaster, Predictor};

pub const DEFAULT_HORIZON: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Predictions are fed back as lags for later holdout steps.
    RecursiveMultiStep,
    /// Each holdout step sees the true history; the model is not refit.
    RollingOneStep,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::RecursiveMultiStep => "recursive",
            Protocol::RollingOneStep => "rolling",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "recursive" => Ok(Protocol::RecursiveMultiStep),
            "rolling" => Ok(Protocol::RollingOneStep),
            other => Err(Error::InvalidConfig(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Cycle,
    Period,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Cycle => "cycle",
            Channel::Period => "period",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cycle" => Ok(Channel::Cycle),
            "period" => Ok(Channel::Period),
            other => Err(Error::InvalidConfig(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    CycleOnly,
    PeriodOnly,
    Both,
}

impl Channels {
    pub fn as_str(self) -> &'static str {
        match self {
            Channels::CycleOnly => "cycle",
            Channels::PeriodOnly => "period",
            Channels::Both => "both",
        }
    }

    pub fn selected(self) -> &'static [Channel] {
        match self {
            Channels::CycleOnly => &[Channel::Cycle],
            Channels::PeriodOnly => &[Channel::Period],
            Channels::Both => &[Channel::Cycle, Channel::Period],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    pub horizon: usize,
    pub protocol: Protocol,
    pub channels: Channels,
    /// Round predictions to whole days before scoring.
    pub round_predictions: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            protocol: Protocol::RecursiveMultiStep,
            channels: Channels::Both,
            round_predictions: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

/// MAE, MSE and RMSE = sqrt(MSE) over aligned sequences.
pub fn compute_metrics(actual: &[f64], predicted: &[f64]) -> Result<Metrics> {
    if actual.is_empty() {
        return Err(Error::EmptyInput("metric inputs"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::Shape {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    let n = actual.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (a, p) in actual.iter().zip(predicted) {
        let e = a - p;
        abs += e.abs();
        sq += e * e;
    }
    let mse = sq / n;
    Ok(Metrics {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub model_tag: String,
    pub channel: Channel,
    pub protocol: Protocol,
    pub horizon: usize,
    pub metrics: Metrics,
}

/// Everything one model produced on one holdout.
pub struct EvalRun {
    pub model_tag: String,
    pub reports: Vec<MetricReport>,
    pub actual: Vec<[f64; 2]>,
    /// Raw model outputs, before any rounding.
    pub predicted: Vec<[f64; 2]>,
    pub model: Box<dyn Predictor>,
}

impl fmt::Debug for EvalRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvalRun")
            .field("model_tag", &self.model_tag)
            .field("reports", &self.reports)
            .field("actual", &self.actual)
            .field("predicted", &self.predicted)
            .finish_non_exhaustive()
    }
}

/// Fits `model` on all but the last `horizon` cycles and scores its forecasts
/// of the withheld cycles under `config.protocol`.
pub fn rolling_eval(model: &dyn Forecaster, series: &CycleSeries, config: &EvalConfig) -> Result<EvalRun> {
    if config.horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    let (train, actual) = train_test_split(series, config.horizon)?;
    let fitted = model.fit(&train)?;

    let mut history = train.pairs();
    let mut predicted = Vec::with_capacity(actual.len());
    for truth in &actual {
        let next = fitted.predict_next(&history)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{} produced a non-finite forecast", model.tag())));
        }
        predicted.push(next);
        history.push(match config.protocol {
            Protocol::RecursiveMultiStep => next,
            Protocol::RollingOneStep => *truth,
        });
    }

    let mut reports = Vec::new();
    for &channel in config.channels.selected() {
        let c = channel.index();
        let a: Vec<f64> = actual.iter().map(|p| p[c]).collect();
        let p: Vec<f64> = predicted
            .iter()
            .map(|p| if config.round_predictions { p[c].round() } else { p[c] })
            .collect();
        reports.push(MetricReport {
            model_tag: model.tag(),
            channel,
            protocol: config.protocol,
            horizon: config.horizon,
            metrics: compute_metrics(&a, &p)?,
        });
    }
    Ok(EvalRun {
        model_tag: model.tag(),
        reports,
        actual,
        predicted,
        model: fitted,
    })
}

/// One row of the comparison table; a failed model keeps its row with the
/// failure message in place of metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model_tag: String,
    pub channel: Channel,
    pub protocol: Protocol,
    pub horizon: usize,
    pub outcome: std::result::Result<Metrics, String>,
}

#[derive(Debug)]
pub struct Comparison {
    pub rows: Vec<TableRow>,
    /// Per model in input order.
    pub runs: Vec<(String, Result<EvalRun>)>,
}

pub const TABLE_HEADER: &str = "model,channel,mae,mse,rmse,horizon,protocol";

/// Evaluates every model on the same holdout, each on its own thread.
///
/// Rows are grouped by channel (cycle first) and sorted by MAE, then RMSE,
/// then tag; failed models sort last within their channel.
pub fn compare_models(models: &[&dyn Forecaster], series: &CycleSeries, config: &EvalConfig) -> Result<Comparison> {
    if models.is_empty() {
        return Err(Error::EmptyInput("model list"));
    }
    if config.horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    if config.horizon >= series.len() {
        return Err(Error::InsufficientHistory {
            required: config.horizon + 1,
            available: series.len(),
        });
    }
    let runs: Vec<(String, Result<EvalRun>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = models
            .iter()
            .map(|m| scope.spawn(move || (m.tag(), rolling_eval(*m, series, config))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation thread panicked"))
            .collect()
    });

    let mut rows = Vec::new();
    for (tag, run) in &runs {
        for &channel in config.channels.selected() {
            let outcome = match run {
                Ok(run) => Ok(run
                    .reports
                    .iter()
                    .find(|r| r.channel == channel)
                    .map(|r| r.metrics)
                    .expect("report per selected channel")),
                Err(e) => Err(e.to_string()),
            };
            rows.push(TableRow {
                model_tag: tag.clone(),
                channel,
                protocol: config.protocol,
                horizon: config.horizon,
                outcome,
            });
        }
    }
    sort_rows(&mut rows);
    Ok(Comparison { rows, runs })
}

pub fn sort_rows(rows: &mut [TableRow]) {
    rows.sort_by(|a, b| {
        a.channel.cmp(&b.channel).then_with(|| match (&a.outcome, &b.outcome) {
            (Ok(x), Ok(y)) => x
                .mae
                .total_cmp(&y.mae)
                .then(x.rmse.total_cmp(&y.rmse))
                .then_with(|| a.model_tag.cmp(&b.model_tag)),
            (Ok(_), Err(_)) => std::cmp::Ordering::Less,
            (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
            (Err(_), Err(_)) => a.model_tag.cmp(&b.model_tag),
        })
    });
}

/// Comparison table as CSV; failed rows carry `NaN` metrics.
pub fn table_to_csv(rows: &[TableRow]) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in rows {
        let (mae, mse, rmse) = match &r.outcome {
            Ok(m) => (m.mae, m.mse, m.rmse),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        out.push_str(&format!(
            "{},{},{mae},{mse},{rmse},{},{}\n",
            r.model_tag, r.channel, r.horizon, r.protocol
        ));
    }
    out
}

/// Reads a table written by [`table_to_csv`]. `NaN` rows come back as
/// failures with an empty message.
pub fn table_from_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TABLE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                field: "header".into(),
                reason: format!("expected `{TABLE_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: line_no,
                field: "row".into(),
                reason: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let err = |field: &str, reason: String| Error::Parse {
            line: line_no,
            field: field.into(),
            reason,
        };
        let num = |k: usize, name: &str| -> Result<f64> {
            fields[k].parse::<f64>().map_err(|e| err(name, e.to_string()))
        };
        let (mae, mse, rmse) = (num(2, "mae")?, num(3, "mse")?, num(4, "rmse")?);
        let outcome = if mae.is_nan() {
            Err(String::new())
        } else {
            Ok(Metrics { mae, mse, rmse })
        };
        rows.push(TableRow {
            model_tag: fields[0].to_string(),
            channel: fields[1].parse().map_err(|e: Error| err("channel", e.to_string()))?,
            horizon: fields[5].parse().map_err(|e: std::num::ParseIntError| err("horizon", e.to_string()))?,
            protocol: fields[6].parse().map_err(|e: Error| err("protocol", e.to_string()))?,
            outcome,
        });
    }
    Ok(rows)
}

/// Fixed-width text rendering of the comparison table.
pub fn table_to_text(rows: &[TableRow]) -> String {
    let header = ["model", "channel", "MAE", "MSE", "RMSE", "h", "protocol"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let metric = |v: Option<f64>| v.map_or("failed".to_string(), |v| format!("{v:.4}"));
        let m = r.outcome.as_ref().ok();
        cells.push(vec![
            r.model_tag.clone(),
            r.channel.to_string(),
            metric(m.map(|m| m.mae)),
            metric(m.map(|m| m.mse)),
            metric(m.map(|m| m.rmse)),
            r.horizon.to_string(),
            r.protocol.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| if c < 2 { format!("{s:<w$}") } else { format!("{s:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    for r in rows {
        if let Err(msg) = &r.outcome {
            if !msg.is_empty() && r.channel == Channel::Cycle {
                out.push_str(&format!("{} failed: {msg}\n", r.model_tag));
            }
        }
    }
    out
}
