use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use cyclecast::datagen::DEFAULT_SEED;
use cyclecast::eval::{table_to_csv, table_to_text, Channels, Protocol, DEFAULT_HORIZON};
use cyclecast::features::DEFAULT_LAGS;
use cyclecast::lstm::Architecture;
use cyclecast::models::{default_spec, Forecaster, ModelKind, ModelKindTag};
use cyclecast::report::{eval_metadata, RunDescription};
use cyclecast::{compare_models, CaseId, CycleSeries, EvalConfig, GeneratorConfig, ModelSpec};

use crate::error::{CliError, CliResult};
use crate::io::{read_input, read_optional, sibling, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Cycle,
    Period,
    Both,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Series CSV written by `gen` (or any CSV in the same format)
    #[arg(long)]
    pub input: PathBuf,
    /// Comparison table CSV; companion files share its stem
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ols,huber,lasso,omp,arima,lstm")]
    pub models: Vec<ModelKindTag>,
    /// Number of withheld cycles
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: usize,
    /// `recursive` or `rolling`
    #[arg(long, default_value = "recursive")]
    pub protocol: Protocol,
    #[arg(long, value_enum, default_value = "both")]
    pub channels: ChannelArg,
    /// Round predictions to whole days before scoring
    #[arg(long)]
    pub round: bool,
    /// Window length for the window-based models
    #[arg(long, default_value_t = DEFAULT_LAGS)]
    pub lags: usize,
    /// Case whose LSTM defaults apply; inferred from the series config when omitted
    #[arg(long)]
    pub case: Option<CaseId>,
    #[arg(long, env = "CYCLECAST_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// `single64` or `stacked`
    #[arg(long)]
    pub architecture: Option<Architecture>,
    /// Directory for fitted model artifacts
    #[arg(long)]
    pub save_dir: Option<PathBuf>,
}

impl EvalArgs {
    fn build_specs(&self, case: CaseId, seed: u64) -> CliResult<Vec<ModelSpec>> {
        let mut specs: Vec<ModelSpec> = Vec::new();
        for &tag in &self.models {
            if specs.iter().any(|s| s.kind_tag() == tag) {
                return Err(CliError::Usage(format!("model `{tag}` listed twice")));
            }
            let mut spec = default_spec(tag, case, seed).with_lags(self.lags);
            match &mut spec.kind {
                ModelKind::Ols => {}
                ModelKind::Huber(c) => c.delta = self.delta.unwrap_or(c.delta),
                ModelKind::Lasso(c) => c.lambda = self.lambda.unwrap_or(c.lambda),
                ModelKind::Omp(c) => c.max_predictors = self.k.unwrap_or(c.max_predictors),
                ModelKind::Arima(c) => {
                    c.p = self.p.unwrap_or(c.p);
                    c.d = self.d.unwrap_or(c.d);
                    c.q = self.q.unwrap_or(c.q);
                }
                ModelKind::Lstm(s) => {
                    s.train.epochs = self.epochs.unwrap_or(s.train.epochs);
                    s.train.learning_rate = self.learning_rate.unwrap_or(s.train.learning_rate);
                    s.train.architecture = self.architecture.unwrap_or(s.train.architecture);
                }
            }
            spec.validate().map_err(|e| CliError::Usage(format!("{tag}: {e}")))?;
            specs.push(spec);
        }
        if specs.is_empty() {
            return Err(CliError::Usage("no models selected".into()));
        }
        Ok(specs)
    }

    fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            horizon: self.horizon,
            protocol: self.protocol,
            channels: match self.channels {
                ChannelArg::Cycle => Channels::CycleOnly,
                ChannelArg::Period => Channels::PeriodOnly,
                ChannelArg::Both => Channels::Both,
            },
            round_predictions: self.round,
        }
    }
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let series = CycleSeries::from_csv(&read_input(&args.input)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.input.display())))?;
    let generator = match read_optional(&sibling(&args.input, ".cfg"))? {
        Some(text) => Some(GeneratorConfig::from_kv(&text)?),
        None => None,
    };
    let case = args
        .case
        .or_else(|| generator.as_ref().and_then(GeneratorConfig::matching_case));
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let specs = args.build_specs(case.unwrap_or(CaseId::Case1), seed)?;
    let config = args.eval_config();
    if config.horizon == 0 || config.horizon >= series.len() {
        return Err(CliError::Usage(format!(
            "horizon {} needs a series longer than {} cycles, found {}",
            config.horizon,
            config.horizon,
            series.len()
        )));
    }

    let models: Vec<&dyn Forecaster> = specs.iter().map(|s| s as &dyn Forecaster).collect();
    let comparison = compare_models(&models, &series, &config)?;

    write_atomic(&args.out, &table_to_csv(&comparison.rows))?;

    let label = args.input.display().to_string();
    let meta = eval_metadata(
        &RunDescription {
            series_label: &label,
            n_cycles: series.len(),
            case,
            generator: generator.as_ref(),
            config: &config,
            specs: &specs,
        },
        &comparison.runs,
    );
    write_atomic(&sibling(&args.out, ".meta.txt"), &meta)?;

    let mut predictions = String::from("model,step,actual_cycle,actual_period,predicted_cycle,predicted_period\n");
    let mut loss_curve = None;
    for (tag, run) in &comparison.runs {
        let Ok(run) = run else { continue };
        for (step, (a, p)) in run.actual.iter().zip(&run.predicted).enumerate() {
            let _ = writeln!(predictions, "{tag},{},{},{},{},{}", step + 1, a[0], a[1], p[0], p[1]);
        }
        if let Some(fitted) = run.model.as_fitted() {
            if let Some(curve) = fitted.loss_curve() {
                loss_curve = Some(curve.to_vec());
            }
            if let Some(dir) = &args.save_dir {
                save_artifact(dir, tag, &fitted.to_text())?;
            }
        }
    }
    write_atomic(&sibling(&args.out, ".predictions.csv"), &predictions)?;
    if let Some(curve) = loss_curve {
        let mut text = String::from("epoch,loss\n");
        for (i, loss) in curve.iter().enumerate() {
            let _ = writeln!(text, "{},{loss}", i + 1);
        }
        write_atomic(&sibling(&args.out, ".lstm_loss.csv"), &text)?;
    }

    print!("{}", table_to_text(&comparison.rows));
    Ok(())
}

fn save_artifact(dir: &Path, tag: &str, text: &str) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_atomic(&dir.join(format!("{tag}.model.txt")), text)
}
