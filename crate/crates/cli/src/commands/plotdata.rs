use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use cyclecast::datagen::ChannelSummary;
use cyclecast::CycleSeries;

use crate::error::{CliError, CliResult};
use crate::io::{read_input, read_optional, sibling, write_atomic};

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Series CSV: histograms and boxplot summaries
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Comparison table from `eval`: actual-vs-predicted and loss curve
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// One bin per integer day from the smallest to the largest value.
pub fn histogram(values: &[u32]) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    let (Some(&lo), Some(&hi)) = (values.iter().min(), values.iter().max()) else {
        return out;
    };
    for day in lo..=hi {
        let count = values.iter().filter(|&&v| v == day).count();
        let _ = writeln!(out, "{day},{},{count}", day + 1);
    }
    out
}

pub fn run(args: &PlotArgs) -> CliResult<()> {
    if args.series.is_none() && args.eval.is_none() {
        return Err(CliError::Usage("plotdata needs --series and/or --eval".into()));
    }
    let mut outputs: Vec<(&str, String)> = Vec::new();

    if let Some(path) = &args.series {
        let series = CycleSeries::from_csv(&read_input(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let cycles: Vec<u32> = series.records().iter().map(|r| r.cycle_length).collect();
        let periods: Vec<u32> = series.records().iter().map(|r| r.period_length).collect();
        outputs.push(("hist_cycle.csv", histogram(&cycles)));
        outputs.push(("hist_period.csv", histogram(&periods)));

        let mut boxplot = String::from("channel,min,q1,median,q3,max\n");
        for (name, values) in [("cycle", series.cycle_lengths()), ("period", series.period_lengths())] {
            let s = ChannelSummary::of(&values)?;
            let _ = writeln!(boxplot, "{name},{},{},{},{},{}", s.min, s.q1, s.median, s.q3, s.max);
        }
        outputs.push(("boxplot.csv", boxplot));
    }

    if let Some(table) = &args.eval {
        let predictions = sibling(table, ".predictions.csv");
        let text = read_input(&predictions)?;
        if !text.starts_with("model,step,") {
            return Err(CliError::Usage(format!("{}: not a predictions file", predictions.display())));
        }
        outputs.push(("actual_vs_predicted.csv", text));
        if let Some(curve) = read_optional(&sibling(table, ".lstm_loss.csv"))? {
            outputs.push(("loss_curve.csv", curve));
        }
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    for (name, contents) in &outputs {
        write_atomic(&args.out_dir.join(name), contents)?;
    }
    let names: Vec<&str> = outputs.iter().map(|(n, _)| *n).collect();
    println!("wrote {} to {}", names.join(", "), args.out_dir.display());
    Ok(())
}
