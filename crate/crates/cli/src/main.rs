//! `cyclecast`: generate synthetic cycle series, compare forecasters on them,
//! and emit reports and plot-ready CSVs.

mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{eval::EvalArgs, gen::GenArgs, plotdata::PlotArgs, report::ReportArgs};

#[derive(Debug, Parser)]
#[command(name = "cyclecast", version, about = "Synthetic menstrual-cycle series and forecaster comparison")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic series for one of the three cases
    Gen(GenArgs),
    /// Fit and score models on a held-out block of a series
    Eval(EvalArgs),
    /// Collect comparison tables into one markdown document
    Report(ReportArgs),
    /// Write histogram, boxplot, prediction and loss-curve CSVs
    Plotdata(PlotArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Report(args) => commands::report::run(args),
        Command::Plotdata(args) => commands::plotdata::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
