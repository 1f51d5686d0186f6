use std::path::PathBuf;

use clap::Args;
use cyclecast::datagen::{ChannelSummary, DEFAULT_N_CYCLES, DEFAULT_SEED};
use cyclecast::{case_preset, generate, summarize, CaseId};

use crate::error::CliResult;
use crate::io::{sibling, write_atomic};

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Regularity case: 1, 2 or 3
    #[arg(long, default_value = "1")]
    pub case: CaseId,
    /// Number of cycles to generate
    #[arg(long, default_value_t = DEFAULT_N_CYCLES)]
    pub n: usize,
    #[arg(long, env = "CYCLECAST_SEED")]
    pub seed: Option<u64>,
    /// Series CSV; the generator config is written next to it as `<stem>.cfg`
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenArgs) -> CliResult<()> {
    let config = case_preset(args.case)
        .with_n_cycles(args.n)
        .with_seed(args.seed.unwrap_or(DEFAULT_SEED));
    config.validate()?;
    let series = generate(&config)?;
    write_atomic(&args.out, &series.to_csv())?;
    write_atomic(&sibling(&args.out, ".cfg"), &config.to_kv())?;

    let summary = summarize(&series)?;
    println!("{} cycles, {} (seed {})", series.len(), args.case, config.seed);
    print_channel("cycle", &summary.cycle);
    print_channel("period", &summary.period);
    Ok(())
}

fn print_channel(name: &str, s: &ChannelSummary) {
    println!(
        "{name:<7} mean {:.3}  std {:.3}  min {}  q1 {}  median {}  q3 {}  max {}",
        s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max
    );
}
