use std::path::PathBuf;

use clap::Args;
use cyclecast::eval::table_from_csv;
use cyclecast::report::{parse_meta, render_report, ReportInput};

use crate::error::{CliError, CliResult};
use crate::io::{read_input, read_optional, sibling, write_atomic};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Comparison tables written by `eval`
    #[arg(long, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &ReportArgs) -> CliResult<()> {
    if args.inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one --inputs table".into()));
    }
    let mut inputs = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let rows = table_from_csv(&read_input(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let meta = read_optional(&sibling(path, ".meta.txt"))?
            .map(|t| parse_meta(&t))
            .unwrap_or_default();
        inputs.push(ReportInput {
            label: path.display().to_string(),
            meta,
            rows,
        });
    }
    write_atomic(&args.out, &render_report(&inputs))?;
    println!("wrote {} section(s) to {}", inputs.len(), args.out.display());
    Ok(())
}
