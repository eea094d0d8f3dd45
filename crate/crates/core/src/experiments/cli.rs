//! `snq-sim` command line.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::Parser;

use super::{parse_config, run_experiment};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "snq-sim",
    version,
    about = "Monte Carlo SNQ signaling experiments"
)]
struct Cli {
    /// Experiment config (flat key=value text).
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Suppresses the per-SNR summary.
    #[arg(long)]
    quiet: bool,
}

fn run(cli: &Cli) -> Result<()> {
    let text = fs::read_to_string(&cli.spec)?;
    let mut spec = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(trials) = cli.trials {
        spec.n_trials = trials;
    }
    let result = run_experiment(&spec)?;
    let csv = result.to_csv();
    match &cli.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    if !cli.quiet {
        for line in result.summary_lines() {
            eprintln!("{line}");
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the experiment and returns the
/// process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("snq-sim: {}: {e}", cli.spec.display());
            1
        }
    }
}
