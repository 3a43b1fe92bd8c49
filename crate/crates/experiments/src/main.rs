use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use umac_experiments::{run, Config, Experiment};

/// Run one experiment and write its CSV tables and report.
#[derive(Debug, Parser)]
#[command(name = "umac", version)]
struct Cli {
    /// fig6, aloha_sweep, coded_sweep, table2, protocol_demo or custom.
    experiment: Experiment,
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Caps every trial count at 10^4.
    #[arg(long)]
    fast: bool,
    /// Exit with status 3 if any threshold check fails.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match Config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("umac: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    cfg.fast |= cli.fast;
    let result = run(cli.experiment, &cfg).and_then(|r| r.write(&cfg).map(|files| (r, files)));
    let (output, files) = match result {
        Ok(v) => v,
        Err(e) => {
            eprintln!("umac: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    for n in &output.outcome.notes {
        println!("{n}");
    }
    for f in &files {
        println!("wrote {}", f.display());
    }
    if cli.check {
        for c in &output.outcome.checks {
            println!("{}", c.line());
        }
        if !output.checks_pass() {
            return ExitCode::from(3);
        }
    }
    ExitCode::SUCCESS
}
