//! Config-driven experiment runner: each experiment turns one config
//! section into CSV tables, a run report and optional threshold checks.

pub mod config;
pub mod output;
pub mod runners;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

pub use config::Config;
pub use output::{Check, CsvTable, RunReport};

/// Crate version, echoed in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Trial cap under `--fast`.
pub const FAST_TRIALS: u64 = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError::Config(msg.into())
    }

    /// Process exit code for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } => 1,
        }
    }
}

impl From<umac_core::Error> for RunError {
    // Every core failure reachable from a runner stems from a parameter
    // value or an input file, so it is reported as a config error.
    fn from(e: umac_core::Error) -> Self {
        RunError::Config(e.to_string())
    }
}

pub type RunResult<T> = Result<T, RunError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Fig6,
    AlohaSweep,
    CodedSweep,
    Table2,
    ProtocolDemo,
    Custom,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Fig6,
        Experiment::AlohaSweep,
        Experiment::CodedSweep,
        Experiment::Table2,
        Experiment::ProtocolDemo,
        Experiment::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig6 => "fig6",
            Experiment::AlohaSweep => "aloha_sweep",
            Experiment::CodedSweep => "coded_sweep",
            Experiment::Table2 => "table2",
            Experiment::ProtocolDemo => "protocol_demo",
            Experiment::Custom => "custom",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment `{s}`, expected one of: {}", names.join(", "))
        })
    }
}

/// Tables and checks produced by one runner.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub tables: Vec<CsvTable>,
    /// Free-form summary lines for the report.
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
}

/// Everything a run produces, ready to be written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outcome: Outcome,
    pub report: RunReport,
}

impl RunOutput {
    pub fn checks_pass(&self) -> bool {
        self.outcome.checks.iter().all(|c| c.pass)
    }

    /// Writes every table and the report under `cfg.out`, each atomically.
    pub fn write(&self, cfg: &Config) -> RunResult<Vec<PathBuf>> {
        let dir = &cfg.out;
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
        let mut written = Vec::new();
        for t in &self.outcome.tables {
            let path = dir.join(format!("{}.csv", t.name));
            output::write_atomic(&path, &t.render())?;
            written.push(path);
        }
        let path = dir.join(format!("{}_report.txt", self.report.experiment));
        output::write_atomic(&path, &self.report.render())?;
        written.push(path);
        Ok(written)
    }
}

/// Runs `experiment` under `cfg` without touching the file system.
pub fn run(experiment: Experiment, cfg: &Config) -> RunResult<RunOutput> {
    let start = Instant::now();
    let outcome = match experiment {
        Experiment::Fig6 => runners::fig6::run(cfg)?,
        Experiment::AlohaSweep => runners::aloha::run(cfg)?,
        Experiment::CodedSweep => runners::coded::run_sweep(cfg)?,
        Experiment::Table2 => runners::coded::run_table2(cfg)?,
        Experiment::ProtocolDemo => runners::protocol::run(cfg)?,
        Experiment::Custom => runners::coded::run_custom(cfg)?,
    };
    let report = RunReport {
        experiment: experiment.name().to_string(),
        version: VERSION.to_string(),
        seed: cfg.seed,
        fast: cfg.fast,
        generator: umac_core::rng::GENERATOR_NAME.to_string(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        config_echo: cfg.section_echo(experiment)?,
        tables: outcome.tables.clone(),
        notes: outcome.notes.clone(),
        checks: outcome.checks.clone(),
    };
    Ok(RunOutput { outcome, report })
}
