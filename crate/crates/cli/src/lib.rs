//! Command-line harness around the core crate.

// NaN must fail validation, so comparisons are negated on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod modes;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::RunConfig;
pub use modes::ModeOutcome;
pub use output::Artifacts;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or invalid configuration. Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running a mode. Exit code 1.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl From<cwbnlw_core::Error> for CliError {
    fn from(e: cwbnlw_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Solve,
    Scan,
    Separation,
    Diophantine,
    Coupling,
    Audit,
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replay: Option<PathBuf>,
}

/// Loads and validates the config, applying the overrides.
pub fn prepare(config: &Path, overrides: &Overrides) -> Result<(RunConfig, Vec<String>), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.output.dir = out.clone();
    }
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

/// Runs one mode and writes its artifacts.
pub fn execute(
    mode: Mode,
    cfg: &RunConfig,
    warnings: Vec<String>,
    replay: Option<&Path>,
) -> Result<ModeOutcome, CliError> {
    if replay.is_some() && mode != Mode::Coupling {
        return Err(CliError::Config("--replay is only valid with the coupling mode".into()));
    }
    let mut out = Artifacts::new(&cfg.output.dir, cfg.hash(), warnings)?;
    match mode {
        Mode::Solve => modes::solve::run(cfg, &mut out),
        Mode::Scan => modes::scan::run(cfg, &mut out),
        Mode::Separation => modes::separation::run(cfg, &mut out),
        Mode::Diophantine => modes::diophantine::run(cfg, &mut out),
        Mode::Coupling => match replay {
            Some(path) => modes::coupling::replay(path, &mut out),
            None => modes::coupling::run(cfg, &mut out),
        },
        Mode::Audit => modes::audit::run(cfg, &mut out),
    }
}

/// Full run: exit 0 iff every gating check passes, 1 on a failed check or
/// runtime error, 2 on a config error.
pub fn run(mode: Mode, config: &Path, overrides: &Overrides) -> i32 {
    let result = prepare(config, overrides).and_then(|(cfg, warnings)| {
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        execute(mode, &cfg, warnings, overrides.replay.as_deref())
    });
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.passed {
                0
            } else {
                eprintln!("gating checks failed");
                1
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
