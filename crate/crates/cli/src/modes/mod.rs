//! One module per CLI mode. Each exposes a pure `compute` returning a
//! serializable report with a `pass` verdict, and a `run` that writes the
//! artifacts.

pub mod audit;
pub mod coupling;
pub mod diophantine;
pub mod scan;
pub mod separation;
pub mod solve;

use cwbnlw_core::{QOptions, ScaleSchedule, SolverConfig};

use crate::config::RunConfig;

/// Verdict and a few human-readable lines for the terminal.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOutcome {
    pub passed: bool,
    pub lines: Vec<String>,
}

pub(crate) fn solver_config(cfg: &RunConfig, schedule: &ScaleSchedule) -> SolverConfig {
    SolverConfig {
        schedule: schedule.clone(),
        q: QOptions {
            damping: cfg.solver.damping,
            tol: cfg.solver.tol,
            max_outer: cfg.solver.max_outer,
        },
        ..Default::default()
    }
}

/// Midpoints of `count` equal cells of `[1, 2]`.
pub fn p0_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| 1.0 + (i as f64 + 0.5) / count as f64).collect()
}

pub(crate) fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
