//! Scan of `p0 ∈ [1, 2]` recording which amplitudes the construction excludes.

use cwbnlw_core::{solve_coupled, Error};
use rayon::prelude::*;
use serde::Serialize;

use super::{p0_grid, solver_config, verdict, ModeOutcome};
use crate::config::RunConfig;
use crate::output::{Artifacts, Cell};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSample {
    pub eps: f64,
    pub p0: f64,
    pub included: bool,
    pub lambda: Option<f64>,
    /// The certificate failure or error behind an exclusion.
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanLevel {
    pub eps: f64,
    pub samples: usize,
    pub excluded: usize,
    pub excluded_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub levels: Vec<ScanLevel>,
    pub samples: Vec<ScanSample>,
    /// Excluded fraction never grows as `ε` decreases.
    pub nonincreasing: bool,
}

impl ScanReport {
    pub fn pass(&self) -> bool {
        self.nonincreasing && self.samples.iter().all(|s| s.included || s.reason.is_some())
    }
}

fn sample(cfg: &RunConfig, eps: f64, p0: f64) -> ScanSample {
    let result = cfg
        .problem
        .params()
        .map(|p| p.with_eps(eps))
        .and_then(|p| solve_coupled(p0, &p, &solver_config(cfg, &cfg.schedule)));
    match result {
        Ok(sol) => ScanSample {
            eps,
            p0,
            included: true,
            lambda: Some(sol.state.lambda),
            reason: None,
        },
        Err(e) => ScanSample {
            eps,
            p0,
            included: false,
            lambda: None,
            reason: Some(match e {
                Error::ExcludedParameter { reason, .. } => reason,
                other => other.to_string(),
            }),
        },
    }
}

pub fn compute(cfg: &RunConfig) -> ScanReport {
    let mut grid = cfg.scan.eps_grid.clone();
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite eps"));
    let p0s = p0_grid(cfg.scan.samples);
    let jobs: Vec<(f64, f64)> = grid.iter().flat_map(|&e| p0s.iter().map(move |&p| (e, p))).collect();
    let samples: Vec<ScanSample> = jobs.into_par_iter().map(|(e, p)| sample(cfg, e, p)).collect();
    let levels: Vec<ScanLevel> = grid
        .iter()
        .map(|&eps| {
            let at: Vec<&ScanSample> = samples.iter().filter(|s| s.eps == eps).collect();
            let excluded = at.iter().filter(|s| !s.included).count();
            ScanLevel {
                eps,
                samples: at.len(),
                excluded,
                excluded_fraction: excluded as f64 / at.len().max(1) as f64,
            }
        })
        .collect();
    let nonincreasing = levels
        .windows(2)
        .all(|w| w[1].excluded_fraction <= w[0].excluded_fraction);
    ScanReport {
        levels,
        samples,
        nonincreasing,
    }
}

pub fn run(cfg: &RunConfig, out: &mut Artifacts) -> Result<ModeOutcome, CliError> {
    let report = compute(cfg);
    let rows: Vec<Vec<Cell>> = report
        .samples
        .iter()
        .map(|s| {
            vec![
                s.eps.into(),
                s.p0.into(),
                s.included.into(),
                s.lambda.unwrap_or(f64::NAN).into(),
                s.reason.clone().unwrap_or_default().into(),
            ]
        })
        .collect();
    out.csv("scan.csv", &["eps", "p0", "included", "lambda", "reason"], &rows)?;
    out.json("scan_summary.json", &report.levels)?;
    let mut lines: Vec<String> = report
        .levels
        .iter()
        .map(|l| format!("eps {:.3e}: excluded {}/{}", l.eps, l.excluded, l.samples))
        .collect();
    lines.push(format!("nonincreasing trend: {}", verdict(report.nonincreasing)));
    Ok(ModeOutcome {
        passed: report.pass(),
        lines,
    })
}
