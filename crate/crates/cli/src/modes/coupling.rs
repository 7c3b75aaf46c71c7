//! Seeded property runs of the two coupling lemmas and replay of dumped
//! instances.

use std::path::Path;

use cwbnlw_core::coupling::{
    audit_c1, audit_c2, gen_c1_instance, gen_c2_instance, verify_c1, verify_c2, C1Constants, C2Constants, C2Layout,
    CouplingInstance,
};
use rayon::prelude::*;
use serde::Serialize;

use super::{verdict, ModeOutcome};
use crate::config::RunConfig;
use crate::output::{Artifacts, Cell};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    GenerationFailed,
    HypothesisFailed,
    Violation,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceOutcome {
    pub lemma: &'static str,
    pub d: usize,
    /// The swept constant: tail exponent for the first lemma, `C` for the
    /// second.
    pub grid: f64,
    pub seed: u64,
    pub status: Status,
    /// Worst ratio of the norm or entry bound, below 1 when it holds.
    pub bound_ratio: f64,
    pub decay_ratio: f64,
    pub detail: Vec<String>,
    #[serde(skip)]
    pub instance: Option<CouplingInstance>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub outcomes: Vec<InstanceOutcome>,
    pub c1_tested: usize,
    pub c2_tested: usize,
    pub generation_failed: usize,
    pub hypothesis_failed: usize,
    pub violations: usize,
}

impl CouplingReport {
    pub fn pass(&self) -> bool {
        self.violations == 0 && self.c1_tested > 0 && self.c2_tested > 0
    }
}

/// Audits then verifies one instance. A failed audit skips verification.
pub fn check(instance: &CouplingInstance) -> (Status, f64, f64, Vec<String>) {
    match instance {
        CouplingInstance::C1(inst) => {
            let bad = audit_c1(inst);
            if !bad.is_empty() {
                return (Status::HypothesisFailed, f64::NAN, f64::NAN, bad);
            }
            match verify_c1(inst) {
                Ok(r) => (
                    if r.pass() { Status::Pass } else { Status::Violation },
                    r.max_entry / r.entry_bound,
                    r.worst_decay_ratio,
                    Vec::new(),
                ),
                Err(e) => (Status::Violation, f64::NAN, f64::NAN, vec![e.to_string()]),
            }
        }
        CouplingInstance::C2(inst) => {
            let bad = audit_c2(inst);
            if !bad.is_empty() {
                return (Status::HypothesisFailed, f64::NAN, f64::NAN, bad);
            }
            match verify_c2(inst) {
                Ok(r) => (
                    if r.pass() { Status::Pass } else { Status::Violation },
                    r.inv_norm / r.norm_bound,
                    r.worst_decay_ratio,
                    Vec::new(),
                ),
                Err(e) => (Status::Violation, f64::NAN, f64::NAN, vec![e.to_string()]),
            }
        }
    }
}

enum Job {
    C1 {
        d: usize,
        side: i64,
        constants: C1Constants,
        seed: u64,
    },
    C2 {
        d: usize,
        layout: C2Layout,
        constants: C2Constants,
        seed: u64,
    },
}

fn run_job(job: Job) -> InstanceOutcome {
    let (lemma, d, grid, seed, generated) = match job {
        Job::C1 {
            d,
            side,
            constants,
            seed,
        } => (
            "c1",
            d,
            constants.c_tail,
            seed,
            gen_c1_instance(seed, side, constants, d).map(CouplingInstance::C1),
        ),
        Job::C2 {
            d,
            layout,
            constants,
            seed,
        } => (
            "c2",
            d,
            constants.c_exp,
            seed,
            gen_c2_instance(seed, &layout, constants, d).map(CouplingInstance::C2),
        ),
    };
    match generated {
        Err(e) => InstanceOutcome {
            lemma,
            d,
            grid,
            seed,
            status: Status::GenerationFailed,
            bound_ratio: f64::NAN,
            decay_ratio: f64::NAN,
            detail: vec![e.to_string()],
            instance: None,
        },
        Ok(inst) => {
            let (status, bound_ratio, decay_ratio, detail) = check(&inst);
            InstanceOutcome {
                lemma,
                d,
                grid,
                seed,
                status,
                bound_ratio,
                decay_ratio,
                detail,
                instance: Some(inst),
            }
        }
    }
}

pub fn compute(cfg: &RunConfig) -> CouplingReport {
    let c = &cfg.coupling;
    let base = cfg.seed.wrapping_mul(1_000_003);
    let mut jobs = Vec::new();
    for &d in &c.c1_dims {
        for &c_tail in &c.c1_tail_grid {
            for s in 0..c.seeds {
                jobs.push(Job::C1 {
                    d,
                    side: c.c1_side,
                    constants: C1Constants { c_tail, ..c.c1.clone() },
                    seed: base + s,
                });
            }
        }
    }
    for (&d, &side) in c.c2_dims.iter().zip(&c.c2_sides) {
        for &c_exp in &c.c2_exp_grid {
            for s in 0..c.seeds {
                jobs.push(Job::C2 {
                    d,
                    layout: C2Layout {
                        side,
                        clusters: c.c2_clusters,
                        cluster_size: c.c2_cluster_size,
                    },
                    constants: C2Constants { c_exp, ..c.c2.clone() },
                    seed: base + s,
                });
            }
        }
    }
    let mut outcomes: Vec<InstanceOutcome> = jobs.into_par_iter().map(run_job).collect();
    let count = |st: Status| outcomes.iter().filter(|o| o.status == st).count();
    let tested = |lemma: &str| {
        outcomes
            .iter()
            .filter(|o| o.lemma == lemma && matches!(o.status, Status::Pass | Status::Violation))
            .count()
    };
    let report_counts = (
        tested("c1"),
        tested("c2"),
        count(Status::GenerationFailed),
        count(Status::HypothesisFailed),
        count(Status::Violation),
    );
    // instances are only kept for replay dumps
    for o in &mut outcomes {
        if o.status != Status::Violation {
            o.instance = None;
        }
    }
    CouplingReport {
        outcomes,
        c1_tested: report_counts.0,
        c2_tested: report_counts.1,
        generation_failed: report_counts.2,
        hypothesis_failed: report_counts.3,
        violations: report_counts.4,
    }
}

pub fn run(cfg: &RunConfig, out: &mut Artifacts) -> Result<ModeOutcome, CliError> {
    let report = compute(cfg);
    let rows: Vec<Vec<Cell>> = report
        .outcomes
        .iter()
        .map(|o| {
            vec![
                o.lemma.into(),
                o.d.into(),
                o.grid.into(),
                o.seed.into(),
                format!("{:?}", o.status).into(),
                o.bound_ratio.into(),
                o.decay_ratio.into(),
            ]
        })
        .collect();
    out.csv(
        "coupling.csv",
        &["lemma", "d", "grid", "seed", "status", "bound_ratio", "decay_ratio"],
        &rows,
    )?;
    let mut lines = Vec::new();
    for o in report.outcomes.iter().filter(|o| o.status == Status::Violation) {
        if let Some(inst) = &o.instance {
            let path = out.json(&format!("replay_{}_d{}_seed{}.json", o.lemma, o.d, o.seed), inst)?;
            lines.push(format!("violation dumped to {}", path.display()));
        }
    }
    out.json("coupling.json", &report)?;
    lines.push(format!(
        "tested c1 {} / c2 {}, generation failures {}, hypothesis failures {}",
        report.c1_tested, report.c2_tested, report.generation_failed, report.hypothesis_failed
    ));
    lines.push(format!(
        "conclusion violations {}: {}",
        report.violations,
        verdict(report.pass())
    ));
    Ok(ModeOutcome {
        passed: report.pass(),
        lines,
    })
}

/// Loads an instance dump, bare or wrapped in the artifact envelope.
pub fn load_replay(path: &Path) -> Result<CouplingInstance, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read replay file {}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(data) = value.get_mut("data") {
        value = data.take();
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Re-audits and re-verifies a dumped instance; passes only when the
/// hypotheses and the conclusions both hold.
pub fn replay(path: &Path, out: &mut Artifacts) -> Result<ModeOutcome, CliError> {
    let instance = load_replay(path)?;
    let (status, bound_ratio, decay_ratio, detail) = check(&instance);
    #[derive(Serialize)]
    struct Replay<'a> {
        status: Status,
        bound_ratio: f64,
        decay_ratio: f64,
        detail: &'a [String],
    }
    out.json(
        "replay_result.json",
        &Replay {
            status,
            bound_ratio,
            decay_ratio,
            detail: &detail,
        },
    )?;
    let mut lines = vec![format!(
        "replay {}: {:?} (bound ratio {bound_ratio:.3e}, decay ratio {decay_ratio:.3e})",
        path.display(),
        status
    )];
    lines.extend(detail);
    Ok(ModeOutcome {
        passed: status == Status::Pass,
        lines,
    })
}
