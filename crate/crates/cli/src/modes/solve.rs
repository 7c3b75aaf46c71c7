use cwbnlw_core::q_solver::{OuterRecord, ResidualReport};
use cwbnlw_core::{solve_coupled, verify_solution, CoupledSolution, SolutionBundle};
use serde::Serialize;

use super::{solver_config, verdict, ModeOutcome};
use crate::config::RunConfig;
use crate::output::{Artifacts, Cell};
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub bundle: SolutionBundle,
    pub outer: Vec<OuterRecord>,
    pub residual_ok: bool,
    pub tail_ok: bool,
}

impl SolveReport {
    pub fn pass(&self) -> bool {
        self.residual_ok && self.tail_ok
    }
}

/// Solves the configured instance and audits the residual.
pub fn compute(cfg: &RunConfig) -> Result<(CoupledSolution, SolveReport), CliError> {
    let params = cfg.problem.params()?;
    let sol = solve_coupled(cfg.problem.p0, &params, &solver_config(cfg, &cfg.schedule))?;
    let report: ResidualReport = verify_solution(
        &sol.u,
        sol.state.lambda_sq,
        &params,
        cfg.solver.audit_radius,
        cfg.solver.gevrey_c,
        &Default::default(),
    )?;
    let residual_ok = report.sup_residual < cfg.solver.residual_tol;
    let tail_ok = report.tail_ok();
    let bundle = SolutionBundle {
        params,
        lambda: sol.state.lambda,
        p0: sol.state.p0,
        p_m: sol.state.p_m.clone(),
        field: sol.u.clone(),
        residual_report: report,
    };
    let out = SolveReport {
        bundle,
        outer: sol.outer.clone(),
        residual_ok,
        tail_ok,
    };
    Ok((sol, out))
}

pub fn run(cfg: &RunConfig, out: &mut Artifacts) -> Result<ModeOutcome, CliError> {
    let (sol, report) = compute(cfg)?;
    out.json("solution.json", &report)?;
    let rows: Vec<Vec<Cell>> = sol
        .p_trace
        .iter()
        .map(|s| {
            let cert = s.last_certificate();
            vec![
                Cell::from(s.j as u64),
                s.n_j.into(),
                s.residual_norm.into(),
                s.accepted.into(),
                cert.map_or(f64::NAN, |c| c.l2_norm).into(),
                cert.map_or(f64::NAN, |c| c.l2_bound).into(),
                cert.is_some_and(|c| c.offdiag_ok).into(),
            ]
        })
        .collect();
    out.csv(
        "trace.csv",
        &[
            "j",
            "n_j",
            "residual_l2",
            "accepted",
            "inv_l2",
            "inv_bound",
            "offdiag_ok",
        ],
        &rows,
    )?;
    let outer: Vec<Vec<Cell>> = sol
        .outer
        .iter()
        .map(|o| {
            vec![
                o.iteration.into(),
                o.lambda.into(),
                o.sigma.into(),
                o.change.into(),
                o.p_residual.into(),
            ]
        })
        .collect();
    out.csv(
        "outer.csv",
        &["iteration", "lambda", "sigma", "change", "p_residual"],
        &outer,
    )?;
    let r = &report.bundle.residual_report;
    Ok(ModeOutcome {
        passed: report.pass(),
        lines: vec![
            format!("lambda = {:.16e}", report.bundle.lambda),
            format!("sup residual {:.3e}: {}", r.sup_residual, verdict(report.residual_ok)),
            format!(
                "gevrey tail {:.3e} < {:.3e}: {}",
                r.gevrey_tail,
                r.tail_bound,
                verdict(report.tail_ok)
            ),
        ],
    })
}
