//! Post-solve audits of the non-resonant scheme.

use cwbnlw_core::operator::{neumann_invert, NeumannReport};
use cwbnlw_core::p_solver::{tail_split_check, TailSplitReport};
use cwbnlw_core::q_solver::ResidualReport;
use cwbnlw_core::{
    assemble, invert_with_certificate, resonant_set, solve_coupled, verify_solution, InverseCertificate, OperatorKind,
    StepContext,
};
use rayon::prelude::*;
use serde::Serialize;

use super::{p0_grid, solver_config, verdict, ModeOutcome};
use crate::config::RunConfig;
use crate::output::{Artifacts, Cell};
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct ContractionAudit {
    pub residuals: Vec<f64>,
    /// `(j, r_j, r_{j+1}, r_j^q)` for the steps after the first.
    pub steps: Vec<(u32, f64, f64, f64)>,
    pub power: f64,
    pub contraction_ok: bool,
    pub tail: Vec<TailSplitReport>,
    pub tail_ok: bool,
    pub residual: ResidualReport,
    pub residual_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateSample {
    pub p0: f64,
    pub lambda: f64,
    pub n: i64,
    /// `ε² N^{4C3 + 2α + 5d}`, below 1 in the regime.
    pub regime: f64,
    pub certificate: Option<InverseCertificate>,
    pub neumann: Option<NeumannReport>,
    /// `max |dense - neumann| / max |dense|`.
    pub inverse_mismatch: f64,
    pub error: Option<String>,
}

impl CertificateSample {
    pub fn pass(&self, tol: f64) -> bool {
        self.error.is_none()
            && self.regime < 1.0
            && self.certificate.as_ref().is_some_and(|c| c.pass())
            && self.inverse_mismatch < tol
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub contraction: ContractionAudit,
    pub certificates: Vec<CertificateSample>,
    pub certificates_ok: bool,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.contraction.contraction_ok
            && self.contraction.tail_ok
            && self.contraction.residual_ok
            && self.certificates_ok
    }
}

/// Solves with the contraction schedule and checks `r_{j+1} <= r_j^q` after
/// the first step. Tail splits and the full residual are audited as well.
pub fn contraction(cfg: &RunConfig) -> Result<ContractionAudit, CliError> {
    let params = cfg.problem.params()?;
    let schedule = &cfg.audit.contraction_schedule;
    let scfg = solver_config(cfg, schedule);
    let sol = solve_coupled(cfg.problem.p0, &params, &scfg)?;
    let residuals: Vec<f64> = sol.p_trace.iter().map(|s| s.residual_norm).collect();
    let q = cfg.audit.contraction_power;
    let steps: Vec<(u32, f64, f64, f64)> = sol
        .p_trace
        .windows(2)
        .skip(1)
        .map(|w| {
            (
                w[1].j,
                w[0].residual_norm,
                w[1].residual_norm,
                w[0].residual_norm.powf(q),
            )
        })
        .collect();
    let contraction_ok = steps.iter().all(|(_, _, next, bound)| next <= bound);

    let s = resonant_set(&params);
    let amps = sol.state.amplitudes();
    let ctx = StepContext {
        amps: &amps,
        lambda_sq: sol.state.lambda_sq,
        schedule,
        params: &params,
        s: &s,
        conv: &scfg.conv,
        cert: &scfg.cert,
    };
    let tail = sol
        .p_trace
        .windows(2)
        .filter(|w| w[1].accepted)
        .map(|w| tail_split_check(&w[0], &w[1], &ctx, cfg.audit.tail_slack))
        .collect::<cwbnlw_core::Result<Vec<_>>>()?;
    let tail_ok = tail.iter().all(|t| t.near_ok && t.far_ok);
    let residual = verify_solution(
        &sol.u,
        sol.state.lambda_sq,
        &params,
        cfg.solver.audit_radius,
        cfg.solver.gevrey_c,
        &scfg.conv,
    )?;
    let residual_ok = residual.sup_residual < cfg.solver.residual_tol && residual.tail_ok();
    Ok(ContractionAudit {
        residuals,
        steps,
        power: q,
        contraction_ok,
        tail,
        tail_ok,
        residual,
        residual_ok,
    })
}

fn certificate_sample(cfg: &RunConfig, p0: f64) -> CertificateSample {
    let params = match cfg.problem.params() {
        Ok(p) => p.with_eps(cfg.audit.certificate_eps),
        Err(e) => return failed_sample(p0, e.to_string()),
    };
    let schedule = &cfg.schedule;
    let n = schedule.n_j(schedule.j_max);
    let d = params.d as f64;
    let regime = params.eps.powi(2) * (n as f64).powf(8.0 * d + 2.0 * params.alpha + 5.0 * d);
    let scfg = solver_config(cfg, schedule);
    let run = || -> cwbnlw_core::Result<CertificateSample> {
        let sol = solve_coupled(p0, &params, &scfg)?;
        let op = assemble(
            &sol.u,
            sol.state.lambda_sq,
            &params,
            n,
            OperatorKind::TTilde,
            &scfg.conv,
        )?;
        let (dense, cert) = invert_with_certificate(&op, schedule.c2, schedule.c, &scfg.cert);
        let (neu, report) = neumann_invert(
            &op,
            cfg.audit.neumann_gamma,
            schedule.c,
            cfg.audit.neumann_slack,
            &scfg.cert,
        )?;
        let inverse_mismatch = match &dense {
            Some(m) => (m - &neu).amax() / m.amax(),
            None => f64::INFINITY,
        };
        Ok(CertificateSample {
            p0,
            lambda: sol.state.lambda,
            n,
            regime,
            certificate: Some(cert),
            neumann: Some(report),
            inverse_mismatch,
            error: None,
        })
    };
    run().unwrap_or_else(|e| CertificateSample {
        regime,
        ..failed_sample(p0, e.to_string())
    })
}

fn failed_sample(p0: f64, error: String) -> CertificateSample {
    CertificateSample {
        p0,
        lambda: f64::NAN,
        n: 0,
        regime: f64::NAN,
        certificate: None,
        neumann: None,
        inverse_mismatch: f64::INFINITY,
        error: Some(error),
    }
}

/// Certificates along the solution curve at the configured small `ε`.
pub fn certificates(cfg: &RunConfig) -> Vec<CertificateSample> {
    p0_grid(cfg.audit.certificate_samples)
        .into_par_iter()
        .map(|p0| certificate_sample(cfg, p0))
        .collect()
}

pub fn compute(cfg: &RunConfig) -> Result<AuditReport, CliError> {
    let contraction = contraction(cfg)?;
    let certificates = certificates(cfg);
    let certificates_ok = certificates.iter().all(|c| c.pass(cfg.audit.inverse_agreement));
    Ok(AuditReport {
        contraction,
        certificates,
        certificates_ok,
    })
}

pub fn run(cfg: &RunConfig, out: &mut Artifacts) -> Result<ModeOutcome, CliError> {
    let report = compute(cfg)?;
    out.json("audit.json", &report)?;
    let rows: Vec<Vec<Cell>> = report
        .certificates
        .iter()
        .map(|c| {
            vec![
                c.p0.into(),
                c.lambda.into(),
                c.n.into(),
                c.regime.into(),
                c.certificate.as_ref().map_or(f64::INFINITY, |x| x.l2_norm).into(),
                c.certificate.as_ref().is_some_and(|x| x.pass()).into(),
                c.inverse_mismatch.into(),
            ]
        })
        .collect();
    out.csv(
        "certificates.csv",
        &[
            "p0",
            "lambda",
            "n",
            "regime",
            "inv_l2",
            "certificate_pass",
            "neumann_mismatch",
        ],
        &rows,
    )?;
    let c = &report.contraction;
    Ok(ModeOutcome {
        passed: report.pass(),
        lines: vec![
            format!("residual trace {:?}", c.residuals),
            format!("contraction r_(j+1) <= r_j^{}: {}", c.power, verdict(c.contraction_ok)),
            format!("tail split (slack {}): {}", cfg.audit.tail_slack, verdict(c.tail_ok)),
            format!(
                "full residual {:.3e}: {}",
                c.residual.sup_residual,
                verdict(c.residual_ok)
            ),
            format!(
                "certificates ({} samples): {}",
                report.certificates.len(),
                verdict(report.certificates_ok)
            ),
        ],
    })
}
