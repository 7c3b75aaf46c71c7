//! Diophantine checks on the instance and Monte Carlo checks of the
//! measure estimates.

use cwbnlw_core::arithmetic::{
    check_gdc_poly, check_rho_condition, excluded_measure_on, sample_points, sublevel_measure, GdcCheck, GdcSpec,
    MeasureEstimate, RhoCheck,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{verdict, ModeOutcome};
use crate::config::RunConfig;
use crate::output::{Artifacts, Cell};
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct SublevelRow {
    pub k: usize,
    pub eps: f64,
    pub measured: f64,
    pub closed_form: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiophantineReport {
    /// Informational: the instance's `ρ` against its condition.
    pub rho: RhoCheck,
    /// Informational: `λ0` against the configured gDC check.
    pub lambda0: f64,
    pub lambda0_gdc: GdcCheck,
    pub estimates: Vec<MeasureEstimate>,
    /// Least-squares slope of `log fraction` against `log γ`.
    pub slope: f64,
    pub slope_target: f64,
    pub slope_ok: bool,
    pub monotone_ok: bool,
    /// `C` fitted at the largest `γ`.
    pub envelope_c: f64,
    pub under_envelope: bool,
    pub sublevel: Vec<SublevelRow>,
    pub sublevel_max_error: f64,
    pub sublevel_ok: bool,
    /// `max measure / ε^{1/4}` over random quartics on `[-1, 1]`.
    pub quartic_c: f64,
}

impl DiophantineReport {
    pub fn pass(&self) -> bool {
        self.slope_ok && self.monotone_ok && self.sublevel_ok
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn compute(cfg: &RunConfig) -> Result<DiophantineReport, CliError> {
    let dp = &cfg.diophantine;
    let params = cfg.problem.params()?;
    let rho = check_rho_condition(params.rho, dp.rho_gamma, params.d, dp.rho_n_max);
    let lambda0_gdc = check_gdc_poly(&[params.lambda0], &dp.lambda_gdc)?;

    let mut gammas = dp.measure_gammas.clone();
    gammas.sort_by(|a, b| b.partial_cmp(a).expect("finite gamma"));
    let points = sample_points(1, dp.measure_interval, dp.measure_samples, cfg.seed);
    let spec = |gamma: f64| GdcSpec {
        b_tilde: 1,
        degree: dp.measure_degree,
        gamma,
        tau: dp.measure_tau,
        coeff_bound: dp.measure_coeff_bound,
        budget: None,
    };
    let exponent = 1.0 / dp.measure_degree as f64;
    let first = excluded_measure_on(&spec(gammas[0]), &points, 0.0)?;
    let envelope_c = first.excluded_fraction / gammas[0].powf(exponent);
    let mut estimates = vec![excluded_measure_on(&spec(gammas[0]), &points, envelope_c)?];
    for &g in &gammas[1..] {
        estimates.push(excluded_measure_on(&spec(g), &points, envelope_c)?);
    }
    let logs: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.excluded > 0)
        .map(|e| (e.gamma.ln(), e.excluded_fraction.ln()))
        .collect();
    let slope = if logs.len() >= 2 { fit_slope(&logs) } else { f64::NAN };
    let slope_target = exponent - 0.1;
    let monotone_ok = estimates
        .windows(2)
        .all(|w| w[1].excluded_fraction <= w[0].excluded_fraction);
    let under_envelope = estimates
        .iter()
        .all(|e| e.excluded_fraction <= e.envelope * (1.0 + 1e-12));

    let mut sublevel = Vec::new();
    for &k in &dp.sublevel_degrees {
        let mut p = vec![0i64; k + 1];
        p[k] = 1;
        for &eps in &dp.sublevel_eps {
            sublevel.push(SublevelRow {
                k,
                eps,
                measured: sublevel_measure(&p, eps, -1.0, 1.0)?,
                closed_form: 2.0 * eps.powf(1.0 / k as f64),
            });
        }
    }
    let sublevel_max_error = sublevel
        .iter()
        .map(|r| (r.measured - r.closed_form).abs())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ab1e);
    let mut quartic_c = 0.0f64;
    for _ in 0..dp.sublevel_random {
        let mut p: Vec<i64> = (0..5).map(|_| rng.gen_range(-5..=5)).collect();
        if p[4] == 0 {
            p[4] = 1;
        }
        for &eps in &dp.sublevel_eps {
            quartic_c = quartic_c.max(sublevel_measure(&p, eps, -1.0, 1.0)? / eps.powf(0.25));
        }
    }

    Ok(DiophantineReport {
        rho,
        lambda0: params.lambda0,
        lambda0_gdc,
        slope_ok: slope >= slope_target,
        slope,
        slope_target,
        monotone_ok,
        envelope_c,
        under_envelope,
        estimates,
        sublevel_ok: sublevel_max_error < dp.sublevel_tol,
        sublevel_max_error,
        sublevel,
        quartic_c,
    })
}

pub fn run(cfg: &RunConfig, out: &mut Artifacts) -> Result<ModeOutcome, CliError> {
    let report = compute(cfg)?;
    let rows: Vec<Vec<Cell>> = report
        .estimates
        .iter()
        .map(|e| {
            vec![
                e.gamma.into(),
                e.tau.into(),
                e.degree.into(),
                Cell::U(e.coeff_bound as u64),
                e.samples.into(),
                e.excluded_fraction.into(),
                e.envelope.into(),
            ]
        })
        .collect();
    out.csv(
        "measure.csv",
        &[
            "gamma",
            "tau",
            "degree",
            "coeff_bound",
            "samples",
            "excluded_fraction",
            "envelope",
        ],
        &rows,
    )?;
    let rows: Vec<Vec<Cell>> = report
        .sublevel
        .iter()
        .map(|r| vec![r.k.into(), r.eps.into(), r.measured.into(), r.closed_form.into()])
        .collect();
    out.csv("sublevel.csv", &["k", "eps", "measured", "closed_form"], &rows)?;
    out.json("diophantine.json", &report)?;
    Ok(ModeOutcome {
        passed: report.pass(),
        lines: vec![
            format!("rho condition (informational): {}", verdict(report.rho.pass)),
            format!("gDC at lambda0 (informational): {}", verdict(report.lambda0_gdc.pass)),
            format!(
                "excluded-fraction slope {:.3} >= {:.3}: {}",
                report.slope,
                report.slope_target,
                verdict(report.slope_ok)
            ),
            format!("monotone in gamma: {}", verdict(report.monotone_ok)),
            format!(
                "sublevel closed form, max error {:.2e}: {}",
                report.sublevel_max_error,
                verdict(report.sublevel_ok)
            ),
            format!("quartic sublevel constant {:.3}", report.quartic_c),
        ],
    })
}
