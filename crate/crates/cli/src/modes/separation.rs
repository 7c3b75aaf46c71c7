//! Cluster decomposition and chain-length bounds for sampled frequencies,
//! with the `λ = 1` control.

use cwbnlw_core::arithmetic::{check_gdc_poly, sample_points};
use cwbnlw_core::separation::{
    chain_exponent, cluster_decompose, max_chain_length, null_cone_chain, singular_sites, validate_chain, ChainOptions,
    ChainReport, ClusterReport,
};
use rayon::prelude::*;
use serde::Serialize;

use super::{verdict, ModeOutcome};
use crate::config::{RunConfig, SeparationSection};
use crate::output::{Artifacts, Cell};
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct LambdaSample {
    pub lambda: f64,
    pub clusters: ClusterReport,
    pub chain: ChainReport,
    pub chain_valid: bool,
    pub fitted_exponent: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlRun {
    pub radius: i64,
    /// Length of `((k, 0, .., 0), k)`, `|k| <= radius / 2`.
    pub explicit: usize,
    pub search: ChainReport,
    pub longest: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub n: i64,
    pub threshold: f64,
    pub gap: f64,
    pub chain_bound: f64,
    pub samples: Vec<LambdaSample>,
    pub separated: bool,
    pub chains_bounded: bool,
    pub max_fitted_exponent: f64,
    pub control: Vec<ControlRun>,
    /// The `λ = 1` chain at the largest radius exceeds the bound.
    pub control_violates: bool,
}

impl SeparationReport {
    pub fn pass(&self) -> bool {
        self.separated && self.chains_bounded && self.control_violates
    }
}

/// `λ` values in the configured interval passing the configured gDC check.
pub fn gdc_samples(s: &SeparationSection, seed: u64) -> Result<Vec<f64>, CliError> {
    let pool = sample_points(1, (s.lambda_min, s.lambda_max), 50 * s.samples.max(1), seed);
    let mut out = Vec::new();
    for x in pool {
        if check_gdc_poly(&x, &s.gdc)?.pass {
            out.push(x[0]);
            if out.len() == s.samples {
                return Ok(out);
            }
        }
    }
    Err(CliError::Runtime(format!(
        "only {} of the requested {} samples pass the gDC check",
        out.len(),
        s.samples
    )))
}

fn chain_options(s: &SeparationSection, radius: i64, budget: u64) -> ChainOptions {
    ChainOptions {
        budget,
        ..ChainOptions::new(s.b, s.b_prime, radius)
    }
}

fn analyse(s: &SeparationSection, alpha: f64, lambda: f64) -> Result<LambdaSample, CliError> {
    let threshold = 2.0 * (s.n as f64).powf(alpha);
    let sites = singular_sites(s.d, lambda, s.n, threshold)?;
    let clusters = cluster_decompose(&sites, threshold)?;
    let report = ClusterReport::new(lambda, s.n, threshold, threshold, alpha, &clusters);
    let opts = chain_options(s, s.n, s.budget);
    let chain = max_chain_length(s.d, lambda, &opts)?;
    let chain_valid = validate_chain(&chain.witness, lambda, &opts).is_ok();
    let bound = (s.b * s.b_prime as f64).powf(s.c_double_prime);
    Ok(LambdaSample {
        lambda,
        fitted_exponent: chain_exponent(chain.k_max, s.b, s.b_prime),
        within_bound: chain_valid && (chain.k_max as f64) <= bound,
        chain_valid,
        clusters: report,
        chain,
    })
}

pub fn compute(cfg: &RunConfig) -> Result<SeparationReport, CliError> {
    let s = &cfg.separation;
    let alpha = cfg.problem.alpha;
    let lambdas = gdc_samples(s, cfg.seed)?;
    let samples = lambdas
        .into_par_iter()
        .map(|l| analyse(s, alpha, l))
        .collect::<Result<Vec<_>, _>>()?;
    let threshold = 2.0 * (s.n as f64).powf(alpha);
    let chain_bound = (s.b * s.b_prime as f64).powf(s.c_double_prime);
    let control = s
        .control_radii
        .par_iter()
        .map(|&r| -> Result<ControlRun, CliError> {
            let opts = chain_options(s, r, s.control_budget);
            let explicit = null_cone_chain(s.d, r);
            validate_chain(&explicit, 1.0, &opts).map_err(CliError::Runtime)?;
            let search = max_chain_length(s.d, 1.0, &opts)?;
            validate_chain(&search.witness, 1.0, &opts).map_err(CliError::Runtime)?;
            Ok(ControlRun {
                radius: r,
                explicit: explicit.len(),
                longest: explicit.len().max(search.k_max),
                search,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let control_violates = control
        .iter()
        .max_by_key(|c| c.radius)
        .is_some_and(|c| c.longest as f64 > chain_bound);
    Ok(SeparationReport {
        n: s.n,
        threshold,
        gap: threshold,
        chain_bound,
        separated: samples.iter().all(|x| x.clusters.separated),
        chains_bounded: samples.iter().all(|x| x.within_bound),
        max_fitted_exponent: samples
            .iter()
            .map(|x| x.fitted_exponent)
            .fold(f64::NEG_INFINITY, f64::max),
        samples,
        control,
        control_violates,
    })
}

pub fn run(cfg: &RunConfig, out: &mut Artifacts) -> Result<ModeOutcome, CliError> {
    let report = compute(cfg)?;
    out.json(
        "clusters.json",
        &report.samples.iter().map(|s| &s.clusters).collect::<Vec<_>>(),
    )?;
    let mut rows: Vec<Vec<Cell>> = report
        .samples
        .iter()
        .map(|s| {
            vec![
                s.lambda.into(),
                s.chain.b.into(),
                s.chain.b_prime.into(),
                s.chain.k_max.into(),
                s.chain.exact.into(),
                s.chain.upper_bound.into(),
            ]
        })
        .collect();
    rows.extend(report.control.iter().map(|c| {
        vec![
            1.0.into(),
            c.search.b.into(),
            c.search.b_prime.into(),
            c.longest.into(),
            c.search.exact.into(),
            c.search.upper_bound.into(),
        ]
    }));
    out.csv(
        "chains.csv",
        &["lambda", "B", "B_prime", "k_max", "exact_flag", "upper_bound"],
        &rows,
    )?;
    out.json("separation.json", &report)?;
    Ok(ModeOutcome {
        passed: report.pass(),
        lines: vec![
            format!("separation at gap {:.4}: {}", report.gap, verdict(report.separated)),
            format!(
                "chains <= (BB')^C'' = {:.1} (max fitted exponent {:.3}): {}",
                report.chain_bound,
                report.max_fitted_exponent,
                verdict(report.chains_bounded)
            ),
            format!(
                "lambda = 1 control {:?}: {}",
                report.control.iter().map(|c| (c.radius, c.longest)).collect::<Vec<_>>(),
                verdict(report.control_violates)
            ),
        ],
    })
}
