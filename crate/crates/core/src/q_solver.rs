//! Resonant equations and the outer loop coupling them to the Newton scheme.
//!
//! With `σ = ε^{-2}(-λ² + |m0|² + ρ)` the resonant equations read
//! `σ p_m + 2 <m0>^α (u³)^(m,1) = 0` for every `|m| = |m0|`. The `m0`
//! component fixes `σ` (hence `λ`), the others are solved for `p_m` by a
//! diagonally dominant fixed-point sweep.

use serde::{Deserialize, Serialize};

use crate::conv::ConvolutionConfig;
use crate::error::{Error, Result};
use crate::lattice::{resonant_set, FourierField, LatticeIndex, ProblemParams, ResonantSet};
use crate::operator::CertificateOptions;
use crate::p_solver::{base_field, full_residual, run_p_solver, Amplitudes, NewtonState, ScaleSchedule, StepContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QState {
    pub p0: f64,
    /// Aligned with [`ResonantSet::others`].
    pub p_m: Vec<f64>,
    pub sigma: f64,
    /// `λ² = λ0² - σ ε²`, formed from `σ`.
    pub lambda_sq: f64,
    pub lambda: f64,
    pub iteration: usize,
    pub converged: bool,
}

impl QState {
    pub fn from_sigma(p0: f64, p_m: Vec<f64>, sigma: f64, params: &ProblemParams) -> Result<Self> {
        let lambda_sq = params.lambda0_sq - sigma * params.eps * params.eps;
        if lambda_sq < 0.0 {
            return Err(Error::FrequencyCollapse(lambda_sq));
        }
        Ok(Self {
            p0,
            p_m,
            sigma,
            lambda_sq,
            lambda: lambda_sq.sqrt(),
            iteration: 0,
            converged: false,
        })
    }

    pub fn amplitudes(&self) -> Amplitudes {
        Amplitudes {
            p0: self.p0,
            others: self.p_m.clone(),
        }
    }

    /// `σ` recomputed from `λ`; agrees with the stored value up to rounding.
    pub fn sigma_from_lambda(&self, params: &ProblemParams) -> f64 {
        (-self.lambda * self.lambda + params.lambda0_sq) / (params.eps * params.eps)
    }
}

/// `(u0³)^(m,1)` for every `|m| = |m0|` (`m0` first), by convolution.
pub fn resonant_cubic_coefficients(s: &ResonantSet, amps: &Amplitudes, cfg: &ConvolutionConfig) -> Result<Vec<f64>> {
    let cube = base_field(s, amps)?.cube(cfg)?;
    Ok(s.spatial
        .iter()
        .map(|m| cube.get(&LatticeIndex::new(m.clone(), 1)))
        .collect())
}

/// Leading-order values `3/8 p0³` at `m0` and `3/4 p0² p_m` elsewhere.
pub fn leading_order_coefficients(amps: &Amplitudes) -> Vec<f64> {
    let p0 = amps.p0;
    std::iter::once(0.375 * p0 * p0 * p0)
        .chain(amps.others.iter().map(|p| 0.75 * p0 * p0 * p))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QOptions {
    /// Relaxation of the `p_m` sweep; 1 means a plain fixed-point update.
    pub damping: f64,
    /// Outer stopping rule on `|Δλ| + |Δp_m|_1`.
    pub tol: f64,
    pub max_outer: usize,
}

impl Default for QOptions {
    fn default() -> Self {
        Self {
            damping: 1.0,
            tol: 1e-12,
            max_outer: 50,
        }
    }
}

/// One sweep of the resonant equations at the current full approximation `u`.
pub fn q_update(
    u: &FourierField,
    state: &QState,
    params: &ProblemParams,
    s: &ResonantSet,
    opts: &QOptions,
    cfg: &ConvolutionConfig,
) -> Result<QState> {
    if state.p0 == 0.0 {
        return Err(Error::InvalidParams("p0 = 0 is outside the amplitude range".into()));
    }
    let cube = u.cube(cfg)?;
    let w0 = params.weight(&params.m0);
    let c_at = |m: &Vec<i64>| cube.get(&LatticeIndex::new(m.clone(), 1));
    let sigma = -2.0 * w0 * c_at(&s.spatial[0]) / state.p0;
    let p0sq = state.p0 * state.p0;
    let denom = sigma + 1.5 * w0 * p0sq;
    let p_m = s
        .others()
        .iter()
        .zip(&state.p_m)
        .map(|(m, &p)| {
            let target = -2.0 * w0 * (c_at(m) - 0.75 * p0sq * p) / denom;
            (1.0 - opts.damping) * p + opts.damping * target
        })
        .collect();
    let mut next = QState::from_sigma(state.p0, p_m, sigma, params)?;
    next.iteration = state.iteration + 1;
    Ok(next)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub p_m: Vec<f64>,
    /// `|Δλ| + |Δp_m|_1` produced by this iteration's update.
    pub change: f64,
    pub p_residual: f64,
}

#[derive(Clone, Debug)]
pub struct CoupledSolution {
    pub state: QState,
    pub u: FourierField,
    /// Trace of the final non-resonant solve.
    pub p_trace: Vec<NewtonState>,
    pub outer: Vec<OuterRecord>,
}

/// Everything fixed across one coupled solve.
#[derive(Clone, Debug, Default)]
pub struct SolverConfig {
    pub schedule: ScaleSchedule,
    pub q: QOptions,
    pub conv: ConvolutionConfig,
    pub cert: CertificateOptions,
}

/// Alternates the non-resonant Newton scheme at frozen `(λ, p_m)` with
/// [`q_update`] until the update stalls below `tol`. Starts from `λ = λ0`,
/// `p_m = 0`.
pub fn solve_coupled(p0: f64, params: &ProblemParams, cfg: &SolverConfig) -> Result<CoupledSolution> {
    if !(1.0..=2.0).contains(&p0) {
        return Err(Error::InvalidParams(format!("p0 = {p0} outside [1, 2]")));
    }
    let s = resonant_set(params);
    let mut state = QState::from_sigma(p0, vec![0.0; s.others().len()], 0.0, params)?;
    let mut outer = Vec::new();
    let mut last_change = f64::INFINITY;
    for _ in 0..cfg.q.max_outer {
        let amps = state.amplitudes();
        let ctx = StepContext {
            amps: &amps,
            lambda_sq: state.lambda_sq,
            schedule: &cfg.schedule,
            params,
            s: &s,
            conv: &cfg.conv,
            cert: &cfg.cert,
        };
        let out = run_p_solver(&ctx)?;
        if let Some(e) = out.excluded {
            return Err(Error::ExcludedParameter {
                p0,
                reason: e.to_string(),
            });
        }
        let p_residual = out.final_state().residual_norm;
        let u = base_field(&s, &amps)?.add_scaled(&out.v, 1.0);
        let next = q_update(&u, &state, params, &s, &cfg.q, &cfg.conv)?;
        let change = (next.lambda - state.lambda).abs()
            + next.p_m.iter().zip(&state.p_m).map(|(a, b)| (a - b).abs()).sum::<f64>();
        outer.push(OuterRecord {
            iteration: next.iteration,
            lambda: next.lambda,
            sigma: next.sigma,
            p_m: next.p_m.clone(),
            change,
            p_residual,
        });
        last_change = change;
        if change < cfg.q.tol {
            // keep the state u was solved at, so (u, λ, p) are consistent
            state.converged = true;
            state.iteration = next.iteration;
            return Ok(CoupledSolution {
                state,
                u,
                p_trace: out.trace,
                outer,
            });
        }
        state = next;
    }
    Err(Error::NoOuterConvergence {
        iterations: cfg.q.max_outer,
        last_change,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub n_audit: i64,
    /// `sup |F_λ(u)^(ξ)|` over `|ξ|_1 <= n_audit`, resonant sites included.
    pub sup_residual: f64,
    pub worst_site: Option<LatticeIndex>,
    pub l2_residual: f64,
    /// `Σ |F_λ(u)^(ξ)| e^{|ξ|_1^c}` over the audit ball.
    pub weighted_residual: f64,
    /// `Σ_{ξ ∉ S} |û(ξ)| e^{|ξ|_1^c}`.
    pub gevrey_tail: f64,
    /// `ε^{1/8}`.
    pub tail_bound: f64,
    pub c: f64,
}

impl ResidualReport {
    pub fn tail_ok(&self) -> bool {
        self.gevrey_tail < self.tail_bound
    }
}

/// Substitutes `u` into the full equation and measures what is left.
pub fn verify_solution(
    u: &FourierField,
    lambda_sq: f64,
    params: &ProblemParams,
    n_audit: i64,
    c: f64,
    cfg: &ConvolutionConfig,
) -> Result<ResidualReport> {
    let s = resonant_set(params);
    let res = full_residual(u, lambda_sq, params, cfg)?.filter(|xi| xi.one_norm() <= n_audit);
    let mut sup_residual = 0.0f64;
    let mut worst_site = None;
    for (xi, v) in res.iter() {
        if v.abs() > sup_residual {
            sup_residual = v.abs();
            worst_site = Some(xi.clone());
        }
    }
    Ok(ResidualReport {
        n_audit,
        sup_residual,
        worst_site,
        l2_residual: res.l2_norm(),
        weighted_residual: res.gevrey_weighted_sum(c, &Default::default()),
        gevrey_tail: u.gevrey_weighted_sum(c, &s.sites),
        tail_bound: params.eps.powf(0.125),
        c,
    })
}

/// Export form of a converged solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionBundle {
    pub params: ProblemParams,
    pub lambda: f64,
    pub p0: f64,
    pub p_m: Vec<f64>,
    pub field: FourierField,
    pub residual_report: ResidualReport,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_coefficients_of_pure_mode() {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.0, 0.1).unwrap();
        let s = resonant_set(&p);
        let c = resonant_cubic_coefficients(&s, &Amplitudes::leading(1.0, &s), &Default::default()).unwrap();
        assert!((c[0] - 0.375).abs() < 1e-15);
        assert_eq!(c[1], 0.0);
        let c = resonant_cubic_coefficients(&s, &Amplitudes::leading(0.0, &s), &Default::default()).unwrap();
        assert!(c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cubic_coefficient_off_m0_near_leading_order() {
        let p = ProblemParams::new(vec![1, 0], 2f64.sqrt(), 0.0, 0.1).unwrap();
        let s = resonant_set(&p);
        let mut amps = Amplitudes::leading(1.0, &s);
        let k = s.others().iter().position(|m| *m == vec![0, 1]).unwrap();
        amps.others[k] = 0.1;
        let exact = resonant_cubic_coefficients(&s, &amps, &Default::default()).unwrap();
        let lead = leading_order_coefficients(&amps);
        assert!((lead[k + 1] - 0.075).abs() < 1e-15);
        assert!((exact[k + 1] - lead[k + 1]).abs() < 0.02);
    }

    #[test]
    fn sigma_at_base_field() {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.05, 1e-3).unwrap();
        let s = resonant_set(&p);
        let st = QState::from_sigma(1.5, vec![0.0], 0.0, &p).unwrap();
        let u = base_field(&s, &st.amplitudes()).unwrap();
        let next = q_update(&u, &st, &p, &s, &QOptions::default(), &Default::default()).unwrap();
        let want = -0.75 * 2f64.powf(0.025) * 2.25;
        assert!((next.sigma - want).abs() < 1e-14);
        assert!((next.sigma_from_lambda(&p) - next.sigma).abs() < 1e-8);
    }

    #[test]
    fn frequency_collapse_detected() {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.0, 1.0).unwrap();
        assert!(matches!(
            QState::from_sigma(1.0, vec![0.0], 10.0, &p),
            Err(Error::FrequencyCollapse(_))
        ));
    }

    #[test]
    fn zero_eps_returns_base_solution() {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.05, 0.0).unwrap();
        let sol = solve_coupled(1.5, &p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.state.lambda, p.lambda0);
        assert_eq!(sol.u.len(), 2);
        assert_eq!(sol.outer.len(), 1);
    }

    #[test]
    fn p0_range_enforced() {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.05, 1e-3).unwrap();
        assert!(solve_coupled(0.5, &p, &SolverConfig::default()).is_err());
    }
}
