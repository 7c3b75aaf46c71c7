//! Multiscale Newton iteration on the non-resonant equations.
//!
//! For fixed amplitudes `p` and frequency `λ` the unknown is `v`, supported
//! off the resonant set, and the equation is `G(v) = Γ_P F_λ(u0 + v) = 0`
//! with `F_λ(u)^(ξ) = (-(nλ)² + μ_m²) û(ξ) + ε² <m>^α (u³)^(ξ)`. Step `j`
//! inverts the linearization on `|ξ|_1 < N_{j+1} = M^{j+1}` behind an inverse
//! certificate; a failing certificate excludes the parameter.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::conv::{self, ConvolutionConfig};
use crate::error::{Error, Result};
use crate::lattice::{FourierField, LatticeIndex, ProblemParams, ResonantSet};
use crate::operator::{assemble, invert_with_certificate, CertificateOptions, InverseCertificate, OperatorKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleSchedule {
    /// Scale ratio `M`, `N_j = M^j`.
    pub m: i64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub j0: u32,
    pub j_max: u32,
    /// Stop once the residual norm drops below this.
    pub residual_floor: f64,
}

impl Default for ScaleSchedule {
    fn default() -> Self {
        Self {
            m: 4,
            c: 0.04,
            c1: 3.0,
            c2: 2.5,
            j0: 1,
            j_max: 2,
            residual_floor: 1e-13,
        }
    }
}

impl ScaleSchedule {
    pub fn n_j(&self, j: u32) -> i64 {
        self.m.pow(j)
    }

    /// Upper limit `log(17/16) / log M` for `c`.
    pub fn c_limit(&self) -> f64 {
        (17.0f64 / 16.0).ln() / (self.m as f64).ln()
    }

    /// Structural checks always apply. The inequalities `0 < c < log(17/16)/log M`
    /// and `C1 > C2 > 2` are enforced unless `allow_override`, in which case
    /// each violation is returned as a warning.
    pub fn validate(&self, allow_override: bool) -> Result<Vec<String>> {
        if self.m < 2 {
            return Err(Error::InvalidParams(format!("M must be at least 2, got {}", self.m)));
        }
        if self.j_max < self.j0 {
            return Err(Error::InvalidParams(format!(
                "j_max = {} below j0 = {}",
                self.j_max, self.j0
            )));
        }
        if !(self.residual_floor >= 0.0) {
            return Err(Error::InvalidParams("residual_floor must be nonnegative".into()));
        }
        let mut violations = Vec::new();
        if !(self.c > 0.0 && self.c < self.c_limit()) {
            violations.push(format!(
                "c = {} outside (0, log(17/16)/log M) = (0, {:.6})",
                self.c,
                self.c_limit()
            ));
        }
        if !(self.c1 > self.c2 && self.c2 > 2.0) {
            violations.push(format!("need C1 > C2 > 2, got C1 = {}, C2 = {}", self.c1, self.c2));
        }
        if !violations.is_empty() && !allow_override {
            return Err(Error::InvalidParams(violations.join("; ")));
        }
        Ok(violations)
    }
}

/// Resonant amplitudes: `û(±(m0,1)) = p0/2`, `û(±(m,1)) = p_m/2`, with
/// `others` aligned to [`ResonantSet::others`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub p0: f64,
    pub others: Vec<f64>,
}

impl Amplitudes {
    pub fn leading(p0: f64, s: &ResonantSet) -> Self {
        Self {
            p0,
            others: vec![0.0; s.others().len()],
        }
    }

    /// `p_m` for every `|m| = |m0|`, `m0` first.
    pub fn all(&self) -> Vec<f64> {
        std::iter::once(self.p0).chain(self.others.iter().copied()).collect()
    }
}

/// `u0 = p0 cos(m0·x + θ) + Σ p_m cos(m·x + θ)`.
pub fn base_field(s: &ResonantSet, amps: &Amplitudes) -> Result<FourierField> {
    if amps.others.len() != s.others().len() {
        return Err(Error::DimensionMismatch {
            expected: s.others().len(),
            found: amps.others.len(),
        });
    }
    let d = s.spatial[0].len();
    FourierField::from_pairs(
        d,
        s.spatial
            .iter()
            .zip(amps.all())
            .map(|(m, p)| (LatticeIndex::new(m.clone(), 1), 0.5 * p)),
    )
}

/// `F_λ(u)` at every site where it can be nonzero, resonant sites included.
pub fn full_residual(
    u: &FourierField,
    lambda_sq: f64,
    params: &ProblemParams,
    cfg: &ConvolutionConfig,
) -> Result<FourierField> {
    let cube = u.cube(cfg)?;
    let e2 = params.eps * params.eps;
    let mut out = FourierField::zero(params.d);
    let mut sites: Vec<&LatticeIndex> = u.iter().chain(cube.iter()).map(|(xi, _)| xi).collect();
    sites.sort();
    sites.dedup();
    for xi in sites {
        if !xi.is_representative() {
            continue;
        }
        let lin = params.linear_symbol(xi, lambda_sq) * u.get(xi);
        let non = e2 * params.weight(&xi.m) * cube.get(xi);
        out.set_pair(xi.clone(), lin + non);
    }
    Ok(out)
}

/// `G_{p,λ}(v) = Γ_P F_λ(u0 + v)`.
pub fn evaluate_g(
    amps: &Amplitudes,
    lambda_sq: f64,
    v: &FourierField,
    params: &ProblemParams,
    s: &ResonantSet,
    cfg: &ConvolutionConfig,
) -> Result<FourierField> {
    if v.iter().any(|(xi, _)| s.contains(xi)) {
        return Err(Error::Precondition("v must vanish on the resonant set".into()));
    }
    let u = base_field(s, amps)?.add_scaled(v, 1.0);
    Ok(full_residual(&u, lambda_sq, params, cfg)?.project_p(s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonState {
    pub j: u32,
    /// `N_j = M^j`.
    pub n_j: i64,
    pub v: FourierField,
    pub residual_norm: f64,
    pub residual_field: FourierField,
    pub certificate_history: Vec<InverseCertificate>,
    pub accepted: bool,
}

impl NewtonState {
    pub fn initial(
        amps: &Amplitudes,
        lambda_sq: f64,
        schedule: &ScaleSchedule,
        params: &ProblemParams,
        s: &ResonantSet,
        cfg: &ConvolutionConfig,
    ) -> Result<Self> {
        let v = FourierField::zero(params.d);
        let g = evaluate_g(amps, lambda_sq, &v, params, s, cfg)?;
        Ok(Self {
            j: schedule.j0,
            n_j: schedule.n_j(schedule.j0),
            v,
            residual_norm: g.l2_norm(),
            residual_field: g,
            certificate_history: Vec::new(),
            accepted: true,
        })
    }

    pub fn last_certificate(&self) -> Option<&InverseCertificate> {
        self.certificate_history.last()
    }
}

/// Everything a Newton step needs besides the state.
#[derive(Clone, Debug)]
pub struct StepContext<'a> {
    pub amps: &'a Amplitudes,
    pub lambda_sq: f64,
    pub schedule: &'a ScaleSchedule,
    pub params: &'a ProblemParams,
    pub s: &'a ResonantSet,
    pub conv: &'a ConvolutionConfig,
    pub cert: &'a CertificateOptions,
}

/// One Newton step from scale `j` to `j + 1`:
/// `ŵ = -T_{j,N}^{-1} Ĝ(v_j)` with `N = N_{j+1}`, `v_{j+1} = v_j + w`.
pub fn newton_step(state: &NewtonState, ctx: &StepContext) -> Result<NewtonState> {
    if !state.accepted {
        return Err(Error::Precondition("newton_step on an excluded state".into()));
    }
    let j_next = state.j + 1;
    let n = ctx.schedule.n_j(j_next);
    if state.residual_norm == 0.0 {
        let mut next = state.clone();
        next.j = j_next;
        next.n_j = n;
        return Ok(next);
    }

    let u = base_field(ctx.s, ctx.amps)?.add_scaled(&state.v, 1.0);
    let op = assemble(&u, ctx.lambda_sq, ctx.params, n, OperatorKind::TTilde, ctx.conv)?;
    let (inv, cert) = invert_with_certificate(&op, ctx.schedule.c2, ctx.schedule.c, ctx.cert);
    let inv = match inv {
        Some(inv) if cert.pass() => inv,
        _ => {
            return Err(Error::CertificateFailed {
                j: state.j,
                n,
                l2_norm: cert.l2_norm,
                l2_bound: cert.l2_bound,
                offdiag_ok: cert.offdiag_ok,
            })
        }
    };

    // T = Λ T̃, so T⁻¹ Ĝ = T̃⁻¹ Λ⁻¹ Ĝ
    let sites = op.basis.sites();
    let rhs = DVector::from_iterator(
        sites.len(),
        sites
            .iter()
            .map(|xi| -state.residual_field.get(xi) / ctx.params.weight(&xi.m)),
    );
    let w = inv * rhs;
    let mut w_field = FourierField::zero(ctx.params.d);
    for (i, xi) in sites.iter().enumerate() {
        if xi.is_representative() {
            let partner = op.basis.index_of(&xi.neg()).expect("basis closed under negation");
            w_field.set_pair(xi.clone(), 0.5 * (w[i] + w[partner]));
        }
    }

    let v = state.v.add_scaled(&w_field, 1.0);
    debug_assert!(v.support_radius() < n);
    let g = evaluate_g(ctx.amps, ctx.lambda_sq, &v, ctx.params, ctx.s, ctx.conv)?;
    let residual_norm = g.l2_norm();
    if residual_norm > state.residual_norm {
        return Err(Error::ResidualIncrease {
            j: state.j,
            before: state.residual_norm,
            after: residual_norm,
        });
    }
    let mut certificate_history = state.certificate_history.clone();
    certificate_history.push(cert);
    Ok(NewtonState {
        j: j_next,
        n_j: n,
        v,
        residual_norm,
        residual_field: g,
        certificate_history,
        accepted: true,
    })
}

#[derive(Debug)]
pub struct PSolveOutcome {
    pub v: FourierField,
    pub trace: Vec<NewtonState>,
    /// The failing certificate when the parameter was excluded.
    pub excluded: Option<Error>,
}

impl PSolveOutcome {
    pub fn final_state(&self) -> &NewtonState {
        self.trace.last().expect("trace holds the initial state")
    }
}

/// Newton steps from `v_{j0} = 0` until `j_max` or the residual floor.
/// Certificate failures end the run with `excluded` set; other errors
/// propagate.
pub fn run_p_solver(ctx: &StepContext) -> Result<PSolveOutcome> {
    let mut state = NewtonState::initial(ctx.amps, ctx.lambda_sq, ctx.schedule, ctx.params, ctx.s, ctx.conv)?;
    let mut trace = vec![state.clone()];
    while state.j < ctx.schedule.j_max && state.residual_norm >= ctx.schedule.residual_floor {
        match newton_step(&state, ctx) {
            Ok(next) => {
                state = next;
                trace.push(state.clone());
            }
            Err(e @ Error::CertificateFailed { .. }) => {
                let mut last = state.clone();
                last.accepted = false;
                trace.push(last);
                return Ok(PSolveOutcome {
                    v: state.v,
                    trace,
                    excluded: Some(e),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PSolveOutcome {
        v: state.v,
        trace,
        excluded: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSplitReport {
    pub j: u32,
    pub n: i64,
    /// `‖(I - P_N) T P_{N/2} ŵ‖`.
    pub near_piece: f64,
    /// `‖(T - T_N)(I - P_{N/2}) ŵ‖`.
    pub far_piece: f64,
    /// `‖(T - T_N) ŵ‖`, for the identity `total = near + far` as fields.
    pub total: f64,
    /// `‖(T - T_N) ŵ - near - far‖`; zero up to rounding.
    pub split_defect: f64,
    /// `(1/3) e^{-2 N^c}`.
    pub bound: f64,
    pub slack: f64,
    pub near_ok: bool,
    pub far_ok: bool,
}

/// Applies the full (untruncated) linearization at `u` to `f` and keeps the
/// part outside `|ξ|_1 < N`, off `S`. For `f` supported inside the ball this
/// is `(T - T_N) f`.
fn outside_apply(
    phi: &FourierField,
    f: &FourierField,
    lambda_sq: f64,
    params: &ProblemParams,
    s: &ResonantSet,
    n: i64,
    cfg: &ConvolutionConfig,
) -> Result<FourierField> {
    let e2 = params.eps * params.eps;
    let conv = conv::product(phi, f, cfg)?;
    let mut out = FourierField::zero(params.d);
    let mut sites: Vec<&LatticeIndex> = f.iter().chain(conv.iter()).map(|(xi, _)| xi).collect();
    sites.sort();
    sites.dedup();
    for xi in sites {
        if !xi.is_representative() || s.contains(xi) || xi.one_norm() < n {
            continue;
        }
        let v = params.linear_symbol(xi, lambda_sq) * f.get(xi) + e2 * params.weight(&xi.m) * conv.get(xi);
        out.set_pair(xi.clone(), v);
    }
    Ok(out)
}

/// Audits the split `(T - T_N) ŵ = (I - P_N) T P_{N/2} ŵ + (T - T_N)(I - P_{N/2}) ŵ`
/// for the step `before -> after`. A piece passes when `slack * piece` stays
/// below `(1/3) e^{-2 N^c}`.
pub fn tail_split_check(
    before: &NewtonState,
    after: &NewtonState,
    ctx: &StepContext,
    slack: f64,
) -> Result<TailSplitReport> {
    let n = after.n_j;
    let w = after.v.add_scaled(&before.v, -1.0);
    let u = base_field(ctx.s, ctx.amps)?.add_scaled(&before.v, 1.0);
    let phi = u.square(ctx.conv)?.scale(3.0);
    let half = w.project_ball((n + 1) / 2);
    let rest = w.add_scaled(&half, -1.0);
    let near = outside_apply(&phi, &half, ctx.lambda_sq, ctx.params, ctx.s, n, ctx.conv)?;
    let far = outside_apply(&phi, &rest, ctx.lambda_sq, ctx.params, ctx.s, n, ctx.conv)?;
    let total = outside_apply(&phi, &w, ctx.lambda_sq, ctx.params, ctx.s, n, ctx.conv)?;
    let split_defect = total.add_scaled(&near, -1.0).add_scaled(&far, -1.0).l2_norm();
    let bound = (-2.0 * (n as f64).powf(ctx.schedule.c)).exp() / 3.0;
    let (near_piece, far_piece) = (near.l2_norm(), far.l2_norm());
    Ok(TailSplitReport {
        j: before.j,
        n,
        near_piece,
        far_piece,
        total: total.l2_norm(),
        split_defect,
        bound,
        slack,
        near_ok: slack * near_piece < bound,
        far_ok: slack * far_piece < bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeAudit {
    pub step: f64,
    /// `‖∂v/∂λ‖` and `‖∂v/∂p0‖`, central differences.
    pub dv_dlambda: f64,
    pub dv_dp0: f64,
    /// `sup_ξ |∂v̂(ξ)| e^{|ξ|_1^c}` for each direction.
    pub gevrey_dlambda: f64,
    pub gevrey_dp0: f64,
}

/// Central finite differences of the converged `v` in `λ` and `p0`.
/// Diagnostic only; any exclusion at a displaced point is an error.
pub fn derivative_audit(ctx: &StepContext, h: f64) -> Result<DerivativeAudit> {
    let solve = |amps: &Amplitudes, lambda_sq: f64| -> Result<FourierField> {
        let c = StepContext {
            amps,
            lambda_sq,
            ..ctx.clone()
        };
        let out = run_p_solver(&c)?;
        match out.excluded {
            Some(e) => Err(e),
            None => Ok(out.v),
        }
    };
    let lambda = ctx.lambda_sq.sqrt();
    let vp = solve(ctx.amps, (lambda + h) * (lambda + h))?;
    let vm = solve(ctx.amps, (lambda - h) * (lambda - h))?;
    let dl = vp.add_scaled(&vm, -1.0).scale(0.5 / h);
    let mut up = ctx.amps.clone();
    up.p0 += h;
    let mut dn = ctx.amps.clone();
    dn.p0 -= h;
    let dp = solve(&up, ctx.lambda_sq)?
        .add_scaled(&solve(&dn, ctx.lambda_sq)?, -1.0)
        .scale(0.5 / h);
    Ok(DerivativeAudit {
        step: h,
        dv_dlambda: dl.l2_norm(),
        dv_dp0: dp.l2_norm(),
        gevrey_dlambda: dl.gevrey_sup(ctx.schedule.c),
        gevrey_dp0: dp.gevrey_sup(ctx.schedule.c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::resonant_set;

    fn setup(eps: f64, alpha: f64) -> (ProblemParams, ResonantSet) {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), alpha, eps).unwrap();
        let s = resonant_set(&p);
        (p, s)
    }

    #[test]
    fn schedule_validation() {
        assert!(ScaleSchedule::default().validate(false).unwrap().is_empty());
        let bad = ScaleSchedule {
            c: 0.05,
            ..Default::default()
        };
        assert!(bad.validate(false).is_err());
        assert_eq!(bad.validate(true).unwrap().len(), 1);
        let bad = ScaleSchedule {
            c1: 2.0,
            ..Default::default()
        };
        assert!(bad.validate(false).is_err());
    }

    #[test]
    fn g_vanishes_without_nonlinearity() {
        let (p, s) = setup(0.0, 0.0);
        let amps = Amplitudes::leading(1.0, &s);
        let g = evaluate_g(&amps, p.lambda0_sq, &FourierField::zero(1), &p, &s, &Default::default()).unwrap();
        assert_eq!(g.l2_norm(), 0.0);
    }

    #[test]
    fn g_at_third_harmonic() {
        let (p, s) = setup(1e-2, 0.0);
        let amps = Amplitudes::leading(1.0, &s);
        let g = evaluate_g(&amps, p.lambda0_sq, &FourierField::zero(1), &p, &s, &Default::default()).unwrap();
        let got = g.get(&LatticeIndex::new(vec![3], 3));
        assert!((got - 1e-4 / 8.0).abs() < 1e-18);
        assert_eq!(g.get(&LatticeIndex::new(vec![1], 1)), 0.0);
    }

    #[test]
    fn zero_eps_converges_immediately() {
        let (p, s) = setup(0.0, 0.05);
        let amps = Amplitudes::leading(1.5, &s);
        let schedule = ScaleSchedule::default();
        let ctx = StepContext {
            amps: &amps,
            lambda_sq: p.lambda0_sq,
            schedule: &schedule,
            params: &p,
            s: &s,
            conv: &Default::default(),
            cert: &Default::default(),
        };
        let out = run_p_solver(&ctx).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert!(out.v.is_empty());
    }

    #[test]
    fn one_step_contracts() {
        let (p, s) = setup(1e-3, 0.05);
        let amps = Amplitudes::leading(1.5, &s);
        let schedule = ScaleSchedule::default();
        let ctx = StepContext {
            amps: &amps,
            lambda_sq: p.lambda0_sq,
            schedule: &schedule,
            params: &p,
            s: &s,
            conv: &Default::default(),
            cert: &Default::default(),
        };
        let s0 = NewtonState::initial(&amps, p.lambda0_sq, &schedule, &p, &s, &Default::default()).unwrap();
        let s1 = newton_step(&s0, &ctx).unwrap();
        assert!(s1.residual_norm * 1e2 <= s0.residual_norm);
        assert!(s1.v.support_radius() < 16);
        assert_eq!(s1.v.symmetry_defect(), 0.0);
    }
}
