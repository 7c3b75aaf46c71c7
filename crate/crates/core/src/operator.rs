//! Truncated linearized operators `T` and `T̃`, certified dense inversion and
//! the Neumann-series inverse of the perturbative regime.
//!
//! With `φ = 3u²` the linearization of the equation at `u` is
//! `T(ξ, ξ') = D(ξ) δ + ε² <m>^α φ̂(ξ - ξ')`; its symmetric companion is
//! `T̃ = Λ⁻¹ T`, `Λ = diag <m>^α`.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conv::ConvolutionConfig;
use crate::error::{Error, Result};
use crate::lattice::{ball_sites, resonant_set, FourierField, LatticeIndex, ProblemParams, ResonantSet};
use crate::linalg;

/// Ordered non-resonant sites; the rows and columns of a truncated operator.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteBasis {
    sites: Vec<LatticeIndex>,
    index_of: HashMap<LatticeIndex, usize>,
}

impl SiteBasis {
    /// `{|ξ|_1 < N} \ S`. Closed under `ξ ↦ -ξ`.
    pub fn ball(d: usize, s: &ResonantSet, n: i64) -> Result<Self> {
        let sites: Vec<_> = ball_sites(d, n - 1).into_iter().filter(|xi| !s.contains(xi)).collect();
        Self::from_sites(sites)
    }

    /// Arbitrary site list, e.g. a cluster neighbourhood. Rejects duplicates
    /// and empty input.
    pub fn from_sites(sites: Vec<LatticeIndex>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::EmptyBasis);
        }
        let d = sites[0].dim();
        let mut index_of = HashMap::with_capacity(sites.len());
        for (i, xi) in sites.iter().enumerate() {
            if xi.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: xi.dim(),
                });
            }
            if index_of.insert(xi.clone(), i).is_some() {
                return Err(Error::InvalidParams(format!("duplicate site {xi} in basis")));
            }
        }
        Ok(Self { sites, index_of })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[LatticeIndex] {
        &self.sites
    }

    pub fn index_of(&self, xi: &LatticeIndex) -> Option<usize> {
        self.index_of.get(xi).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    T,
    TTilde,
}

impl OperatorKind {
    fn code(self) -> u64 {
        match self {
            OperatorKind::T => 0,
            OperatorKind::TTilde => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    pub basis: SiteBasis,
    pub entries: DMatrix<f64>,
    pub kind: OperatorKind,
    pub params: ProblemParams,
    pub lambda_sq: f64,
    /// Truncation `N`; the basis lies in `|ξ|_1 < N` when built by [`assemble`].
    pub n: i64,
    /// `φ = 3u²`.
    pub source_field: FourierField,
}

impl TruncatedOperator {
    pub fn lambda(&self) -> f64 {
        self.lambda_sq.sqrt()
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }
}

/// Assembles `T_N` or `T̃_N` at `u` on `{|ξ|_1 < N} \ S`.
pub fn assemble(
    u: &FourierField,
    lambda_sq: f64,
    params: &ProblemParams,
    n: i64,
    kind: OperatorKind,
    cfg: &ConvolutionConfig,
) -> Result<TruncatedOperator> {
    if n < 1 {
        return Err(Error::InvalidParams(format!("truncation N must be positive, got {n}")));
    }
    let s = resonant_set(params);
    let basis = SiteBasis::ball(params.d, &s, n)?;
    assemble_on(u, lambda_sq, params, basis, n, kind, cfg)
}

/// Same as [`assemble`] on a caller-supplied basis.
pub fn assemble_on(
    u: &FourierField,
    lambda_sq: f64,
    params: &ProblemParams,
    basis: SiteBasis,
    n: i64,
    kind: OperatorKind,
    cfg: &ConvolutionConfig,
) -> Result<TruncatedOperator> {
    if u.dim() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            found: u.dim(),
        });
    }
    let phi = u.square(cfg)?.scale(3.0);
    let phi_at: HashMap<&LatticeIndex, f64> = phi.iter().collect();
    let e2 = params.eps * params.eps;
    let size = basis.len();
    let sites = basis.sites();
    let weights: Vec<f64> = sites.iter().map(|xi| params.weight(&xi.m)).collect();
    let mut entries = DMatrix::zeros(size, size);
    if !phi.is_empty() && e2 != 0.0 {
        for (j, b) in sites.iter().enumerate() {
            for (i, a) in sites.iter().enumerate() {
                let diff = a.sub(b);
                if diff.one_norm() > phi.support_radius() {
                    continue;
                }
                if let Some(v) = phi_at.get(&diff) {
                    entries[(i, j)] = match kind {
                        OperatorKind::T => e2 * weights[i] * v,
                        OperatorKind::TTilde => e2 * v,
                    };
                }
            }
        }
    }
    for (i, xi) in sites.iter().enumerate() {
        let d = params.linear_symbol(xi, lambda_sq);
        entries[(i, i)] += match kind {
            OperatorKind::T => d,
            OperatorKind::TTilde => d / weights[i],
        };
    }
    Ok(TruncatedOperator {
        basis,
        entries,
        kind,
        params: params.clone(),
        lambda_sq,
        n,
        source_field: phi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseCertificate {
    pub l2_norm: f64,
    pub l2_bound: f64,
    pub offdiag_ok: bool,
    /// Largest `|M⁻¹(ξ,ξ')| / e^{-|ξ-ξ'|_1^c / 2}` over `|ξ-ξ'|_1 > N^{1/2}`.
    pub worst_ratio: f64,
    pub n: i64,
    pub c: f64,
    pub c2: f64,
    pub condition: f64,
}

impl InverseCertificate {
    pub fn pass(&self) -> bool {
        self.l2_norm < self.l2_bound && self.offdiag_ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    /// Condition estimates above this count as singular.
    pub cond_cap: f64,
    /// Relative tolerance of the power iteration.
    pub norm_tol: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            cond_cap: 1e14,
            norm_tol: 1e-10,
        }
    }
}

/// `exp((log N)^{C2})`.
pub fn l2_bound(n: i64, c2: f64) -> f64 {
    (n as f64).ln().powf(c2).exp()
}

/// Inverts `m` and checks `‖m⁻¹‖ < exp((log N)^{C2})` and
/// `|m⁻¹(ξ,ξ')| < e^{-|ξ-ξ'|_1^c / 2}` for `|ξ-ξ'|_1 > N^{1/2}`. Never fails:
/// a singular matrix yields a failing certificate with infinite norm.
pub fn certify(
    m: &DMatrix<f64>,
    sites: &[LatticeIndex],
    n: i64,
    c2: f64,
    c: f64,
    opts: &CertificateOptions,
) -> (Option<DMatrix<f64>>, InverseCertificate) {
    let bound = l2_bound(n, c2);
    let Some((inv, l2_norm, condition)) = linalg::guarded_inverse(m, opts.cond_cap, opts.norm_tol) else {
        return (
            None,
            InverseCertificate {
                l2_norm: f64::INFINITY,
                l2_bound: bound,
                offdiag_ok: false,
                worst_ratio: f64::INFINITY,
                n,
                c,
                c2,
                condition: f64::INFINITY,
            },
        );
    };
    let near = (n as f64).sqrt();
    let mut worst_ratio = 0.0f64;
    for (j, b) in sites.iter().enumerate() {
        for (i, a) in sites.iter().enumerate() {
            let s = a.l1_dist(b) as f64;
            if s > near {
                let ratio = inv[(i, j)].abs() * (0.5 * s.powf(c)).exp();
                worst_ratio = worst_ratio.max(ratio);
            }
        }
    }
    let cert = InverseCertificate {
        l2_norm,
        l2_bound: bound,
        offdiag_ok: worst_ratio < 1.0,
        worst_ratio,
        n,
        c,
        c2,
        condition,
    };
    (Some(inv), cert)
}

pub fn invert_with_certificate(
    op: &TruncatedOperator,
    c2: f64,
    c: f64,
    opts: &CertificateOptions,
) -> (Option<DMatrix<f64>>, InverseCertificate) {
    certify(&op.entries, op.basis.sites(), op.n, c2, c, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannReport {
    pub terms: usize,
    /// `min |D̃|` over the basis.
    pub diag_min: f64,
    /// `(γ/2) N^{-2C3-α}`.
    pub diag_threshold: f64,
    /// `ε² N^{4C3+2α+2d}`.
    pub smallness: f64,
    pub l2_norm: f64,
    /// `(4/γ) N^{2C3+α}`.
    pub norm_bound: f64,
    pub norm_ok: bool,
    /// Largest `|T̃⁻¹(ξ,ξ')| / e^{-slack |ξ-ξ'|_1^c}` over `ξ ≠ ξ'`.
    pub worst_decay_ratio: f64,
    pub decay_ok: bool,
    pub slack: f64,
}

/// Neumann-series inverse `Σ_k (-ε² D̃⁻¹ S)^k D̃⁻¹` of a `T̃` operator, with
/// the regime checks `min|D̃| > (γ/2) N^{-2C3-α}` and
/// `ε² N^{4C3+2α+2d} < 1/2`, `C3 = 2d`.
pub fn neumann_invert(
    op: &TruncatedOperator,
    gamma: f64,
    c: f64,
    slack: f64,
    opts: &CertificateOptions,
) -> Result<(DMatrix<f64>, NeumannReport)> {
    if op.kind != OperatorKind::TTilde {
        return Err(Error::InvalidParams(
            "Neumann inversion expects a T_tilde operator".into(),
        ));
    }
    let p = &op.params;
    let d = p.d as f64;
    let c3 = 2.0 * d;
    let nf = op.n as f64;
    let sites = op.basis.sites();
    let size = sites.len();

    let dtilde: Vec<f64> = sites
        .iter()
        .map(|xi| p.linear_symbol(xi, op.lambda_sq) / p.weight(&xi.m))
        .collect();
    let diag_min = dtilde.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let diag_threshold = 0.5 * gamma * nf.powf(-2.0 * c3 - p.alpha);
    let smallness = p.eps * p.eps * nf.powf(4.0 * c3 + 2.0 * p.alpha + 2.0 * d);
    if !(diag_min > diag_threshold) {
        return Err(Error::OutsidePerturbativeRegime(format!(
            "min |D~| = {diag_min:e} not above (gamma/2) N^(-2C3-alpha) = {diag_threshold:e}"
        )));
    }
    if !(smallness < 0.5) {
        return Err(Error::OutsidePerturbativeRegime(format!(
            "eps^2 N^(4C3+2alpha+2d) = {smallness:e} not below 1/2"
        )));
    }

    // K = -ε² D̃⁻¹ S, read off the assembled operator
    let mut k = op.entries.clone();
    for i in 0..size {
        k[(i, i)] -= dtilde[i];
    }
    for i in 0..size {
        let s = -1.0 / dtilde[i];
        for j in 0..size {
            k[(i, j)] *= s;
        }
    }
    let mut term = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(size, dtilde.iter().map(|v| 1.0 / v)));
    let scale = term.amax();
    let mut sum = term.clone();
    let mut terms = 1;
    while terms < 10_000 {
        term = &k * &term;
        terms += 1;
        sum += &term;
        if term.amax() < 1e-16 * scale.max(1.0) {
            break;
        }
    }

    let l2_norm = linalg::operator_norm(&sum, opts.norm_tol, 2000);
    let norm_bound = 4.0 / gamma * nf.powf(2.0 * c3 + p.alpha);
    let mut worst_decay_ratio = 0.0f64;
    for (j, b) in sites.iter().enumerate() {
        for (i, a) in sites.iter().enumerate() {
            if i != j {
                let s = a.l1_dist(b) as f64;
                worst_decay_ratio = worst_decay_ratio.max(sum[(i, j)].abs() * (slack * s.powf(c)).exp());
            }
        }
    }
    let report = NeumannReport {
        terms,
        diag_min,
        diag_threshold,
        smallness,
        l2_norm,
        norm_bound,
        norm_ok: l2_norm < norm_bound,
        worst_decay_ratio,
        decay_ok: worst_decay_ratio < 1.0,
        slack,
    };
    Ok((sum, report))
}

/// For each ℓ¹ separation `s`, the largest `|m(ξ,ξ')|` with `|ξ-ξ'|_1 = s`.
pub fn offdiag_decay_profile(m: &DMatrix<f64>, sites: &[LatticeIndex]) -> Vec<(i64, f64)> {
    let mut best: Vec<f64> = Vec::new();
    for (j, b) in sites.iter().enumerate() {
        for (i, a) in sites.iter().enumerate() {
            let s = a.l1_dist(b) as usize;
            if best.len() <= s {
                best.resize(s + 1, 0.0);
            }
            best[s] = best[s].max(m[(i, j)].abs());
        }
    }
    best.into_iter().enumerate().map(|(s, v)| (s as i64, v)).collect()
}

/// Writes `N`, `size`, kind code (u64 little-endian, 0 = T, 1 = T̃) and then
/// the matrix row-major as little-endian f64.
pub fn write_dense(mut w: impl Write, n: i64, kind: OperatorKind, m: &DMatrix<f64>) -> Result<()> {
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&kind.code().to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dense(mut r: impl Read) -> Result<(i64, OperatorKind, DMatrix<f64>)> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut r)?) as i64;
    let size = u64::from_le_bytes(next(&mut r)?) as usize;
    let kind = match u64::from_le_bytes(next(&mut r)?) {
        0 => OperatorKind::T,
        1 => OperatorKind::TTilde,
        other => return Err(Error::InvalidParams(format!("unknown operator kind code {other}"))),
    };
    let mut m = DMatrix::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            m[(i, j)] = f64::from_le_bytes(next(&mut r)?);
        }
    }
    Ok((n, kind, m))
}
