//! Space-time Fourier lattice: sites, symmetric coefficient fields, the
//! resonant set and the projections built on it.
//!
//! A site is `ξ = (m, n) ∈ Z^d × Z`; `m` is the spatial mode and `n` the
//! temporal one. Every field carried around by the solver is real and even,
//! `û(ξ) = û(-ξ)`, so [`FourierField`] only ever stores both members of a pair
//! together.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conv::{self, ConvolutionConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub m: Vec<i64>,
    pub n: i64,
}

impl LatticeIndex {
    pub fn new(m: impl Into<Vec<i64>>, n: i64) -> Self {
        Self { m: m.into(), n }
    }

    pub fn zero(d: usize) -> Self {
        Self { m: vec![0; d], n: 0 }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn one_norm(&self) -> i64 {
        one_norm(self)
    }

    /// `|m|^2`, Euclidean.
    pub fn m_sq(&self) -> i64 {
        self.m.iter().map(|x| x * x).sum()
    }

    pub fn neg(&self) -> Self {
        Self {
            m: self.m.iter().map(|x| -x).collect(),
            n: -self.n,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: self.m.iter().zip(&other.m).map(|(a, b)| a + b).collect(),
            n: self.n + other.n,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: self.m.iter().zip(&other.m).map(|(a, b)| a - b).collect(),
            n: self.n - other.n,
        }
    }

    pub fn l1_dist(&self, other: &Self) -> i64 {
        self.m.iter().zip(&other.m).map(|(a, b)| (a - b).abs()).sum::<i64>() + (self.n - other.n).abs()
    }

    pub fn is_zero(&self) -> bool {
        self.n == 0 && self.m.iter().all(|x| *x == 0)
    }

    /// Canonical member of the pair `{ξ, -ξ}`: `n > 0`, or `n = 0` and the
    /// first nonzero spatial coordinate positive. The origin is its own
    /// representative.
    pub fn is_representative(&self) -> bool {
        if self.n != 0 {
            return self.n > 0;
        }
        match self.m.iter().find(|x| **x != 0) {
            Some(x) => *x > 0,
            None => true,
        }
    }

    /// Coordinates as `[m_1, .., m_d, n]`.
    pub fn coords(&self) -> Vec<i64> {
        let mut c = self.m.clone();
        c.push(self.n);
        c
    }

    pub fn from_coords(c: &[i64]) -> Self {
        let (n, m) = c.split_last().expect("at least one coordinate");
        Self { m: m.to_vec(), n: *n }
    }
}

impl fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {})", self.m, self.n)
    }
}

/// `|(m, n)|_1 = Σ|m_k| + |n|`.
pub fn one_norm(xi: &LatticeIndex) -> i64 {
    xi.m.iter().map(|x| x.abs()).sum::<i64>() + xi.n.abs()
}

/// Japanese bracket `<m> = (|m|^2 + 1)^{1/2}`.
pub fn bracket(m: &[i64]) -> f64 {
    ((m.iter().map(|x| x * x).sum::<i64>() + 1) as f64).sqrt()
}

/// `<m>^α`, the symbol of the fractional derivative.
pub fn fractional_weight(m: &[i64], alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        bracket(m).powf(alpha)
    }
}

/// All sites of `Z^d × Z` with `|ξ|_1 <= r`, ordered by `|ξ|_1` and then
/// lexicographically.
pub fn ball_sites(d: usize, r: i64) -> Vec<LatticeIndex> {
    let mut out = Vec::new();
    if r < 0 {
        return out;
    }
    let mut coords = vec![0i64; d + 1];
    fill_ball(r, &mut coords, 0, &mut out);
    out.sort_by(|a, b| a.one_norm().cmp(&b.one_norm()).then_with(|| a.cmp(b)));
    out
}

fn fill_ball(r: i64, coords: &mut Vec<i64>, k: usize, out: &mut Vec<LatticeIndex>) {
    if k == coords.len() {
        out.push(LatticeIndex::from_coords(coords));
        return;
    }
    let left = r - coords[..k].iter().map(|c| c.abs()).sum::<i64>();
    for c in -left..=left {
        coords[k] = c;
        fill_ball(r, coords, k + 1, out);
    }
    coords[k] = 0;
}

/// Physical constants of one problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub d: usize,
    pub m0: Vec<i64>,
    pub rho: f64,
    pub alpha: f64,
    pub eps: f64,
    /// `|m0|^2 + ρ`, kept exactly so that `λ0^2 - |m0|^2 - ρ` is zero by
    /// construction.
    pub lambda0_sq: f64,
    pub lambda0: f64,
}

impl ProblemParams {
    pub fn new(m0: impl Into<Vec<i64>>, rho: f64, alpha: f64, eps: f64) -> Result<Self> {
        let m0 = m0.into();
        if m0.is_empty() {
            return Err(Error::InvalidParams("d must be at least 1".into()));
        }
        if m0.iter().all(|x| *x == 0) {
            return Err(Error::InvalidParams("|m0| must be nonzero".into()));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParams(format!("rho must be positive, got {rho}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParams(format!("eps must be >= 0, got {eps}")));
        }
        let lambda0_sq = m0.iter().map(|x| x * x).sum::<i64>() as f64 + rho;
        Ok(Self {
            d: m0.len(),
            m0,
            rho,
            alpha,
            eps,
            lambda0_sq,
            lambda0: lambda0_sq.sqrt(),
        })
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    /// `μ_m^2 = |m|^2 + ρ`. The only place this quantity is formed.
    pub fn mu_sq(&self, m: &[i64]) -> f64 {
        m.iter().map(|x| x * x).sum::<i64>() as f64 + self.rho
    }

    /// Diagonal symbol `-n^2 λ^2 + μ_m^2`, taking `λ^2` so that resonant
    /// sites vanish exactly at `λ^2 = λ0^2`.
    pub fn linear_symbol(&self, xi: &LatticeIndex, lambda_sq: f64) -> f64 {
        -((xi.n * xi.n) as f64) * lambda_sq + self.mu_sq(&xi.m)
    }

    pub fn weight(&self, m: &[i64]) -> f64 {
        fractional_weight(m, self.alpha)
    }

    pub fn m0_site(&self) -> LatticeIndex {
        LatticeIndex::new(self.m0.clone(), 1)
    }
}

/// `S = {(m, n) : |m| = |m0|, n = ±1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonantSet {
    pub sites: BTreeSet<LatticeIndex>,
    /// All `m` with `|m| = |m0|`; `m0` itself comes first.
    pub spatial: Vec<Vec<i64>>,
}

impl ResonantSet {
    /// `b = #{m : |m| = |m0|}`.
    pub fn b(&self) -> usize {
        self.spatial.len()
    }

    pub fn contains(&self, xi: &LatticeIndex) -> bool {
        self.sites.contains(xi)
    }

    /// Spatial modes other than `m0`, in the order used for `p_m` vectors.
    pub fn others(&self) -> &[Vec<i64>] {
        &self.spatial[1..]
    }
}

pub fn resonant_set(params: &ProblemParams) -> ResonantSet {
    let target: i64 = params.m0.iter().map(|x| x * x).sum();
    let r = params.m0.iter().map(|x| x.abs()).max().unwrap_or(0);
    let d = params.d;
    let mut spatial = Vec::new();
    let mut cur = vec![-r; d];
    'outer: loop {
        if cur.iter().map(|x| x * x).sum::<i64>() == target {
            spatial.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == d {
                break 'outer;
            }
            cur[k] += 1;
            if cur[k] > r {
                cur[k] = -r;
                k += 1;
            } else {
                break;
            }
        }
    }
    spatial.sort();
    let pos = spatial
        .iter()
        .position(|m| *m == params.m0)
        .expect("m0 on its own sphere");
    let m0 = spatial.remove(pos);
    spatial.insert(0, m0);
    let sites = spatial
        .iter()
        .flat_map(|m| [LatticeIndex::new(m.clone(), 1), LatticeIndex::new(m.clone(), -1)])
        .collect();
    ResonantSet { sites, spatial }
}

/// Finitely supported even real coefficient map `ξ ↦ û(ξ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "FieldJson", try_from = "FieldJson")]
pub struct FourierField {
    dim: usize,
    coeffs: BTreeMap<LatticeIndex, f64>,
    support_radius: i64,
}

impl FourierField {
    pub fn zero(d: usize) -> Self {
        Self {
            dim: d,
            coeffs: BTreeMap::new(),
            support_radius: 0,
        }
    }

    /// Builds a field from one value per `±ξ` pair.
    pub fn from_pairs(d: usize, pairs: impl IntoIterator<Item = (LatticeIndex, f64)>) -> Result<Self> {
        let mut f = Self::zero(d);
        for (xi, v) in pairs {
            if xi.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: xi.dim(),
                });
            }
            f.set_pair(xi, v);
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support_radius(&self) -> i64 {
        self.support_radius
    }

    pub fn get(&self, xi: &LatticeIndex) -> f64 {
        self.coeffs.get(xi).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeIndex, f64)> {
        self.coeffs.iter().map(|(k, v)| (k, *v))
    }

    /// Sets `û(ξ) = û(-ξ) = value`. A zero value removes the pair.
    pub fn set_pair(&mut self, xi: LatticeIndex, value: f64) {
        let neg = xi.neg();
        if value == 0.0 {
            let removed = self.coeffs.remove(&xi).is_some() | self.coeffs.remove(&neg).is_some();
            if removed && xi.one_norm() == self.support_radius {
                self.recompute_radius();
            }
            return;
        }
        self.support_radius = self.support_radius.max(xi.one_norm());
        self.coeffs.insert(neg, value);
        self.coeffs.insert(xi, value);
    }

    /// Inserts a value computed independently for `ξ` and `-ξ`; the pair is
    /// averaged so the stored field is exactly even.
    pub(crate) fn from_raw_symmetrized(d: usize, raw: BTreeMap<LatticeIndex, f64>) -> Self {
        let mut f = Self::zero(d);
        for (xi, v) in &raw {
            if !xi.is_representative() {
                continue;
            }
            let partner = raw.get(&xi.neg()).copied().unwrap_or(0.0);
            let avg = if xi.is_zero() { *v } else { 0.5 * (v + partner) };
            f.set_pair(xi.clone(), avg);
        }
        for (xi, v) in &raw {
            if !xi.is_representative() && !raw.contains_key(&xi.neg()) {
                f.set_pair(xi.neg(), 0.5 * v);
            }
        }
        f
    }

    fn recompute_radius(&mut self) {
        self.support_radius = self.coeffs.keys().map(one_norm).max().unwrap_or(0);
    }

    /// Largest `|û(ξ) - û(-ξ)|`; zero for every field built through this API.
    pub fn symmetry_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(xi, v)| (v - self.get(&xi.neg())).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        let mut raw = self.coeffs.clone();
        for (xi, v) in &other.coeffs {
            *raw.entry(xi.clone()).or_insert(0.0) += s * v;
        }
        let mut out = Self::zero(self.dim);
        for (xi, v) in raw {
            if v != 0.0 && xi.is_representative() {
                out.set_pair(xi, v);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|_, v| s * v)
    }

    /// Applies `f(ξ, value)` to every stored coefficient. `f` must be even in
    /// `ξ` for the result to stay symmetric.
    pub fn map(&self, mut f: impl FnMut(&LatticeIndex, f64) -> f64) -> Self {
        let mut out = Self::zero(self.dim);
        for (xi, v) in &self.coeffs {
            if xi.is_representative() {
                out.set_pair(xi.clone(), f(xi, *v));
            }
        }
        out
    }

    pub fn filter(&self, mut keep: impl FnMut(&LatticeIndex) -> bool) -> Self {
        let coeffs: BTreeMap<_, _> = self
            .coeffs
            .iter()
            .filter(|(xi, _)| keep(xi))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let mut out = Self {
            dim: self.dim,
            coeffs,
            support_radius: 0,
        };
        out.recompute_radius();
        out
    }

    /// `D^α`: multiplies `û(m, n)` by `<m>^α`.
    pub fn apply_fractional(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return self.clone();
        }
        self.map(|xi, v| v * fractional_weight(&xi.m, alpha))
    }

    /// `Γ_P`: removes the resonant sites.
    pub fn project_p(&self, s: &ResonantSet) -> Self {
        self.filter(|xi| !s.contains(xi))
    }

    /// `Γ_Q`: keeps only the resonant sites.
    pub fn project_q(&self, s: &ResonantSet) -> Self {
        self.filter(|xi| s.contains(xi))
    }

    /// `Γ_N`: off `S` and `|ξ|_1 < N`.
    pub fn project_n(&self, s: &ResonantSet, n: i64) -> Self {
        self.filter(|xi| !s.contains(xi) && xi.one_norm() < n)
    }

    /// `P_K`: restriction to `|ξ|_1 < K`, resonant sites included.
    pub fn project_ball(&self, k: i64) -> Self {
        self.filter(|xi| xi.one_norm() < k)
    }

    /// `Σ_{ξ ∉ exclude} |û(ξ)| e^{|ξ|_1^c}`.
    pub fn gevrey_weighted_sum(&self, c: f64, exclude: &BTreeSet<LatticeIndex>) -> f64 {
        self.coeffs
            .iter()
            .filter(|(xi, _)| !exclude.contains(*xi))
            .map(|(xi, v)| v.abs() * (xi.one_norm() as f64).powf(c).exp())
            .sum()
    }

    /// `sup_ξ |û(ξ)| e^{|ξ|_1^c}`.
    pub fn gevrey_sup(&self, c: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(xi, v)| v.abs() * (xi.one_norm() as f64).powf(c).exp())
            .fold(0.0, f64::max)
    }

    /// Coefficients of `u^3` (triple convolution).
    pub fn cube(&self, cfg: &ConvolutionConfig) -> Result<Self> {
        conv::power(self, 3, cfg, conv::Path::Auto)
    }

    /// Coefficients of `u^2`.
    pub fn square(&self, cfg: &ConvolutionConfig) -> Result<Self> {
        conv::power(self, 2, cfg, conv::Path::Auto)
    }

    /// Value of the hull at a physical point `(x, θ)`; diagnostic only.
    pub fn sample(&self, x: &[f64], theta: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(xi, v)| {
                let phase: f64 = xi.m.iter().zip(x).map(|(a, b)| *a as f64 * b).sum::<f64>() + xi.n as f64 * theta;
                v * phase.cos()
            })
            .sum()
    }
}

/// `u^3` with the configured cap; free-function form of [`FourierField::cube`].
pub fn pointwise_cube(f: &FourierField, cfg: &ConvolutionConfig) -> Result<FourierField> {
    f.cube(cfg)
}

#[derive(Serialize, Deserialize)]
struct FieldRecord {
    m: Vec<i64>,
    n: i64,
    value: f64,
}

/// Wire form: one record per `±ξ` pair.
#[derive(Serialize, Deserialize)]
struct FieldJson {
    d: usize,
    support_radius: i64,
    coeffs: Vec<FieldRecord>,
}

impl From<FourierField> for FieldJson {
    fn from(f: FourierField) -> Self {
        let coeffs = f
            .coeffs
            .iter()
            .filter(|(xi, _)| xi.is_representative())
            .map(|(xi, v)| FieldRecord {
                m: xi.m.clone(),
                n: xi.n,
                value: *v,
            })
            .collect();
        Self {
            d: f.dim,
            support_radius: f.support_radius,
            coeffs,
        }
    }
}

impl TryFrom<FieldJson> for FourierField {
    type Error = Error;

    fn try_from(j: FieldJson) -> Result<Self> {
        let mut f = Self::zero(j.d);
        for r in j.coeffs {
            if r.m.len() != j.d {
                return Err(Error::DimensionMismatch {
                    expected: j.d,
                    found: r.m.len(),
                });
            }
            if !r.value.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "non-finite coefficient at ({:?}, {})",
                    r.m, r.n
                )));
            }
            f.set_pair(LatticeIndex::new(r.m, r.n), r.value);
        }
        if f.support_radius > j.support_radius {
            return Err(Error::InvalidParams(format!(
                "declared support radius {} smaller than actual {}",
                j.support_radius, f.support_radius
            )));
        }
        f.support_radius = j.support_radius.max(f.support_radius);
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_pair(d: usize, m: Vec<i64>, n: i64, v: f64) -> FourierField {
        FourierField::from_pairs(d, [(LatticeIndex::new(m, n), v)]).unwrap()
    }

    #[test]
    fn one_norm_examples() {
        assert_eq!(one_norm(&LatticeIndex::new(vec![2, -1], 3)), 6);
        assert_eq!(one_norm(&LatticeIndex::new(vec![0, 0], 0)), 0);
        assert_eq!(one_norm(&LatticeIndex::new(vec![5], -5)), 10);
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(ball_sites(1, 5).len(), 61);
        assert_eq!(ball_sites(2, 2).len(), 25);
        assert_eq!(ball_sites(1, 0), vec![LatticeIndex::zero(1)]);
        assert!(ball_sites(1, -1).is_empty());
    }

    #[test]
    fn resonant_set_examples() {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.0, 0.1).unwrap();
        let s = resonant_set(&p);
        assert_eq!(s.b(), 2);
        let expected: BTreeSet<_> = [
            LatticeIndex::new(vec![1], 1),
            LatticeIndex::new(vec![1], -1),
            LatticeIndex::new(vec![-1], 1),
            LatticeIndex::new(vec![-1], -1),
        ]
        .into_iter()
        .collect();
        assert_eq!(s.sites, expected);
        assert_eq!(s.spatial[0], vec![1]);

        let p = ProblemParams::new(vec![1, 0], 2f64.sqrt(), 0.0, 0.1).unwrap();
        let s = resonant_set(&p);
        assert_eq!((s.b(), s.sites.len()), (4, 8));

        let p = ProblemParams::new(vec![2, 1], 2f64.sqrt(), 0.0, 0.1).unwrap();
        let s = resonant_set(&p);
        // brute force over the box |m_k| <= 3
        let mut count = 0;
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                if a * a + b * b == 5 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 8);
        assert_eq!((s.b(), s.sites.len()), (8, 16));
    }

    #[test]
    fn lambda0_exact() {
        let p = ProblemParams::new(vec![1, 2], 0.7, 0.05, 0.1).unwrap();
        let s = resonant_set(&p);
        for xi in &s.sites {
            assert_eq!(p.linear_symbol(xi, p.lambda0_sq), 0.0);
        }
        assert!(ProblemParams::new(vec![0, 0], 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn fractional_examples() {
        let f = cos_pair(2, vec![1, 0], 0, 0.5);
        let g = f.apply_fractional(1.0);
        let want = 2f64.sqrt() / 2.0;
        assert!((g.get(&LatticeIndex::new(vec![1, 0], 0)) - want).abs() < 1e-15);
        assert!((g.get(&LatticeIndex::new(vec![-1, 0], 0)) - want).abs() < 1e-15);
        assert_eq!(f.apply_fractional(0.0), f);

        let f = cos_pair(1, vec![1], 1, 0.5);
        let g = f.apply_fractional(0.05);
        let want = 0.5 * 2f64.powf(0.025);
        assert!((g.get(&LatticeIndex::new(vec![1], 1)) - want).abs() < 1e-15);
        assert!((g.get(&LatticeIndex::new(vec![-1], -1)) - want).abs() < 1e-15);
    }

    #[test]
    fn gevrey_examples() {
        let empty = BTreeSet::new();
        assert_eq!(FourierField::zero(1).gevrey_weighted_sum(0.5, &empty), 0.0);

        let mut f = FourierField::zero(1);
        f.coeffs.insert(LatticeIndex::new(vec![1], 1), 0.5);
        f.support_radius = 2;
        let got = f.gevrey_weighted_sum(0.5, &empty);
        assert!((got - 0.5 * 2f64.sqrt().exp()).abs() < 1e-15);

        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.0, 0.1).unwrap();
        let s = resonant_set(&p);
        let u0 = cos_pair(1, vec![1], 1, 0.5);
        assert_eq!(u0.gevrey_weighted_sum(0.1, &s.sites), 0.0);
    }

    #[test]
    fn projection_examples() {
        let p = ProblemParams::new(vec![1], 2f64.sqrt(), 0.0, 0.1).unwrap();
        let s = resonant_set(&p);
        let on_s = FourierField::from_pairs(
            1,
            [
                (LatticeIndex::new(vec![1], 1), 0.3),
                (LatticeIndex::new(vec![-1], 1), 0.2),
            ],
        )
        .unwrap();
        assert!(on_s.project_p(&s).is_empty());

        let f = FourierField::from_pairs(
            1,
            [
                (LatticeIndex::new(vec![0], 0), 1.0),
                (LatticeIndex::new(vec![1], 0), 2.0),
                (LatticeIndex::new(vec![3], 3), 3.0),
            ],
        )
        .unwrap();
        let g = f.project_n(&s, 1);
        assert_eq!(g.len(), 1);
        assert_eq!(g.get(&LatticeIndex::zero(1)), 1.0);
    }

    #[test]
    fn set_pair_zero_removes_and_shrinks_radius() {
        let mut f = cos_pair(1, vec![3], 3, 1.0);
        f.set_pair(LatticeIndex::new(vec![1], 0), 2.0);
        assert_eq!(f.support_radius(), 6);
        f.set_pair(LatticeIndex::new(vec![-3], -3), 0.0);
        assert_eq!(f.len(), 2);
        assert_eq!(f.support_radius(), 1);
    }

    #[test]
    fn json_lists_one_record_per_pair() {
        let f = FourierField::from_pairs(
            2,
            [
                (LatticeIndex::new(vec![1, 0], 1), 0.75),
                (LatticeIndex::new(vec![0, 0], 0), -0.1),
                (LatticeIndex::new(vec![0, -2], 0), 1e-3),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["d"], 2);
        assert_eq!(v["coeffs"].as_array().unwrap().len(), 3);
        let back: FourierField = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);

        let bad = r#"{"d":2,"support_radius":3,"coeffs":[{"m":[1],"n":0,"value":1.0}]}"#;
        assert!(serde_json::from_str::<FourierField>(bad).is_err());
    }
}
