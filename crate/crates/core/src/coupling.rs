//! Randomized instances for the two coupling lemmas, an independent audit of
//! their hypotheses, and dense checks of their conclusions.
//!
//! Sites are integer vectors; the matrix is indexed by position in the site
//! list. Distances in decay conditions are ℓ¹. The cluster diameter and
//! separation conditions of the second lemma use Euclidean distance.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, operator_norm};

/// Dense inversion above this size is refused.
pub const MAX_SITES: usize = 2000;

const ATTEMPTS: usize = 100;

fn l1(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn euclid(a: &[i64], b: &[i64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| ((x - y) * (x - y)) as f64).sum::<f64>()).sqrt()
}

fn restrict(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

fn box_sites(d: usize, side: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..side).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    guarded_inverse(m, 1e14, 1e-12)
        .map(|(inv, _, _)| inv)
        .ok_or_else(|| Error::Precondition("matrix is numerically singular".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Constants {
    /// Entry bound on block inverses.
    pub b: f64,
    pub k: i64,
    /// Tail exponent: block inverse entries `< K^{-C}` beyond `K/100`.
    pub c_tail: f64,
    /// Cover windows have diameter `< C' K`.
    pub c_prime: f64,
    /// Decay exponent.
    pub c: f64,
}

impl C1Constants {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || !(self.c > 0.0 && self.c < 1.0) || !(self.b > 0.0) || !(self.c_prime > 0.0) {
            return Err(Error::Precondition(format!("invalid constants {self:?}")));
        }
        if !(self.b.ln() < (self.k as f64).powf(self.c) / 100.0) {
            return Err(Error::Precondition(format!(
                "need log B < K^c / 100, got log B = {}, K^c / 100 = {}",
                self.b.ln(),
                (self.k as f64).powf(self.c) / 100.0
            )));
        }
        Ok(())
    }

    /// `(100 C' K)^{1/(1-c)}`.
    pub fn decay_threshold(&self) -> f64 {
        (100.0 * self.c_prime * self.k as f64).powf(1.0 / (1.0 - self.c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Instance {
    pub seed: u64,
    pub d: usize,
    pub sites: Vec<Vec<i64>>,
    /// Row-major, `sites.len()` squared entries.
    pub matrix: Vec<f64>,
    /// Index sets of the covering windows.
    pub cover: Vec<Vec<usize>>,
    pub constants: C1Constants,
    /// Diagonal shifts tried before the hypotheses held.
    pub attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Constants {
    pub m: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// Size of the coupling part `S`.
    pub eps: f64,
    /// Lower bound of `|D|` off the clusters.
    pub rho: f64,
    pub c_exp: f64,
    pub c: f64,
}

impl C2Constants {
    pub fn validate(&self) -> Result<()> {
        if !(0.1 > self.eps1 && self.eps1 > self.eps2 && self.eps2 > self.eps3 && self.eps3 > 0.0) {
            return Err(Error::Precondition(format!(
                "need 1/10 > eps1 > eps2 > eps3 > 0, got {}, {}, {}",
                self.eps1, self.eps2, self.eps3
            )));
        }
        if !(self.m > 1.0 && self.rho > self.eps && self.eps > 0.0 && self.c > 0.0 && self.c < 1.0) {
            return Err(Error::Precondition(format!("invalid constants {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Instance {
    pub seed: u64,
    pub d: usize,
    /// Points of `Z^{d+1}`.
    pub sites: Vec<Vec<i64>>,
    pub diagonal: Vec<f64>,
    /// Row-major, zero diagonal.
    pub coupling: Vec<f64>,
    pub clusters: Vec<Vec<usize>>,
    pub constants: C2Constants,
    pub attempts: usize,
}

/// Replay file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma", rename_all = "lowercase")]
pub enum CouplingInstance {
    C1(C1Instance),
    C2(C2Instance),
}

impl C1Instance {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.sites.len();
        DMatrix::from_row_slice(n, n, &self.matrix)
    }
}

impl C2Instance {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.sites.len();
        let mut t = DMatrix::from_row_slice(n, n, &self.coupling);
        for (i, v) in self.diagonal.iter().enumerate() {
            t[(i, i)] += v;
        }
        t
    }

    /// Indices within Euclidean distance `M^{ε3}` of cluster `k`.
    pub fn neighbourhood(&self, k: usize) -> Vec<usize> {
        let r = self.constants.m.powf(self.constants.eps3);
        (0..self.sites.len())
            .filter(|&i| {
                self.clusters[k]
                    .iter()
                    .any(|&j| euclid(&self.sites[i], &self.sites[j]) <= r)
            })
            .collect()
    }
}

/// Window starts along one axis: stride `k`, last window flush with the end.
fn window_starts(len: i64, side: i64, k: i64) -> Vec<i64> {
    if side >= len {
        return vec![0];
    }
    let mut s: Vec<i64> = (0..).map(|i| i * k).take_while(|s| *s + side <= len).collect();
    if s.last() != Some(&(len - side)) {
        s.push(len - side);
    }
    s
}

/// Off-diagonal entries `amp U e^{-s^c}` with `U` uniform in `(-1, 1)`,
/// symmetric, filled in upper-triangular row-major order.
fn decaying_offdiag(rng: &mut ChaCha8Rng, sites: &[Vec<i64>], amp: f64, c: f64) -> DMatrix<f64> {
    let n = sites.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = amp * rng.gen_range(-1.0..1.0) * (-(l1(&sites[i], &sites[j]) as f64).powf(c)).exp();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Random symmetric matrix on the box `[0, side)^d` with off-diagonal decay
/// `e^{-s^c}`, covered by windows of side `3K` at stride `K`. The diagonal
/// is `±(shift + U)`; the shift grows until the block hypotheses hold.
pub fn gen_c1_instance(seed: u64, side: i64, constants: C1Constants, d: usize) -> Result<C1Instance> {
    constants.validate()?;
    if d == 0 || side < 1 {
        return Err(Error::Precondition("need d >= 1 and a nonempty box".into()));
    }
    let sites = box_sites(d, side);
    if sites.len() > MAX_SITES {
        return Err(Error::Precondition(format!(
            "{} sites exceeds the cap {MAX_SITES}",
            sites.len()
        )));
    }
    let k = constants.k;
    let w = (3 * k).min(side);
    let starts = window_starts(side, w, k);
    let mut cover = vec![Vec::new()];
    for _ in 0..d {
        cover = cover
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                starts.iter().map(move |s| {
                    let mut q = p.clone();
                    q.push(*s);
                    q
                })
            })
            .collect();
    }
    let cover: Vec<Vec<usize>> = cover
        .into_iter()
        .map(|lo| {
            (0..sites.len())
                .filter(|&i| sites[i].iter().zip(&lo).all(|(x, l)| *x >= *l && *x < *l + w))
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off = decaying_offdiag(&mut rng, &sites, 0.5, constants.c);
    let base: Vec<f64> = (0..sites.len())
        .map(|_| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            sign * rng.gen::<f64>()
        })
        .collect();
    let mut shift = 1.0;
    let mut last = String::new();
    for attempt in 1..=ATTEMPTS {
        let mut m = off.clone();
        for (i, b) in base.iter().enumerate() {
            m[(i, i)] = b.signum() * (shift + b.abs());
        }
        let inst = C1Instance {
            seed,
            d,
            sites: sites.clone(),
            matrix: m.transpose().as_slice().to_vec(),
            cover: cover.clone(),
            constants: constants.clone(),
            attempts: attempt,
        };
        let v = audit_c1(&inst);
        if v.is_empty() {
            return Ok(inst);
        }
        last = v.join("; ");
        shift *= 1.25;
    }
    Err(Error::InstanceGenerationFailed {
        attempts: ATTEMPTS,
        reason: last,
    })
}

/// Re-checks every hypothesis of the first lemma from the stored data.
/// Returns the violated conditions, empty when all hold.
pub fn audit_c1(inst: &C1Instance) -> Vec<String> {
    let mut bad = Vec::new();
    let k = &inst.constants;
    if let Err(e) = k.validate() {
        bad.push(e.to_string());
    }
    let n = inst.sites.len();
    if inst.matrix.len() != n * n {
        bad.push("matrix size does not match the site list".into());
        return bad;
    }
    let t = inst.matrix();
    for i in 0..n {
        for j in 0..n {
            if i != j && !(t[(i, j)].abs() < (-(l1(&inst.sites[i], &inst.sites[j]) as f64).powf(k.c)).exp()) {
                bad.push(format!("off-diagonal decay fails at ({i}, {j})"));
                return bad;
            }
        }
    }
    let tail = (k.k as f64).powf(-k.c_tail);
    for (z, w) in inst.cover.iter().enumerate() {
        if w.is_empty() || w.iter().any(|&i| i >= n) {
            bad.push(format!("window {z} is empty or out of range"));
            continue;
        }
        let diam = w
            .iter()
            .flat_map(|&i| w.iter().map(move |&j| (i, j)))
            .map(|(i, j)| l1(&inst.sites[i], &inst.sites[j]))
            .max()
            .unwrap_or(0);
        if !((diam as f64) < k.c_prime * k.k as f64) {
            bad.push(format!("window {z} has diameter {diam}"));
        }
        let inv = match inverse(&restrict(&t, w)) {
            Ok(inv) => inv,
            Err(_) => {
                bad.push(format!("window {z} block is singular"));
                continue;
            }
        };
        for a in 0..w.len() {
            for b in 0..w.len() {
                let v = inv[(a, b)].abs();
                if !(v < k.b) {
                    bad.push(format!("window {z} inverse entry {v:.3e} >= B"));
                    return bad;
                }
                let s = l1(&inst.sites[w[a]], &inst.sites[w[b]]) as f64;
                if s > k.k as f64 / 100.0 && !(v < tail) {
                    bad.push(format!("window {z} inverse tail {v:.3e} >= K^-C at distance {s}"));
                    return bad;
                }
            }
        }
    }
    for i in 0..n {
        let ball: Vec<usize> = (0..n).filter(|&j| l1(&inst.sites[i], &inst.sites[j]) <= k.k).collect();
        if !inst
            .cover
            .iter()
            .any(|w| ball.iter().all(|j| w.binary_search(j).is_ok()))
        {
            bad.push(format!("no window contains the K-ball around site {i}"));
            break;
        }
    }
    bad
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Report {
    pub max_entry: f64,
    pub entry_bound: f64,
    pub entry_ok: bool,
    pub decay_threshold: f64,
    /// Pairs farther apart than the threshold; zero makes the decay
    /// conclusion vacuous.
    pub decay_pairs: usize,
    /// Largest `|T^{-1}(ξ, ξ')| e^{s^c / 2}` over those pairs.
    pub worst_decay_ratio: f64,
    pub decay_ok: bool,
    /// Largest inverse entry at each ℓ¹ distance.
    pub profile: Vec<(i64, f64)>,
}

impl C1Report {
    pub fn pass(&self) -> bool {
        self.entry_ok && self.decay_ok
    }
}

fn profile(inv: &DMatrix<f64>, sites: &[Vec<i64>]) -> Vec<(i64, f64)> {
    let mut best = std::collections::BTreeMap::new();
    for i in 0..sites.len() {
        for j in 0..sites.len() {
            let e = best.entry(l1(&sites[i], &sites[j])).or_insert(0.0f64);
            *e = e.max(inv[(i, j)].abs());
        }
    }
    best.into_iter().collect()
}

/// Checks `|T_Ω^{-1}| < 2B` entrywise and the decay beyond the threshold.
pub fn verify_c1(inst: &C1Instance) -> Result<C1Report> {
    let inv = inverse(&inst.matrix())?;
    let k = &inst.constants;
    let max_entry = inv.amax();
    let threshold = k.decay_threshold();
    let mut pairs = 0;
    let mut worst = 0.0f64;
    for i in 0..inst.sites.len() {
        for j in 0..inst.sites.len() {
            let s = l1(&inst.sites[i], &inst.sites[j]) as f64;
            if s > threshold {
                pairs += 1;
                worst = worst.max(inv[(i, j)].abs() * (0.5 * s.powf(k.c)).exp());
            }
        }
    }
    Ok(C1Report {
        max_entry,
        entry_bound: 2.0 * k.b,
        entry_ok: max_entry < 2.0 * k.b,
        decay_threshold: threshold,
        decay_pairs: pairs,
        worst_decay_ratio: worst,
        decay_ok: worst < 1.0,
        profile: profile(&inv, &inst.sites),
    })
}

/// Cluster placement request for [`gen_c2_instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Layout {
    /// Box side; `Ω = [0, side)^{d+1}`.
    pub side: i64,
    pub clusters: usize,
    /// Sites per cluster, at most `d + 2`.
    pub cluster_size: usize,
}

/// A small cluster anchored at `p`: the point and its unit steps along the
/// first coordinates. Euclidean diameter `√2` once it has three sites.
fn cluster_shape(p: &[i64], size: usize) -> Vec<Vec<i64>> {
    let mut out = vec![p.to_vec()];
    for axis in 0..size.saturating_sub(1) {
        let mut q = p.to_vec();
        q[axis] += 1;
        out.push(q);
    }
    out
}

/// Instance for the second lemma: `D` with `|D| ∈ [ρ, 2ρ]` and random sign
/// off the clusters, `D ∈ [0.2ρ, 0.5ρ]` on them, and a decaying symmetric
/// `S` rescaled until `‖S‖ < ε`.
pub fn gen_c2_instance(seed: u64, layout: &C2Layout, constants: C2Constants, d: usize) -> Result<C2Instance> {
    constants.validate()?;
    if layout.cluster_size == 0 || layout.cluster_size > d + 2 {
        return Err(Error::Precondition(format!("cluster size must be in 1..={}", d + 2)));
    }
    let sites = box_sites(d + 1, layout.side);
    if sites.len() > MAX_SITES {
        return Err(Error::Precondition(format!(
            "{} sites exceeds the cap {MAX_SITES}",
            sites.len()
        )));
    }
    if sites
        .iter()
        .any(|s| s.iter().map(|x| x.abs()).sum::<i64>() as f64 > constants.m)
    {
        return Err(Error::Precondition("Ω must lie in the M-ball".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = |p: &[i64]| sites.iter().position(|s| s.as_slice() == p);
    let sep = constants.m.powf(constants.eps2);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut attempts = 0;
    while clusters.len() < layout.clusters {
        attempts += 1;
        if attempts > ATTEMPTS * layout.clusters.max(1) {
            return Err(Error::InstanceGenerationFailed {
                attempts,
                reason: "could not place separated clusters".into(),
            });
        }
        let anchor: Vec<i64> = (0..=d).map(|_| rng.gen_range(0..layout.side)).collect();
        let shape = cluster_shape(&anchor, layout.cluster_size);
        let Some(idx) = shape.iter().map(|p| index(p)).collect::<Option<Vec<usize>>>() else {
            continue;
        };
        let far = clusters.iter().all(|c| {
            c.iter()
                .all(|&i| idx.iter().all(|&j| euclid(&sites[i], &sites[j]) > sep))
        });
        if far {
            clusters.push(idx);
        }
    }
    let in_cluster: Vec<bool> = (0..sites.len())
        .map(|i| clusters.iter().any(|c| c.contains(&i)))
        .collect();
    let rho = constants.rho;
    let diagonal: Vec<f64> = in_cluster
        .iter()
        .map(|&bad| {
            if bad {
                rho * rng.gen_range(0.2..=0.5)
            } else {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                sign * rho * rng.gen_range(1.0..=2.0)
            }
        })
        .collect();
    let mut s = decaying_offdiag(&mut rng, &sites, constants.eps, constants.c);
    let mut last = String::new();
    for attempt in 1..=ATTEMPTS {
        let inst = C2Instance {
            seed,
            d,
            sites: sites.clone(),
            diagonal: diagonal.clone(),
            coupling: s.transpose().as_slice().to_vec(),
            clusters: clusters.clone(),
            constants: constants.clone(),
            attempts: attempt,
        };
        let v = audit_c2(&inst);
        if v.is_empty() {
            return Ok(inst);
        }
        last = v.join("; ");
        s *= 0.5;
    }
    Err(Error::InstanceGenerationFailed {
        attempts: ATTEMPTS,
        reason: last,
    })
}

/// Re-checks every hypothesis of the second lemma from the stored data.
pub fn audit_c2(inst: &C2Instance) -> Vec<String> {
    let mut bad = Vec::new();
    let k = &inst.constants;
    if let Err(e) = k.validate() {
        bad.push(e.to_string());
    }
    let n = inst.sites.len();
    if inst.coupling.len() != n * n || inst.diagonal.len() != n {
        bad.push("matrix size does not match the site list".into());
        return bad;
    }
    if inst
        .sites
        .iter()
        .any(|s| s.iter().map(|x| x.abs()).sum::<i64>() as f64 > k.m)
    {
        bad.push("Ω leaves the M-ball".into());
    }
    let diam_cap = k.m.powf(k.eps1);
    let sep = k.m.powf(k.eps2);
    for (a, c) in inst.clusters.iter().enumerate() {
        if c.is_empty() || c.iter().any(|&i| i >= n) {
            bad.push(format!("cluster {a} is empty or out of range"));
            return bad;
        }
        for &i in c {
            for &j in c {
                if !(euclid(&inst.sites[i], &inst.sites[j]) < diam_cap) {
                    bad.push(format!("cluster {a} diameter reaches M^eps1"));
                }
            }
        }
        for (b, e) in inst.clusters.iter().enumerate().skip(a + 1) {
            if c.iter()
                .any(|&i| e.iter().any(|&j| !(euclid(&inst.sites[i], &inst.sites[j]) > sep)))
            {
                bad.push(format!("clusters {a} and {b} closer than M^eps2"));
            }
        }
    }
    let s = DMatrix::from_row_slice(n, n, &inst.coupling);
    // S is symmetric by construction but the audit does not assume it
    let s_norm = if crate::linalg::asymmetry(&s) == 0.0 {
        s.clone().symmetric_eigenvalues().amax()
    } else {
        operator_norm(&s, 1e-12, 5000)
    };
    if !(s_norm < k.eps) {
        bad.push(format!("‖S‖ = {s_norm:.3e} >= eps"));
    }
    for i in 0..n {
        for j in 0..n {
            let bound = if i == j {
                k.eps
            } else {
                k.eps * (-(l1(&inst.sites[i], &inst.sites[j]) as f64).powf(k.c)).exp()
            };
            if !(s[(i, j)].abs() < bound) {
                bad.push(format!("coupling entry ({i}, {j}) exceeds its decay bound"));
                return bad;
            }
        }
    }
    for i in 0..n {
        let clustered = inst.clusters.iter().any(|c| c.contains(&i));
        if !clustered && !(inst.diagonal[i].abs() > k.rho) {
            bad.push(format!("|D| <= rho at site {i}"));
            return bad;
        }
    }
    let t = inst.matrix();
    let cap = k.m.powf(k.c_exp);
    for a in 0..inst.clusters.len() {
        let nb = inst.neighbourhood(a);
        match guarded_inverse(&restrict(&t, &nb), 1e14, 1e-12) {
            Some((_, norm, _)) if norm < cap => {}
            Some((_, norm, _)) => bad.push(format!("cluster {a} neighbourhood inverse norm {norm:.3e} >= M^C")),
            None => bad.push(format!("cluster {a} neighbourhood block is singular")),
        }
    }
    bad
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Report {
    pub inv_norm: f64,
    pub norm_bound: f64,
    pub norm_ok: bool,
    pub decay_threshold: f64,
    pub decay_pairs: usize,
    /// Largest `|T^{-1}(ξ, ξ')| e^{s^c / 10}` beyond the threshold.
    pub worst_decay_ratio: f64,
    pub decay_ok: bool,
}

impl C2Report {
    pub fn pass(&self) -> bool {
        self.norm_ok && self.decay_ok
    }
}

/// Checks `‖(T|Ω)^{-1}‖ < ρ^{-1} M^{C+1}` and the decay beyond `M^{2ε1}`.
pub fn verify_c2(inst: &C2Instance) -> Result<C2Report> {
    let k = &inst.constants;
    let inv = inverse(&inst.matrix())?;
    let inv_norm = operator_norm(&inv, 1e-12, 5000);
    let norm_bound = k.m.powf(k.c_exp + 1.0) / k.rho;
    let threshold = k.m.powf(2.0 * k.eps1);
    let mut pairs = 0;
    let mut worst = 0.0f64;
    for i in 0..inst.sites.len() {
        for j in 0..inst.sites.len() {
            let s = l1(&inst.sites[i], &inst.sites[j]) as f64;
            if s > threshold {
                pairs += 1;
                worst = worst.max(inv[(i, j)].abs() * (0.1 * s.powf(k.c)).exp());
            }
        }
    }
    Ok(C2Report {
        inv_norm,
        norm_bound,
        norm_ok: inv_norm < norm_bound,
        decay_threshold: threshold,
        decay_pairs: pairs,
        worst_decay_ratio: worst,
        decay_ok: worst < 1.0,
    })
}
