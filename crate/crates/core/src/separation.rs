//! Singular sites of the linear symbol and the geometry of their clusters.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::conv::ConvolutionConfig;
use crate::error::{Error, Result};
use crate::lattice::{FourierField, LatticeIndex, ProblemParams, ResonantSet};
use crate::operator::{assemble_on, OperatorKind, SiteBasis};

/// `(nλ + σ)^2 - |m|^2`. With `σ = 0` this is the symbol `n²λ² - |m|²`
/// evaluated in the same order as a plain double loop would.
fn defect(xi: &LatticeIndex, lambda: f64, sigma: f64) -> f64 {
    let m2: f64 = xi.m.iter().map(|v| (v * v) as f64).sum();
    if sigma == 0.0 {
        -(-((xi.n * xi.n) as f64) * lambda * lambda + m2)
    } else {
        let t = xi.n as f64 * lambda + sigma;
        t * t - m2
    }
}

/// Whether `|(nλ + σ)^2 - |m|^2| < b`.
pub fn is_singular(xi: &LatticeIndex, lambda: f64, sigma: f64, b: f64) -> bool {
    defect(xi, lambda, sigma).abs() < b
}

/// `{ξ : |ξ|_1 <= N, |-n²λ² + |m|²| < B}`, sorted.
pub fn singular_sites(d: usize, lambda: f64, n: i64, b: f64) -> Result<Vec<LatticeIndex>> {
    singular_sites_shifted(d, lambda, 0.0, n, b)
}

/// Same with the shift `σ`: `|(nλ + σ)^2 - |m|^2| < B`.
pub fn singular_sites_shifted(d: usize, lambda: f64, sigma: f64, n: i64, b: f64) -> Result<Vec<LatticeIndex>> {
    if d == 0 {
        return Err(Error::InvalidParams("d must be at least 1".into()));
    }
    if n < 1 || !(b > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need N >= 1 and B > 0, got N = {n}, B = {b}"
        )));
    }
    let mut out = Vec::new();
    let mut m = vec![0i64; d];
    for t in -n..=n {
        let c = t as f64 * lambda + sigma;
        let target = c * c;
        collect_shell(&mut m, 0, n - t.abs(), 0, target, b, t, lambda, sigma, &mut out);
    }
    out.sort();
    Ok(out)
}

/// Fills `m[k..]` with `|m|_1 <= left` and `|m|^2` in `(target - b, target + b)`,
/// pruning on the partial sum of squares. Membership is decided by
/// [`is_singular`] so boundary cases follow one formula.
#[allow(clippy::too_many_arguments)]
fn collect_shell(
    m: &mut Vec<i64>,
    k: usize,
    left: i64,
    sq: i64,
    target: f64,
    b: f64,
    t: i64,
    lambda: f64,
    sigma: f64,
    out: &mut Vec<LatticeIndex>,
) {
    let last = k + 1 == m.len();
    // one unit of slack in the pruning; the exact test comes last
    let hi = target + b + 1.0;
    for c in -left..=left {
        let s = sq + c * c;
        if s as f64 >= hi {
            continue;
        }
        m[k] = c;
        if last {
            let xi = LatticeIndex::new(m.clone(), t);
            if is_singular(&xi, lambda, sigma, b) {
                out.push(xi);
            }
        } else {
            collect_shell(m, k + 1, left - c.abs(), s, target, b, t, lambda, sigma, out);
        }
    }
    m[k] = 0;
}

/// All offsets `δ` with `0 < |δ|_1 <= r` in `Z^{dim}`.
fn offsets(dim: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; dim];
    fn rec(k: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if k == cur.len() {
            if cur.iter().any(|c| *c != 0) {
                out.push(cur.clone());
            }
            return;
        }
        for c in -left..=left {
            cur[k] = c;
            rec(k + 1, left - c.abs(), cur, out);
        }
        cur[k] = 0;
    }
    rec(0, r, &mut cur, &mut out);
    out
}

fn shift(xi: &LatticeIndex, delta: &[i64]) -> LatticeIndex {
    let (dn, dm) = delta.split_last().expect("offset has an n component");
    LatticeIndex {
        m: xi.m.iter().zip(dm).map(|(a, b)| a + b).collect(),
        n: xi.n + dn,
    }
}

/// Largest integer distance strictly below `gap`.
fn hop_radius(gap: f64) -> i64 {
    (gap.ceil() as i64 - 1).max(0)
}

/// Adjacency lists for the graph joining sites at ℓ¹ distance `< gap`.
fn neighbour_lists(sites: &[LatticeIndex], gap: f64) -> Vec<Vec<usize>> {
    let r = hop_radius(gap);
    let mut adj = vec![Vec::new(); sites.len()];
    if sites.is_empty() || r == 0 {
        return adj;
    }
    let dim = sites[0].dim() + 1;
    let offs = offsets(dim, r);
    if offs.len() < sites.len() {
        let index: HashMap<&LatticeIndex, usize> = sites.iter().enumerate().map(|(i, s)| (s, i)).collect();
        for (i, s) in sites.iter().enumerate() {
            for o in &offs {
                if let Some(&j) = index.get(&shift(s, o)) {
                    adj[i].push(j);
                }
            }
            adj[i].sort_unstable();
        }
    } else {
        for i in 0..sites.len() {
            for j in (i + 1)..sites.len() {
                if sites[i].l1_dist(&sites[j]) <= r {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
    }
    adj
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

fn components(n: usize, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for (i, list) in adj.iter().enumerate() {
        for &j in list {
            uf.union(i, j);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularCluster {
    pub id: usize,
    pub sites: Vec<LatticeIndex>,
    /// Largest pairwise ℓ¹ distance.
    pub diameter: i64,
    pub min_abs_n: i64,
    pub centroid: Vec<f64>,
}

impl SingularCluster {
    fn from_sites(id: usize, mut sites: Vec<LatticeIndex>) -> Self {
        sites.sort();
        let mut diameter = 0;
        for i in 0..sites.len() {
            for j in (i + 1)..sites.len() {
                diameter = diameter.max(sites[i].l1_dist(&sites[j]));
            }
        }
        let dim = sites[0].dim() + 1;
        let mut centroid = vec![0.0; dim];
        for s in &sites {
            for (c, v) in centroid.iter_mut().zip(s.coords()) {
                *c += v as f64;
            }
        }
        for c in &mut centroid {
            *c /= sites.len() as f64;
        }
        Self {
            id,
            min_abs_n: sites.iter().map(|s| s.n.abs()).min().unwrap_or(0),
            diameter,
            centroid,
            sites,
        }
    }

    pub fn size(&self) -> usize {
        self.sites.len()
    }

    /// Sites within ℓ¹ distance `radius` of the cluster, minus `exclude`.
    pub fn neighbourhood(&self, radius: i64, exclude: &ResonantSet) -> Vec<LatticeIndex> {
        let mut set: HashSet<LatticeIndex> = self.sites.iter().cloned().collect();
        if radius > 0 {
            let offs = offsets(self.sites[0].dim() + 1, radius);
            for s in &self.sites {
                for o in &offs {
                    set.insert(shift(s, o));
                }
            }
        }
        let mut out: Vec<_> = set.into_iter().filter(|s| !exclude.contains(s)).collect();
        out.sort();
        out
    }
}

/// Connected components of the graph joining sites at ℓ¹ distance `< gap`.
/// Clusters come out ordered by their smallest site.
pub fn cluster_decompose(sites: &[LatticeIndex], gap: f64) -> Result<Vec<SingularCluster>> {
    if !(gap > 0.0) {
        return Err(Error::InvalidParams(format!("gap must be positive, got {gap}")));
    }
    let mut sorted = sites.to_vec();
    sorted.sort();
    sorted.dedup();
    let adj = neighbour_lists(&sorted, gap);
    Ok(components(sorted.len(), &adj)
        .into_iter()
        .enumerate()
        .map(|(id, g)| SingularCluster::from_sites(id, g.into_iter().map(|i| sorted[i].clone()).collect()))
        .collect())
}

/// Looks for two sites in different clusters closer than `gap`. `None` means
/// the clusters are pairwise at distance `>= gap`.
pub fn separation_violation(clusters: &[SingularCluster], gap: f64) -> Option<(LatticeIndex, LatticeIndex)> {
    let owner: HashMap<&LatticeIndex, usize> = clusters
        .iter()
        .flat_map(|c| c.sites.iter().map(move |s| (s, c.id)))
        .collect();
    let r = hop_radius(gap);
    if owner.is_empty() || r == 0 {
        return None;
    }
    let dim = clusters[0].sites[0].dim() + 1;
    let offs = offsets(dim, r);
    for c in clusters {
        for s in &c.sites {
            for o in &offs {
                let t = shift(s, o);
                if let Some(&id) = owner.get(&t) {
                    if id != c.id {
                        return Some((s.clone(), t));
                    }
                }
            }
        }
    }
    None
}

/// `C6` with `diam = N^{α C6 + α}`, i.e. the exponent the largest cluster
/// actually needs. `None` when every cluster is a point.
pub fn fitted_c6(clusters: &[SingularCluster], n: i64, alpha: f64) -> Option<f64> {
    let diam = clusters.iter().map(|c| c.diameter).max()?;
    if diam == 0 {
        return None;
    }
    Some(((diam as f64).ln() / (n as f64).ln() - alpha) / alpha)
}

/// Which coordinate the multiplicity cap applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapAxis {
    /// At most `B'` chain sites share the same time frequency `n`.
    Temporal,
    /// At most `B'` chain sites share the same spatial mode `m`.
    Spatial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub b: f64,
    pub b_prime: usize,
    pub sigma: f64,
    /// Sites are drawn from `|ξ|_1 <= radius`.
    pub radius: i64,
    /// Node expansions before giving up on exactness.
    pub budget: u64,
    pub cap_axis: CapAxis,
}

impl ChainOptions {
    pub fn new(b: f64, b_prime: usize, radius: i64) -> Self {
        Self {
            b,
            b_prime,
            sigma: 0.0,
            radius,
            budget: 1_000_000,
            cap_axis: CapAxis::Temporal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub b: f64,
    pub b_prime: usize,
    pub radius: i64,
    pub k_max: usize,
    /// True when the search finished inside the budget, so `k_max` is the
    /// maximum over the ball.
    pub exact: bool,
    /// Proven upper bound: per component, the smaller of its size and the
    /// cap-limited count, maximized over components.
    pub upper_bound: usize,
    pub expansions: u64,
    pub witness: Vec<LatticeIndex>,
}

fn cap_key(xi: &LatticeIndex, axis: CapAxis) -> Vec<i64> {
    match axis {
        CapAxis::Temporal => vec![xi.n],
        CapAxis::Spatial => xi.m.clone(),
    }
}

/// Checks a chain against the hypotheses: distinct singular sites inside
/// the ball, consecutive ℓ¹ steps `< B`, at most `B'` sites per cap key.
pub fn validate_chain(chain: &[LatticeIndex], lambda: f64, opts: &ChainOptions) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    let mut counts: HashMap<Vec<i64>, usize> = HashMap::new();
    for (i, xi) in chain.iter().enumerate() {
        if !seen.insert(xi) {
            return Err(format!("site {xi} repeated"));
        }
        if xi.one_norm() > opts.radius {
            return Err(format!("site {xi} outside the ball"));
        }
        if !is_singular(xi, lambda, opts.sigma, opts.b) {
            return Err(format!("site {xi} is not singular"));
        }
        if i > 0 && (chain[i - 1].l1_dist(xi) as f64) >= opts.b {
            return Err(format!("step {} -> {xi} too long", chain[i - 1]));
        }
        let c = counts.entry(cap_key(xi, opts.cap_axis)).or_default();
        *c += 1;
        if *c > opts.b_prime {
            return Err(format!("cap exceeded at {xi}"));
        }
    }
    Ok(())
}

/// The chain `((k, 0, .., 0), k)` for `|k| <= radius / 2`, singular for
/// `λ = 1` at every `B > 0`.
pub fn null_cone_chain(d: usize, radius: i64) -> Vec<LatticeIndex> {
    let k = radius / 2;
    (-k..=k)
        .map(|t| {
            let mut m = vec![0; d];
            m[0] = t;
            LatticeIndex::new(m, t)
        })
        .collect()
}

struct ChainSearch<'a> {
    adj: &'a [Vec<usize>],
    key: &'a [usize],
    cap: usize,
    budget: u64,
    expansions: u64,
    exhausted: bool,
    visited: Vec<bool>,
    used: Vec<usize>,
    path: Vec<usize>,
    best: Vec<usize>,
    // scratch for the reachability bound
    mark: Vec<u32>,
    stamp: u32,
    avail: Vec<usize>,
}

impl ChainSearch<'_> {
    /// Upper bound on how many more sites a chain ending at `v` can take:
    /// sites reachable through unvisited nodes, limited per cap key.
    fn reach_bound(&mut self, v: usize) -> usize {
        self.stamp += 1;
        let stamp = self.stamp;
        let mut queue = VecDeque::new();
        let mut touched = Vec::new();
        for &w in &self.adj[v] {
            if !self.visited[w] && self.mark[w] != stamp {
                self.mark[w] = stamp;
                queue.push_back(w);
            }
        }
        while let Some(w) = queue.pop_front() {
            let k = self.key[w];
            if self.avail[k] == 0 {
                touched.push(k);
            }
            self.avail[k] += 1;
            for &x in &self.adj[w] {
                if !self.visited[x] && self.mark[x] != stamp {
                    self.mark[x] = stamp;
                    queue.push_back(x);
                }
            }
        }
        let mut total = 0;
        for k in touched {
            total += self.avail[k].min(self.cap - self.used[k]);
            self.avail[k] = 0;
        }
        total
    }

    fn dfs(&mut self, v: usize) {
        if self.exhausted {
            return;
        }
        self.expansions += 1;
        if self.expansions > self.budget {
            self.exhausted = true;
            return;
        }
        self.visited[v] = true;
        self.used[self.key[v]] += 1;
        self.path.push(v);
        if self.path.len() > self.best.len() {
            self.best = self.path.clone();
        }
        if self.path.len() + self.reach_bound(v) > self.best.len() {
            let mut next: Vec<usize> = self.adj[v]
                .iter()
                .copied()
                .filter(|&w| !self.visited[w] && self.used[self.key[w]] < self.cap)
                .collect();
            // fewest onward options first tends to find long paths early
            next.sort_by_key(|&w| self.adj[w].iter().filter(|&&x| !self.visited[x]).count());
            for w in next {
                if self.used[self.key[w]] < self.cap {
                    self.dfs(w);
                }
                if self.exhausted {
                    break;
                }
            }
        }
        self.path.pop();
        self.used[self.key[v]] -= 1;
        self.visited[v] = false;
    }
}

/// Longest chain of distinct singular sites in the ball with consecutive
/// ℓ¹ steps `< B` and at most `B'` sites per cap key, by branch and bound.
///
/// The expansion budget is shared across components; components are searched
/// in decreasing order of their upper bound and skipped once they cannot
/// beat the best chain.
pub fn max_chain_length(d: usize, lambda: f64, opts: &ChainOptions) -> Result<ChainReport> {
    if opts.b_prime == 0 {
        return Err(Error::InvalidParams("B' must be at least 1".into()));
    }
    let sites = singular_sites_shifted(d, lambda, opts.sigma, opts.radius, opts.b)?;
    let adj = neighbour_lists(&sites, opts.b);
    let mut key_ids: HashMap<Vec<i64>, usize> = HashMap::new();
    let key: Vec<usize> = sites
        .iter()
        .map(|s| {
            let next = key_ids.len();
            *key_ids.entry(cap_key(s, opts.cap_axis)).or_insert(next)
        })
        .collect();
    let mut comps: Vec<(usize, Vec<usize>)> = components(sites.len(), &adj)
        .into_iter()
        .map(|g| {
            let mut per: HashMap<usize, usize> = HashMap::new();
            for &v in &g {
                *per.entry(key[v]).or_default() += 1;
            }
            let bound = per.values().map(|c| (*c).min(opts.b_prime)).sum::<usize>();
            (bound, g)
        })
        .collect();
    comps.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1[0].cmp(&b.1[0])));
    let upper_bound = comps.first().map_or(0, |c| c.0);

    let mut search = ChainSearch {
        adj: &adj,
        key: &key,
        cap: opts.b_prime,
        budget: opts.budget,
        expansions: 0,
        exhausted: false,
        visited: vec![false; sites.len()],
        used: vec![0; key_ids.len()],
        path: Vec::new(),
        best: Vec::new(),
        mark: vec![0; sites.len()],
        stamp: 0,
        avail: vec![0; key_ids.len()],
    };
    'outer: for (bound, group) in &comps {
        if *bound <= search.best.len() {
            break;
        }
        for &start in group {
            search.dfs(start);
            if search.exhausted || search.best.len() >= *bound {
                if search.exhausted {
                    break 'outer;
                }
                break;
            }
        }
    }
    let exact = !search.exhausted;
    let witness: Vec<LatticeIndex> = search.best.iter().map(|&i| sites[i].clone()).collect();
    Ok(ChainReport {
        b: opts.b,
        b_prime: opts.b_prime,
        radius: opts.radius,
        k_max: witness.len(),
        exact,
        upper_bound,
        expansions: search.expansions,
        witness,
    })
}

/// `C''` with `k = (B B')^{C''}`.
pub fn chain_exponent(k: usize, b: f64, b_prime: usize) -> f64 {
    (k as f64).ln() / (b * b_prime as f64).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenVariation {
    pub lambda: f64,
    pub delta: f64,
    /// Eigenvalues at `λ`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Centered differences of the sorted eigenvalues.
    pub finite_difference: Vec<f64>,
    /// `<ψ_s, ∂_λ T̃ ψ_s>`; absent on degenerate spectra.
    pub first_order: Option<Vec<f64>>,
    pub min_gap: f64,
    pub degenerate: bool,
    /// Largest `|fd - fo| / max(|fd|, |fo|)`.
    pub max_rel_disagreement: Option<f64>,
    pub min_abs_derivative: f64,
}

/// Eigenvalue derivatives of `T̃` restricted to `sites`, by centered
/// differences at `λ ± δ` and by first-order perturbation with
/// `∂_λ T̃ = diag(-2n²λ / <m>^α)`.
pub fn cluster_eigen_variation(
    u: &FourierField,
    params: &ProblemParams,
    sites: Vec<LatticeIndex>,
    lambda: f64,
    delta: f64,
    cfg: &ConvolutionConfig,
) -> Result<EigenVariation> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
    }
    let basis = SiteBasis::from_sites(sites)?;
    let n = basis.sites().iter().map(|s| s.one_norm()).max().unwrap_or(0) + 1;
    let at = |l: f64| -> Result<DMatrix<f64>> {
        Ok(assemble_on(u, l * l, params, basis.clone(), n, OperatorKind::TTilde, cfg)?.entries)
    };
    let sorted = |m: DMatrix<f64>| -> Vec<f64> {
        let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        v
    };
    let plus = sorted(at(lambda + delta)?);
    let minus = sorted(at(lambda - delta)?);
    let finite_difference: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * delta)).collect();

    let centre = at(lambda)?;
    let scale = centre.amax().max(1.0);
    let eig = SymmetricEigen::new(centre);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let min_gap = eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let degenerate = eigenvalues.iter().any(|v| !v.is_finite()) || min_gap < 1e-8 * scale;

    let dt: Vec<f64> = basis
        .sites()
        .iter()
        .map(|s| -2.0 * (s.n * s.n) as f64 * lambda / params.weight(&s.m))
        .collect();
    let first_order = (!degenerate).then(|| {
        order
            .iter()
            .map(|&i| {
                let psi = eig.eigenvectors.column(i);
                psi.iter().zip(&dt).map(|(p, w)| p * p * w).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    let max_rel_disagreement = first_order.as_ref().map(|fo| {
        fo.iter()
            .zip(&finite_difference)
            .map(|(a, b)| {
                let s = a.abs().max(b.abs());
                if s == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / s
                }
            })
            .fold(0.0, f64::max)
    });
    let min_abs_derivative = finite_difference.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    Ok(EigenVariation {
        lambda,
        delta,
        eigenvalues,
        finite_difference,
        first_order,
        min_gap,
        degenerate,
        max_rel_disagreement,
        min_abs_derivative,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: usize,
    pub size: usize,
    pub diameter: i64,
    pub min_abs_n: i64,
    pub centroid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub lambda: f64,
    pub n: i64,
    pub threshold: f64,
    pub gap: f64,
    pub site_count: usize,
    pub separated: bool,
    pub fitted_c6: Option<f64>,
    pub clusters: Vec<ClusterSummary>,
}

impl ClusterReport {
    pub fn new(lambda: f64, n: i64, threshold: f64, gap: f64, alpha: f64, clusters: &[SingularCluster]) -> Self {
        Self {
            lambda,
            n,
            threshold,
            gap,
            site_count: clusters.iter().map(|c| c.size()).sum(),
            separated: separation_violation(clusters, gap).is_none(),
            fitted_c6: fitted_c6(clusters, n, alpha),
            clusters: clusters
                .iter()
                .map(|c| ClusterSummary {
                    id: c.id,
                    size: c.size(),
                    diameter: c.diameter,
                    min_abs_n: c.min_abs_n,
                    centroid: c.centroid.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::resonant_set;

    #[test]
    fn origin_only_for_tiny_threshold() {
        let s = singular_sites(2, 1.2345678, 6, 1e-9).unwrap();
        assert_eq!(s, vec![LatticeIndex::zero(2)]);
    }

    #[test]
    fn null_form_at_lambda_one() {
        let s = singular_sites(1, 1.0, 10, 0.5).unwrap();
        assert!(s.iter().all(|x| x.m[0].abs() == x.n.abs()));
        // |m| = |n|, |m| + |n| <= 10: 1 + 4 * 5
        assert_eq!(s.len(), 21);
    }

    #[test]
    fn decomposition_basics() {
        assert!(cluster_decompose(&[], 2.0).unwrap().is_empty());
        let a = LatticeIndex::new(vec![0], 0);
        let b = LatticeIndex::new(vec![2], 1);
        let c = cluster_decompose(&[a.clone(), b.clone()], 2.0).unwrap();
        assert_eq!(c.len(), 2);
        let c = cluster_decompose(&[a, b], 3.5).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].diameter, 3);
        assert!(cluster_decompose(&[], 0.0).is_err());
    }

    #[test]
    fn pairwise_and_hashed_neighbours_agree() {
        let sites = singular_sites(2, 1.37, 12, 3.0).unwrap();
        let a = neighbour_lists(&sites, 3.0);
        let mut b = vec![Vec::new(); sites.len()];
        for i in 0..sites.len() {
            for j in 0..sites.len() {
                if i != j && sites[i].l1_dist(&sites[j]) < 3 {
                    b[i].push(j);
                }
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn isolated_sites_give_unit_chains() {
        let mut opts = ChainOptions::new(1.0, 1, 10);
        opts.b = 0.5;
        let r = max_chain_length(2, 1.6180339887, &opts).unwrap();
        assert_eq!(r.k_max, 1);
        assert!(r.exact);
    }

    #[test]
    fn null_cone_chain_is_valid() {
        let opts = ChainOptions::new(4.0, 1, 40);
        let chain = null_cone_chain(2, 40);
        assert_eq!(chain.len(), 41);
        validate_chain(&chain, 1.0, &opts).unwrap();
        assert!(validate_chain(&chain, 1.1, &opts).is_err());
    }

    #[test]
    fn chain_search_finds_valid_chains() {
        let opts = ChainOptions::new(3.0, 2, 14);
        let r = max_chain_length(2, 1.4147, &opts).unwrap();
        assert!(r.exact);
        assert!(r.k_max <= r.upper_bound);
        validate_chain(&r.witness, 1.4147, &opts).unwrap();
    }

    #[test]
    fn diagonal_cluster_derivative_is_exact() {
        let params = ProblemParams::new(vec![1], 2f64.sqrt(), 0.05, 0.0).unwrap();
        let sites = vec![
            LatticeIndex::new(vec![7], 4),
            LatticeIndex::new(vec![9], 6),
            LatticeIndex::new(vec![3], -2),
        ];
        let lambda = params.lambda0;
        let ev = cluster_eigen_variation(
            &FourierField::zero(1),
            &params,
            sites.clone(),
            lambda,
            1e-6,
            &ConvolutionConfig::default(),
        )
        .unwrap();
        assert!(!ev.degenerate);
        let mut want: Vec<(f64, f64)> = sites
            .iter()
            .map(|s| {
                (
                    params.linear_symbol(s, lambda * lambda) / params.weight(&s.m),
                    -2.0 * (s.n * s.n) as f64 * lambda / params.weight(&s.m),
                )
            })
            .collect();
        want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for ((_, w), fo) in want.iter().zip(ev.first_order.unwrap()) {
            assert!((w - fo).abs() < 1e-12 * w.abs());
        }
        assert!(ev.max_rel_disagreement.unwrap() < 1e-6);
    }

    #[test]
    fn neighbourhood_excludes_resonant_sites() {
        let params = ProblemParams::new(vec![1], 2f64.sqrt(), 0.05, 0.0).unwrap();
        let s = resonant_set(&params);
        let c = SingularCluster::from_sites(0, vec![LatticeIndex::new(vec![0], 1)]);
        let nb = c.neighbourhood(1, &s);
        assert_eq!(nb.len(), 5 - 2);
    }
}
