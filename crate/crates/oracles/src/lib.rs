//! Brute-force reference computations.
//!
//! Everything here works on plain data (`Vec<i64>` sites laid out as
//! `[m_1, .., m_d, n]`) and shares no code path with `cwbnlw-core`. The test
//! suites compare the optimized implementations against these.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

/// Site on the space-time lattice, `[m_1, .., m_d, n]`.
pub type Site = Vec<i64>;

/// Sparse coefficient map.
pub type Coeffs = BTreeMap<Site, f64>;

fn add(a: &[i64], b: &[i64]) -> Site {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn l1(s: &[i64]) -> i64 {
    s.iter().map(|x| x.abs()).sum()
}

/// `(f*g)(ξ) = Σ f(a) g(b)` over `a + b = ξ`, as a plain double loop.
pub fn convolve(f: &Coeffs, g: &Coeffs) -> Coeffs {
    let mut out = Coeffs::new();
    for (a, fa) in f {
        for (b, gb) in g {
            *out.entry(add(a, b)).or_insert(0.0) += fa * gb;
        }
    }
    out
}

/// Coefficients of `f^3` by an explicit triple loop.
pub fn triple_convolution(f: &Coeffs) -> Coeffs {
    let mut out = Coeffs::new();
    for (a, fa) in f {
        for (b, fb) in f {
            let ab = add(a, b);
            for (c, fc) in f {
                *out.entry(add(&ab, c)).or_insert(0.0) += fa * fb * fc;
            }
        }
    }
    out
}

/// All sites of `Z^dim` with `|ξ|_1 <= r`, by nested enumeration of the box.
pub fn l1_ball(dim: usize, r: i64) -> Vec<Site> {
    let mut out = Vec::new();
    let mut cur = vec![-r; dim];
    loop {
        if l1(&cur) <= r {
            out.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == dim {
                return out;
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
}

fn bracket(m: &[i64]) -> f64 {
    (m.iter().map(|x| (x * x) as f64).sum::<f64>() + 1.0).sqrt()
}

/// Instance description for [`full_system_newton`].
#[derive(Clone, Debug)]
pub struct FullSystem {
    pub d: usize,
    pub m0: Vec<i64>,
    pub rho: f64,
    pub alpha: f64,
    pub eps: f64,
    pub p0: f64,
    /// Truncation: unknowns live on `|ξ|_1 < n_trunc`.
    pub n_trunc: i64,
}

#[derive(Clone, Debug)]
pub struct FullSolution {
    pub lambda: f64,
    pub coeffs: Coeffs,
    pub iterations: usize,
    pub residual_sup: f64,
}

/// Physical-space sampler for even real fields on a `K^{d+1}` grid, by direct
/// cosine sums (no FFT).
struct Grid {
    k: usize,
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl Grid {
    fn new(dim: usize, k: usize) -> Self {
        let total = k.pow(dim as u32);
        let h = 2.0 * std::f64::consts::PI / k as f64;
        let points = (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; dim];
                for slot in p.iter_mut() {
                    *slot = (idx % k) as f64 * h;
                    idx /= k;
                }
                p
            })
            .collect();
        Self { k, dim, points }
    }

    fn synthesize(&self, f: &Coeffs) -> Vec<f64> {
        self.points
            .iter()
            .map(|x| {
                f.iter()
                    .map(|(s, v)| {
                        let phase: f64 = s.iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
                        v * phase.cos()
                    })
                    .sum()
            })
            .collect()
    }

    fn analyze(&self, values: &[f64], sites: &[Site]) -> Coeffs {
        let norm = (self.k as f64).powi(self.dim as i32);
        sites
            .iter()
            .map(|s| {
                let c: f64 = self
                    .points
                    .iter()
                    .zip(values)
                    .map(|(x, g)| {
                        let phase: f64 = s.iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
                        g * phase.cos()
                    })
                    .sum();
                (s.clone(), c / norm)
            })
            .collect()
    }
}

fn representative(s: &[i64]) -> bool {
    // last coordinate is n; compare n first then m lexicographically
    let n = *s.last().unwrap();
    if n != 0 {
        return n > 0;
    }
    for &x in &s[..s.len() - 1] {
        if x != 0 {
            return x > 0;
        }
    }
    true
}

fn neg(s: &[i64]) -> Site {
    s.iter().map(|x| -x).collect()
}

/// Dense Newton on the complete truncated equation
/// `(-(nλ)^2 + |m|^2 + ρ) û(ξ) + ε^2 <m>^α (u^3)^(ξ) = 0` for every
/// `|ξ|_1 < N`, with `û(±(m0, 1)) = p0/2` fixed and `λ` unknown.
///
/// Unknowns are one coefficient per `±ξ` pair plus `λ`. Cubic terms and the
/// Jacobian come from physical-space sampling on a grid, not from lattice
/// convolution.
pub fn full_system_newton(sys: &FullSystem, max_iter: usize, tol: f64) -> FullSolution {
    let dim = sys.d + 1;
    let r = sys.n_trunc - 1;
    let ball = l1_ball(dim, r);
    let reps: Vec<Site> = ball.iter().filter(|s| representative(s)).cloned().collect();
    let mut anchor = sys.m0.clone();
    anchor.push(1);
    let anchor_idx = reps.iter().position(|s| *s == anchor).expect("anchor inside ball");

    // grid large enough that u^3 (radius 3r) does not alias into radius 2r
    let k = (5 * r + 2) as usize;
    let grid = Grid::new(dim, k);
    let diff_ball = l1_ball(dim, 2 * r);

    let mut x = vec![0.0; reps.len()];
    x[anchor_idx] = sys.p0 / 2.0;
    let lambda0 = (sys.m0.iter().map(|v| (v * v) as f64).sum::<f64>() + sys.rho).sqrt();
    let mut lambda = lambda0;

    let expand = |x: &[f64]| -> Coeffs {
        let mut c = Coeffs::new();
        for (s, v) in reps.iter().zip(x) {
            c.insert(s.clone(), *v);
            c.insert(neg(s), *v);
        }
        c
    };

    let mut iterations = 0;
    let mut residual_sup = f64::INFINITY;
    for it in 0..max_iter {
        iterations = it + 1;
        let u = expand(&x);
        let phys = grid.synthesize(&u);
        let cube: Vec<f64> = phys.iter().map(|v| v * v * v).collect();
        let sq3: Vec<f64> = phys.iter().map(|v| 3.0 * v * v).collect();
        let cube_hat = grid.analyze(&cube, &reps);
        let phi_hat: HashMap<Site, f64> = grid.analyze(&sq3, &diff_ball).into_iter().collect();

        let nrep = reps.len();
        let mut f = DVector::zeros(nrep);
        let mut jac = DMatrix::zeros(nrep, nrep);
        for (i, s) in reps.iter().enumerate() {
            let m = &s[..sys.d];
            let n = s[sys.d] as f64;
            let diag = -(n * lambda).powi(2) + m.iter().map(|v| (v * v) as f64).sum::<f64>() + sys.rho;
            let w = sys.eps * sys.eps * bracket(m).powf(sys.alpha);
            f[i] = diag * x[i] + w * cube_hat[s];
            for (j, t) in reps.iter().enumerate() {
                if j == anchor_idx {
                    continue;
                }
                let mut entry = 0.0;
                let dpos: Site = s.iter().zip(t).map(|(a, b)| a - b).collect();
                entry += w * phi_hat.get(&dpos).copied().unwrap_or(0.0);
                if t.iter().any(|v| *v != 0) {
                    let dneg: Site = s.iter().zip(t).map(|(a, b)| a + b).collect();
                    entry += w * phi_hat.get(&dneg).copied().unwrap_or(0.0);
                }
                if i == j {
                    entry += diag;
                }
                jac[(i, j)] = entry;
            }
            // the anchor column is replaced by d/dλ
            jac[(i, anchor_idx)] = -2.0 * n * n * lambda * x[i];
        }
        residual_sup = f.amax();
        if residual_sup < tol {
            break;
        }
        let delta = jac.lu().solve(&(-&f)).expect("oracle Jacobian singular");
        for (j, dv) in delta.iter().enumerate() {
            if j == anchor_idx {
                lambda += dv;
            } else {
                x[j] += dv;
            }
        }
        if delta.amax() < 1e-17 {
            break;
        }
    }
    FullSolution {
        lambda,
        coeffs: expand(&x),
        iterations,
        residual_sup,
    }
}

/// Sites `(m, n)` with `|ξ|_1 <= N` and `|-n^2 λ^2 + |m|^2| < B`, by a plain
/// loop over the bounding box.
pub fn singular_sites_bruteforce(d: usize, lambda: f64, n_ball: i64, b: f64) -> Vec<Site> {
    l1_ball(d + 1, n_ball)
        .into_iter()
        .filter(|s| {
            let n = s[d] as f64;
            let m2: f64 = s[..d].iter().map(|v| (v * v) as f64).sum();
            (-(n * n) * lambda * lambda + m2).abs() < b
        })
        .collect()
}

/// Sublevel measure `|{t in [a,b] : |P(t)| < eps}|` by midpoint sampling on a
/// uniform grid with `samples` cells. Coarse but independent.
pub fn sublevel_measure_sampled(coeffs: &[i64], eps: f64, a: f64, b: f64, samples: usize) -> f64 {
    let h = (b - a) / samples as f64;
    let mut count = 0usize;
    for i in 0..samples {
        let t = a + (i as f64 + 0.5) * h;
        let mut p = 0.0;
        let mut tk = 1.0;
        for &c in coeffs {
            p += c as f64 * tk;
            tk *= t;
        }
        if p.abs() < eps {
            count += 1;
        }
    }
    count as f64 * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos_cubed() {
        let mut f = Coeffs::new();
        f.insert(vec![1], 0.5);
        f.insert(vec![-1], 0.5);
        let g = triple_convolution(&f);
        assert!((g[&vec![1]] - 0.375).abs() < 1e-15);
        assert!((g[&vec![3]] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn ball_size() {
        // |ξ|_1 <= r in Z^2 has 2r^2 + 2r + 1 points
        assert_eq!(l1_ball(2, 5).len(), 61);
        assert_eq!(l1_ball(3, 2).len(), 25);
    }
}
