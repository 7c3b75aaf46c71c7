//! Diophantine conditions on `ρ` and on the frequency, and the measure
//! estimates behind them.
//!
//! Polynomials are integer coefficient vectors. In one variable, `a[k]` is the
//! coefficient of `x^k`; in several variables the coefficients are attached to
//! the monomial list produced by [`monomials`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoCheck {
    pub pass: bool,
    /// Minimizer of `|nρ - k| |n|^{2d}`: `(n, k, |nρ - k| |n|^{2d})`.
    pub worst: (i64, i64, f64),
}

/// Checks `|nρ - k| > γ |n|^{-2d}` for `1 <= n <= n_max` (negative `n` is
/// the same condition), `k` the nearest integer to `nρ`.
pub fn check_rho_condition(rho: f64, gamma: f64, d: usize, n_max: i64) -> RhoCheck {
    let mut worst = (0, 0, f64::INFINITY);
    for n in 1..=n_max.max(1) {
        let x = n as f64 * rho;
        let k = x.round();
        let value = (x - k).abs() * (n as f64).powi(2 * d as i32);
        if value < worst.2 {
            worst = (n, k as i64, value);
        }
    }
    RhoCheck {
        pass: worst.2 > gamma,
        worst,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdcSpec {
    /// Number of variables.
    pub b_tilde: usize,
    /// Largest total degree enumerated.
    pub degree: usize,
    pub gamma: f64,
    pub tau: f64,
    /// Enumeration covers `1 <= |a|_1 <= coeff_bound`.
    pub coeff_bound: u32,
    /// Stop after this many polynomials; the result is then partial.
    pub budget: Option<u64>,
}

impl GdcSpec {
    pub fn validate(&self) -> Result<()> {
        if self.b_tilde == 0 || self.degree == 0 {
            return Err(Error::InvalidParams("gDC needs b_tilde >= 1 and degree >= 1".into()));
        }
        if !(self.gamma >= 0.0) || !(self.tau > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gDC needs gamma >= 0 and tau > 0, got gamma = {}, tau = {}",
                self.gamma, self.tau
            )));
        }
        Ok(())
    }
}

/// Exponent vectors of all monomials in `vars` variables with total degree
/// at most `degree`, constant first. In one variable this is `x^0, .., x^degree`.
pub fn monomials(vars: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; vars];
    fn rec(k: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[k] = e;
            rec(k + 1, left - e, cur, out);
        }
        cur[k] = 0;
    }
    rec(0, degree as u32, &mut cur, &mut out);
    out.sort_by_key(|e| (e.iter().sum::<u32>(), std::cmp::Reverse(e.clone())));
    out
}

fn monomial_values(x: &[f64], mons: &[Vec<u32>]) -> Vec<f64> {
    mons.iter()
        .map(|e| x.iter().zip(e).map(|(xi, k)| xi.powi(*k as i32)).product())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdcWitness {
    /// Coefficients aligned with `monomials(b_tilde, degree)`.
    pub coeffs: Vec<i64>,
    pub value: f64,
    /// `γ |a|_1^{-τ}`.
    pub threshold: f64,
    /// `value / threshold`; the condition fails when this is at most 1.
    pub ratio: f64,
}

impl GdcWitness {
    /// Evaluates the witness polynomial at `x` from scratch.
    pub fn reevaluate(&self, x: &[f64], spec: &GdcSpec) -> f64 {
        let mons = monomials(spec.b_tilde, spec.degree);
        let value: f64 = self
            .coeffs
            .iter()
            .zip(&mons)
            .map(|(a, e)| *a as f64 * x.iter().zip(e).map(|(xi, k)| xi.powi(*k as i32)).product::<f64>())
            .sum::<f64>()
            .abs();
        let l1: i64 = self.coeffs.iter().map(|a| a.abs()).sum();
        value / (spec.gamma * (l1 as f64).powf(-spec.tau))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdcCheck {
    pub pass: bool,
    /// Polynomial with the smallest ratio seen.
    pub worst: Option<GdcWitness>,
    pub examined: u64,
    /// False when the budget stopped the enumeration early.
    pub complete: bool,
}

struct Enumerator<'a> {
    values: &'a [f64],
    budget: Option<u64>,
    examined: u64,
    stopped: bool,
    coeffs: Vec<i64>,
    worst_ratio: f64,
    worst: Option<GdcWitness>,
    /// `γ s^{-τ}` for `s = 0..=coeff_bound`.
    thresholds: Vec<f64>,
}

impl Enumerator<'_> {
    /// Assigns coefficients from position `k` on, with `left` of the ℓ¹ budget
    /// unused and `partial` the value so far. `signed` is false until the
    /// first nonzero coefficient, which is taken positive (P and -P coincide
    /// for the condition).
    fn rec(&mut self, k: usize, left: u32, used: u32, partial: f64, signed: bool) {
        if self.stopped {
            return;
        }
        if k == self.values.len() {
            if used == 0 {
                return;
            }
            self.examined += 1;
            let value = partial.abs();
            let threshold = self.thresholds[used as usize];
            let ratio = if threshold > 0.0 {
                value / threshold
            } else {
                f64::INFINITY
            };
            if ratio < self.worst_ratio || self.worst.is_none() {
                self.worst_ratio = ratio;
                self.worst = Some(GdcWitness {
                    coeffs: self.coeffs.clone(),
                    value,
                    threshold,
                    ratio,
                });
            }
            if let Some(b) = self.budget {
                if self.examined >= b {
                    self.stopped = true;
                }
            }
            return;
        }
        self.coeffs[k] = 0;
        self.rec(k + 1, left, used, partial, signed);
        for a in 1..=left as i64 {
            let signs: &[i64] = if signed { &[1, -1] } else { &[1] };
            for &s in signs {
                let c = s * a;
                self.coeffs[k] = c;
                self.rec(
                    k + 1,
                    left - a as u32,
                    used + a as u32,
                    partial + c as f64 * self.values[k],
                    true,
                );
            }
        }
        self.coeffs[k] = 0;
    }
}

/// Exhaustive check of `|P(x)| > γ |a|_1^{-τ}` over nonzero integer
/// polynomials of total degree `<= spec.degree` with `|a|_1 <= coeff_bound`.
pub fn check_gdc_poly(x: &[f64], spec: &GdcSpec) -> Result<GdcCheck> {
    spec.validate()?;
    if x.len() != spec.b_tilde {
        return Err(Error::DimensionMismatch {
            expected: spec.b_tilde,
            found: x.len(),
        });
    }
    let mons = monomials(spec.b_tilde, spec.degree);
    let values = monomial_values(x, &mons);
    let thresholds = (0..=spec.coeff_bound)
        .map(|s| {
            if s == 0 {
                f64::INFINITY
            } else {
                spec.gamma * (s as f64).powf(-spec.tau)
            }
        })
        .collect();
    let mut e = Enumerator {
        values: &values,
        budget: spec.budget,
        examined: 0,
        stopped: false,
        coeffs: vec![0; values.len()],
        worst_ratio: f64::INFINITY,
        worst: None,
        thresholds,
    };
    e.rec(0, spec.coeff_bound, 0, 0.0, false);
    let pass = e.worst.as_ref().is_none_or(|w| w.ratio > 1.0);
    Ok(GdcCheck {
        pass,
        worst: e.worst,
        examined: e.examined,
        complete: !e.stopped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub gamma: f64,
    pub tau: f64,
    pub degree: usize,
    pub coeff_bound: u32,
    pub samples: usize,
    pub excluded: usize,
    pub excluded_fraction: f64,
    /// `C γ^{1/(b̃ degree)}` with the caller's calibrated `C`.
    pub envelope: f64,
}

/// Monte Carlo estimate of the fraction of the box `interval^{b̃}` failing
/// the gDC condition at the given budget. Samples are drawn in `shards`
/// independent streams seeded from `seed` and merged in shard order.
pub fn excluded_measure_estimate(
    spec: &GdcSpec,
    interval: (f64, f64),
    samples: usize,
    seed: u64,
    envelope_c: f64,
) -> Result<MeasureEstimate> {
    let points = sample_points(spec.b_tilde, interval, samples, seed);
    excluded_measure_on(spec, &points, envelope_c)
}

/// Same as [`excluded_measure_estimate`] on caller-supplied points, so that
/// several `γ` can share one sample set.
pub fn excluded_measure_on(spec: &GdcSpec, points: &[Vec<f64>], envelope_c: f64) -> Result<MeasureEstimate> {
    spec.validate()?;
    let mut excluded = 0;
    for x in points {
        if spec.gamma > 0.0 && !check_gdc_poly(x, spec)?.pass {
            excluded += 1;
        }
    }
    let samples = points.len();
    Ok(MeasureEstimate {
        gamma: spec.gamma,
        tau: spec.tau,
        degree: spec.degree,
        coeff_bound: spec.coeff_bound,
        samples,
        excluded,
        excluded_fraction: if samples == 0 {
            0.0
        } else {
            excluded as f64 / samples as f64
        },
        envelope: envelope_c * spec.gamma.powf(1.0 / (spec.b_tilde * spec.degree) as f64),
    })
}

/// Number of independent random streams used by [`sample_points`].
pub const SHARDS: usize = 16;

/// Uniform points in `interval^dim`, generated in [`SHARDS`] streams with
/// seeds derived from `seed`; shard `i` contributes a contiguous block.
pub fn sample_points(dim: usize, interval: (f64, f64), samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let (a, b) = interval;
    let mut out = Vec::with_capacity(samples);
    for shard in 0..SHARDS {
        let count = samples / SHARDS + usize::from(shard < samples % SHARDS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (shard as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for _ in 0..count {
            out.push((0..dim).map(|_| a + (b - a) * rng.gen::<f64>()).collect());
        }
    }
    out
}

fn eval_poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
}

fn trim(c: &[f64]) -> &[f64] {
    let mut n = c.len();
    while n > 0 && c[n - 1] == 0.0 {
        n -= 1;
    }
    &c[..n]
}

/// Points in `(a, b)` where `c` changes sign, via monotone pieces between
/// the sign changes of the derivative.
fn sign_changes(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = trim(c);
    if c.len() <= 1 {
        return Vec::new();
    }
    let mut cuts = vec![a];
    cuts.extend(sign_changes(&derivative(c), a, b));
    cuts.push(b);
    let mut roots = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (eval_poly(c, lo), eval_poly(c, hi));
        if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval_poly(c, mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

/// `|{t ∈ [a, b] : |P(t)| < ε}|`, from the crossings of `P = ±ε`.
pub fn sublevel_measure(p: &[i64], eps: f64, a: f64, b: f64) -> Result<f64> {
    if p.iter().all(|c| *c == 0) {
        return Err(Error::InvalidParams("polynomial must be nonzero".into()));
    }
    if !(b > a) {
        return Ok(0.0);
    }
    let base: Vec<f64> = p.iter().map(|c| *c as f64).collect();
    let mut cuts = vec![a, b];
    for shift in [eps, -eps] {
        let mut q = base.clone();
        q[0] -= shift;
        cuts.extend(sign_changes(&q, a, b));
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut points"));
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] && eval_poly(&base, 0.5 * (w[0] + w[1])).abs() < eps {
            total += w[1] - w[0];
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(degree: usize, bound: u32, gamma: f64, tau: f64) -> GdcSpec {
        GdcSpec {
            b_tilde: 1,
            degree,
            gamma,
            tau,
            coeff_bound: bound,
            budget: None,
        }
    }

    #[test]
    fn rho_examples() {
        assert!(!check_rho_condition(3.0, 0.01, 1, 10).pass);
        let r = check_rho_condition(2f64.sqrt(), 0.01, 1, 10_000);
        assert!(r.pass);
        assert_eq!(r.worst.0, 1);
        let r = check_rho_condition(0.5, 0.01, 1, 10);
        assert!(!r.pass);
        assert_eq!((r.worst.0, r.worst.2), (2, 0.0));
    }

    #[test]
    fn rational_point_fails_at_degree_one() {
        let r = check_gdc_poly(&[3.0 / 4.0], &spec(1, 7, 1e-3, 2.0)).unwrap();
        assert!(!r.pass);
        let w = r.worst.unwrap();
        assert_eq!(w.value, 0.0);
        assert_eq!(w.coeffs[0] * 4 + w.coeffs[1] * 3, 0);
        assert_eq!(w.reevaluate(&[0.75], &spec(1, 7, 1e-3, 2.0)), 0.0);
    }

    #[test]
    fn constant_polynomial_only() {
        let r = check_gdc_poly(&[0.3], &spec(3, 1, 0.5, 1.0)).unwrap();
        // |a|_1 = 1: ±1, ±x, ±x², ±x³, up to sign
        assert_eq!(r.examined, 4);
        assert!(!r.pass);
        assert_eq!(r.worst.unwrap().coeffs, vec![0, 0, 0, 1]);
        assert!(check_gdc_poly(&[0.9], &spec(3, 1, 0.5, 1.0)).unwrap().pass);
    }

    #[test]
    fn enumeration_count() {
        // points of the ℓ¹ ball of radius 3 in Z^3, minus the origin, halved
        let r = check_gdc_poly(&[0.7], &spec(2, 3, 0.0, 1.0)).unwrap();
        assert_eq!(r.examined, (63 - 1) / 2);
    }

    #[test]
    fn budget_marks_partial() {
        let mut s = spec(4, 6, 1e-6, 2.0);
        s.budget = Some(100);
        let r = check_gdc_poly(&[1.3], &s).unwrap();
        assert_eq!(r.examined, 100);
        assert!(!r.complete);
    }

    #[test]
    fn monomial_lists() {
        assert_eq!(monomials(1, 3), vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(monomials(2, 2).len(), 6);
    }

    #[test]
    fn sublevel_examples() {
        assert!((sublevel_measure(&[0, 1], 0.1, -1.0, 1.0).unwrap() - 0.2).abs() < 1e-12);
        assert!((sublevel_measure(&[0, 0, 1], 0.01, -1.0, 1.0).unwrap() - 0.2).abs() < 1e-12);
        for k in 1..=7 {
            let mut p = vec![0; k + 1];
            p[k] = 1;
            for eps in [1e-1, 1e-3, 1e-6] {
                let got = sublevel_measure(&p, eps, -1.0, 1.0).unwrap();
                let want = 2.0 * eps.powf(1.0 / k as f64);
                assert!((got - want).abs() < 1e-6, "k = {k}, eps = {eps}: {got} vs {want}");
            }
        }
        assert!(sublevel_measure(&[0, 0], 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_zero_excludes_nothing() {
        let est = excluded_measure_estimate(&spec(2, 4, 0.0, 2.0), (0.5, 2.5), 1000, 7, 1.0).unwrap();
        assert_eq!(est.excluded, 0);
    }

    #[test]
    fn samples_are_deterministic() {
        assert_eq!(
            sample_points(2, (0.0, 1.0), 100, 3),
            sample_points(2, (0.0, 1.0), 100, 3)
        );
        assert_eq!(sample_points(1, (0.0, 1.0), 37, 3).len(), 37);
    }
}
