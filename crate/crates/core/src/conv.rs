//! Powers of even fields by lattice convolution.
//!
//! Two paths: a direct sparse product accumulated into a dense box, and a
//! multi-dimensional FFT on a grid wide enough that the product cannot alias.
//! The direct path is used below [`ConvolutionConfig::fft_threshold`] stored
//! coefficients.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FourierField, LatticeIndex};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionConfig {
    /// Largest admissible `|ξ|_1` in any product.
    pub support_cap: i64,
    /// Stored-coefficient count at which the FFT path takes over.
    pub fft_threshold: usize,
}

impl Default for ConvolutionConfig {
    fn default() -> Self {
        Self {
            support_cap: 4096,
            fft_threshold: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Path {
    Auto,
    Direct,
    Fft,
}

/// `f^p` for `p >= 1`.
pub fn power(f: &FourierField, p: u32, cfg: &ConvolutionConfig, path: Path) -> Result<FourierField> {
    assert!(p >= 1, "power must be positive");
    let out_radius = f.support_radius() * p as i64;
    if out_radius > cfg.support_cap {
        return Err(Error::SupportExceeded {
            radius: out_radius,
            cap: cfg.support_cap,
        });
    }
    if f.is_empty() || p == 1 {
        return Ok(f.clone());
    }
    let use_fft = match path {
        Path::Auto => f.len() >= cfg.fft_threshold,
        Path::Direct => false,
        Path::Fft => true,
    };
    let raw = if use_fft {
        power_fft(f, p, out_radius)
    } else {
        power_direct(f, p, out_radius)
    };
    Ok(FourierField::from_raw_symmetrized(f.dim(), raw))
}

/// Product of two even fields, `(fg)^`.
pub fn product(f: &FourierField, g: &FourierField, cfg: &ConvolutionConfig) -> Result<FourierField> {
    let out_radius = f.support_radius() + g.support_radius();
    if out_radius > cfg.support_cap {
        return Err(Error::SupportExceeded {
            radius: out_radius,
            cap: cfg.support_cap,
        });
    }
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    let bx = DenseBox::new(f.dim() + 1, out_radius);
    let a = bx.pack(f);
    let b = bx.pack(g);
    let mut acc = vec![0.0; bx.len()];
    for &(ia, va) in &a {
        for &(ib, vb) in &b {
            acc[(ia + ib + bx.offset) as usize] += va * vb;
        }
    }
    Ok(FourierField::from_raw_symmetrized(f.dim(), bx.unpack(&acc)))
}

/// Dense box `[-R, R]^dim` with linear packing, so that packed indices of a
/// sum are sums of packed indices.
struct DenseBox {
    dim: usize,
    radius: i64,
    side: i64,
    offset: i64,
}

impl DenseBox {
    fn new(dim: usize, radius: i64) -> Self {
        let side = 2 * radius + 1;
        let offset = (0..dim).map(|k| radius * side.pow(k as u32)).sum();
        Self {
            dim,
            radius,
            side,
            offset,
        }
    }

    fn len(&self) -> usize {
        (self.side as usize).pow(self.dim as u32)
    }

    /// Signed, unshifted packed index.
    fn index(&self, coords: &[i64]) -> i64 {
        let mut idx = 0;
        let mut stride = 1;
        for c in coords {
            idx += c * stride;
            stride *= self.side;
        }
        idx
    }

    fn pack(&self, f: &FourierField) -> Vec<(i64, f64)> {
        f.iter().map(|(xi, v)| (self.index(&xi.coords()), v)).collect()
    }

    fn unpack(&self, acc: &[f64]) -> BTreeMap<LatticeIndex, f64> {
        let mut out = BTreeMap::new();
        let mut coords = vec![0i64; self.dim];
        for (pos, v) in acc.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let mut rem = pos as i64;
            for c in coords.iter_mut() {
                *c = rem % self.side - self.radius;
                rem /= self.side;
            }
            if coords.iter().map(|c| c.abs()).sum::<i64>() <= self.radius {
                out.insert(LatticeIndex::from_coords(&coords), *v);
            }
        }
        out
    }
}

fn power_direct(f: &FourierField, p: u32, out_radius: i64) -> BTreeMap<LatticeIndex, f64> {
    let bx = DenseBox::new(f.dim() + 1, out_radius);
    let entries = bx.pack(f);
    // running partial power kept sparse between rounds
    let mut cur: Vec<(i64, f64)> = entries.clone();
    for _ in 1..p {
        let mut acc = vec![0.0; bx.len()];
        for &(ia, va) in &cur {
            for &(ib, vb) in &entries {
                acc[(ia + ib + bx.offset) as usize] += va * vb;
            }
        }
        cur = acc
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(pos, v)| (pos as i64 - bx.offset, *v))
            .collect();
    }
    let mut acc = vec![0.0; bx.len()];
    for (i, v) in cur {
        acc[(i + bx.offset) as usize] = v;
    }
    bx.unpack(&acc)
}

/// Smallest `n >= target` of the form `2^a 3^b 5^c`.
fn smooth_size(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut r = n;
        for q in [2, 3, 5] {
            while r.is_multiple_of(q) {
                r /= q;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

fn fft_axes(buf: &mut [Complex64], k: usize, dim: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let fft = if inverse {
        planner.plan_fft_inverse(k)
    } else {
        planner.plan_fft_forward(k)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); k];
    let total = buf.len();
    let mut stride = 1;
    for _ in 0..dim {
        // every line along this axis starts at an index whose digit on the
        // axis is zero
        for start in 0..total {
            if (start / stride) % k != 0 {
                continue;
            }
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = buf[start + t * stride];
            }
            fft.process(&mut line);
            for (t, slot) in line.iter().enumerate() {
                buf[start + t * stride] = *slot;
            }
        }
        stride *= k;
    }
}

fn power_fft(f: &FourierField, p: u32, out_radius: i64) -> BTreeMap<LatticeIndex, f64> {
    let dim = f.dim() + 1;
    let k = smooth_size((2 * out_radius + 1) as usize);
    let ki = k as i64;
    let total = k.pow(dim as u32);
    let wrap = |coords: &[i64]| -> usize {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for c in coords {
            idx += (c.rem_euclid(ki)) as usize * stride;
            stride *= k;
        }
        idx
    };

    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for (xi, v) in f.iter() {
        buf[wrap(&xi.coords())] = Complex64::new(v, 0.0);
    }
    let mut planner = FftPlanner::new();
    fft_axes(&mut buf, k, dim, true, &mut planner);
    for z in buf.iter_mut() {
        let re = z.re.powi(p as i32);
        *z = Complex64::new(re, 0.0);
    }
    fft_axes(&mut buf, k, dim, false, &mut planner);
    let norm = 1.0 / total as f64;

    let mut out = BTreeMap::new();
    let mut coords = vec![0i64; dim];
    visit_ball(dim, out_radius, &mut coords, 0, &mut |c| {
        let v = buf[wrap(c)].re * norm;
        if v != 0.0 {
            out.insert(LatticeIndex::from_coords(c), v);
        }
    });
    out
}

fn visit_ball(dim: usize, r: i64, coords: &mut Vec<i64>, k: usize, visit: &mut impl FnMut(&[i64])) {
    if k == dim {
        visit(coords);
        return;
    }
    let used: i64 = coords[..k].iter().map(|c| c.abs()).sum();
    let left = r - used;
    for c in -left..=left {
        coords[k] = c;
        visit_ball(dim, r, coords, k + 1, visit);
    }
    coords[k] = 0;
}
