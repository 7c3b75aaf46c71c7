//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest singular value by power iteration on `MᵀM`.
///
/// Stops when the relative change of the Rayleigh quotient drops below `tol`.
/// The start vector is a fixed pseudo-random vector, so results are
/// deterministic.
pub fn operator_norm(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(m.ncols(), |_, _| 1.0 + 0.1 * rng.gen::<f64>());
    x /= x.norm();
    let mut est = 0.0f64;
    for _ in 0..max_iter {
        let y = m * &x;
        let z = m.tr_mul(&y);
        let zn = z.norm();
        if zn == 0.0 || !zn.is_finite() {
            return if zn.is_finite() { 0.0 } else { f64::INFINITY };
        }
        // x has unit norm, so |y|^2 = xᵀMᵀMx is the Rayleigh quotient
        let next = y.norm_squared();
        x = z / zn;
        if (next - est).abs() <= tol * next {
            est = next;
            break;
        }
        est = next;
    }
    est.sqrt()
}

/// Inverse, its operator norm and a condition-number estimate. `None` when
/// the matrix is singular to working precision or the condition estimate
/// exceeds `cond_cap`.
pub fn guarded_inverse(m: &DMatrix<f64>, cond_cap: f64, tol: f64) -> Option<(DMatrix<f64>, f64, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let inv_norm = operator_norm(&inv, tol, 2000);
    let cond = inv_norm * operator_norm(m, tol, 2000);
    if !cond.is_finite() || cond > cond_cap {
        return None;
    }
    Some((inv, inv_norm, cond))
}

/// Replaces `m` by `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Largest `|m(i,j) - m(j,i)|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((operator_norm(&m, 1e-12, 1000) - 3.0).abs() < 1e-9);
        assert_eq!(operator_norm(&DMatrix::zeros(3, 3), 1e-12, 100), 0.0);
    }

    #[test]
    fn norm_matches_svd() {
        let m = DMatrix::from_fn(6, 6, |i, j| {
            1.0 / (1.0 + i as f64 + 2.0 * j as f64) - 0.1 * (i == j) as u8 as f64
        });
        let svd = m.clone().svd(false, false);
        let top = svd.singular_values.max();
        assert!((operator_norm(&m, 1e-14, 10_000) - top).abs() < 1e-8 * top);
    }

    #[test]
    fn singular_is_rejected() {
        let mut m = DMatrix::<f64>::identity(4, 4);
        m[(2, 2)] = 1e-300;
        assert!(guarded_inverse(&m, 1e14, 1e-10).is_none());
        let (inv, n, cond) = guarded_inverse(&DMatrix::identity(4, 4), 1e14, 1e-10).unwrap();
        assert_eq!(inv, DMatrix::identity(4, 4));
        assert!((n - 1.0).abs() < 1e-12 && (cond - 1.0).abs() < 1e-12);
    }
}
