//! Small dense helpers for the mapping fit.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Solves `a x = b` for a small square row-major `a` by Gaussian elimination
/// with partial pivoting.
pub fn solve_dense(n: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::LengthMismatch { left: n * n, right: a.len() });
    }
    if b.len() != n {
        return Err(Error::LengthMismatch { left: n, right: b.len() });
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if math::abs(m[row * n + col]) > math::abs(m[piv * n + col]) {
                piv = row;
            }
        }
        let pivot = m[piv * n + col];
        if math::abs(pivot) < 1e-300 {
            return Err(Error::SingularSystem { row: col, pivot });
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= m[i * n + k] * x[k];
        }
        x[i] = s / m[i * n + i];
    }
    Ok(x)
}
