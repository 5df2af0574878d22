//! First-difference stencils and the central second difference.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// First-difference stencil selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    Forward,
    Backward,
    Central,
}

/// Undivided first difference at `i`.
///
/// * forward:  `f[i+1] - f[i]`
/// * backward: `f[i-1] - f[i]` (note the sign: this is the negated usual backward difference)
/// * central:  `f[i+1] - f[i-1]`
pub fn fd_first_difference(samples: &[f64], i: usize, scheme: FdScheme) -> Result<f64> {
    let len = samples.len();
    let need_next = matches!(scheme, FdScheme::Forward | FdScheme::Central);
    let need_prev = matches!(scheme, FdScheme::Backward | FdScheme::Central);
    if i >= len || (need_next && i + 1 >= len) || (need_prev && i == 0) {
        return Err(Error::IndexOutOfRange { index: i, len });
    }
    Ok(match scheme {
        FdScheme::Forward => samples[i + 1] - samples[i],
        FdScheme::Backward => samples[i - 1] - samples[i],
        FdScheme::Central => samples[i + 1] - samples[i - 1],
    })
}

/// Central second difference `(f[i+1] - 2 f[i] + f[i-1]) / dx^2` at the
/// `nx - 2` interior nodes.
pub fn laplacian_1d(row: &[f64], dx: f64) -> Result<Vec<f64>> {
    if row.len() < 3 {
        return Err(Error::TooFewNodes { nx: row.len() });
    }
    if !(dx > 0.0) {
        return Err(Error::InvalidGrid("dx must be positive"));
    }
    let inv = 1.0 / (dx * dx);
    Ok(row.windows(3).map(|w| ((w[2] - w[1]) - (w[1] - w[0])) * inv).collect())
}
