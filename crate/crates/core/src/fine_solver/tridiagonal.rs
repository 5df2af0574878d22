use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Pivots below this magnitude are treated as singular.
pub const PIVOT_EPS: f64 = 1e-14;

/// `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::LengthMismatch { left: 0, right: rhs.len() });
        }
        if rhs.len() != n {
            return Err(Error::LengthMismatch { left: n, right: rhs.len() });
        }
        if lower.len() != n - 1 {
            return Err(Error::LengthMismatch { left: n - 1, right: lower.len() });
        }
        if upper.len() != n - 1 {
            return Err(Error::LengthMismatch { left: n - 1, right: upper.len() });
        }
        Ok(Self { lower, diag, upper, rhs })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// True when every row is weakly diagonally dominant and at least one strictly.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.len();
        let mut strict = false;
        for i in 0..n {
            let off = if i > 0 { math::abs(self.lower[i - 1]) } else { 0.0 }
                + if i + 1 < n { math::abs(self.upper[i]) } else { 0.0 };
            let d = math::abs(self.diag[i]);
            if d < off {
                return false;
            }
            strict |= d > off;
        }
        strict
    }
}

/// Thomas algorithm.
pub fn solve_tridiagonal(system: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = system.len();
    let TridiagonalSystem { lower, diag, upper, rhs } = system;
    let mut c = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);

    let mut pivot = diag[0];
    if math::abs(pivot) < PIVOT_EPS {
        return Err(Error::SingularSystem { row: 0, pivot });
    }
    c.push(if n > 1 { upper[0] / pivot } else { 0.0 });
    d.push(rhs[0] / pivot);
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if math::abs(pivot) < PIVOT_EPS {
            return Err(Error::SingularSystem { row: i, pivot });
        }
        c.push(if i + 1 < n { upper[i] / pivot } else { 0.0 });
        d.push((rhs[i] - lower[i - 1] * d[i - 1]) / pivot);
    }

    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Dense Gaussian elimination with partial pivoting, kept independent of the Thomas sweep.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, p);
            b.swap(col, p);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let s = TridiagonalSystem::new(vec![0.0; 3], vec![1.0; 4], vec![0.0; 3], vec![1.0, -2.0, 3.5, 4.0]).unwrap();
        assert_eq!(solve_tridiagonal(&s).unwrap(), vec![1.0, -2.0, 3.5, 4.0]);
    }

    #[test]
    fn decoupled() {
        let s = TridiagonalSystem::new(vec![0.0], vec![2.0, 2.0], vec![0.0], vec![4.0, 6.0]).unwrap();
        assert_eq!(solve_tridiagonal(&s).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn single_equation() {
        let s = TridiagonalSystem::new(vec![], vec![4.0], vec![], vec![2.0]).unwrap();
        assert_eq!(solve_tridiagonal(&s).unwrap(), vec![0.5]);
    }

    #[test]
    fn matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = 8;
            let lower: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let upper: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let diag: Vec<f64> = (0..n).map(|_| 2.5 + rng.random_range(0.0..1.0)).collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                dense[i][i] = diag[i];
                if i > 0 {
                    dense[i][i - 1] = lower[i - 1];
                }
                if i + 1 < n {
                    dense[i][i + 1] = upper[i];
                }
            }
            let s = TridiagonalSystem::new(lower, diag, upper, rhs.clone()).unwrap();
            assert!(s.is_diagonally_dominant());
            let x = solve_tridiagonal(&s).unwrap();
            let xd = dense_solve(dense, rhs.clone());
            for (a, b) in x.iter().zip(&xd) {
                assert!((a - b).abs() < 1e-10);
            }
            let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (ax, r) in s.apply(&x).iter().zip(&rhs) {
                assert!((ax - r).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn singular_pivot() {
        let s = TridiagonalSystem::new(vec![1.0], vec![0.0, 1.0], vec![1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(solve_tridiagonal(&s), Err(Error::SingularSystem { row: 0, .. })));
        let s = TridiagonalSystem::new(vec![1.0], vec![1.0, 1.0], vec![1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(solve_tridiagonal(&s), Err(Error::SingularSystem { row: 1, .. })));
    }

    #[test]
    fn rejects_inconsistent_lengths() {
        assert!(TridiagonalSystem::new(vec![0.0; 2], vec![1.0; 2], vec![0.0], vec![1.0; 2]).is_err());
        assert!(TridiagonalSystem::new(vec![0.0], vec![1.0; 2], vec![0.0], vec![1.0; 3]).is_err());
    }
}
