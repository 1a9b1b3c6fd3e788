//! Small dense linear algebra: Cholesky factorization with triangular solves.
//!
//! The solver only ever factors symmetric positive definite systems (the
//! regularized Laplacian block and its Schur complement), so a plain LL^T
//! factorization without pivoting is sufficient.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
    n: usize,
}

impl Cholesky {
    /// Factor `a = L L^T`. Fails if `a` is not positive definite.
    pub fn factor(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim(format!(
                "cholesky needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::invalid(format!(
                            "matrix not positive definite (pivot {} at row {})",
                            s, i
                        )));
                    }
                    l[[i, i]] = s.sqrt();
                } else {
                    l[[i, j]] = s / l[[j, j]];
                }
            }
        }
        Ok(Self { l, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place via the two triangular solves.
    #[allow(clippy::needless_range_loop)] // indexing mirrors the recurrences
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        // L y = b
        for i in 0..self.n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[[i, k]] * b[k];
            }
            b[i] = s / self.l[[i, i]];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in (i + 1)..self.n {
                s -= self.l[[k, i]] * b[k];
            }
            b[i] = s / self.l[[i, i]];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
