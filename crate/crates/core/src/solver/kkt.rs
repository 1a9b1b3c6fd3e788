//! Shared factorization for the per-row equality constrained QPs.
//!
//! Every row `j` of the primal block solves
//!
//! ```text
//!     minimize    1/2 y' B y + y' b_j
//!     subject to  A y = 0
//! ```
//!
//! with `y = [u; v]`, `B = blockdiag(2 gamma L + mu I, mu I)` and `A` the
//! (n-1)-row difference operator encoding "u_i + v_i constant across i".
//! `B` and `A` are identical across rows, so one factorization serves all
//! `l` right-hand sides with back-solves only: factor `M = 2 gamma L + mu I`
//! once, then eliminate `y` to get the Schur system
//! `(G M^{-1} G' + G G' / mu) nu = -G (M^{-1} b_u + b_v / mu)` where `G` is
//! the first-difference matrix.

use ndarray::Array2;

use crate::error::Result;
use crate::linalg::Cholesky;
use crate::model::Laplacian;

#[derive(Debug, Clone)]
pub struct KktFactorization {
    n: usize,
    mu: f64,
    m_chol: Cholesky,
    /// Schur complement factor; absent for n = 1 (no constraints).
    s_chol: Option<Cholesky>,
}

/// Factor the row-QP system for the given Laplacian and parameters.
pub fn build_kkt(laplacian: &Laplacian, gamma: f64, mu: f64) -> Result<KktFactorization> {
    assert!(mu > 0.0, "mu must be positive");
    assert!(gamma >= 0.0, "gamma must be nonnegative");
    let n = laplacian.n();
    let mut m = laplacian.to_dense();
    m.mapv_inplace(|v| 2.0 * gamma * v);
    for i in 0..n {
        m[[i, i]] += mu;
    }
    let m_chol = Cholesky::factor(&m)?;

    let s_chol = if n > 1 {
        // Z = M^{-1} G', one solve per constraint row.
        let mut z = Array2::<f64>::zeros((n, n - 1));
        let mut rhs = vec![0.0; n];
        for k in 0..n - 1 {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            rhs[k] = 1.0;
            rhs[k + 1] = -1.0;
            m_chol.solve_in_place(&mut rhs);
            for i in 0..n {
                z[[i, k]] = rhs[i];
            }
        }
        // S = G Z + (1/mu) G G'
        let mut s = Array2::<f64>::zeros((n - 1, n - 1));
        for k in 0..n - 1 {
            for c in 0..n - 1 {
                s[[k, c]] = z[[k, c]] - z[[k + 1, c]];
            }
            s[[k, k]] += 2.0 / mu;
            if k > 0 {
                s[[k, k - 1]] -= 1.0 / mu;
            }
            if k + 1 < n - 1 {
                s[[k, k + 1]] -= 1.0 / mu;
            }
        }
        Some(Cholesky::factor(&s)?)
    } else {
        None
    };

    Ok(KktFactorization { n, mu, m_chol, s_chol })
}

impl KktFactorization {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Back-solve one row: the unique minimizer of
    /// `1/2 y' B y + y' [b_u; b_v]` subject to `A y = 0`.
    pub fn solve_row(&self, b_u: &[f64], b_v: &[f64], u: &mut [f64], v: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b_u.len(), n);
        debug_assert_eq!(b_v.len(), n);

        let t1 = self.m_chol.solve(b_u);
        match &self.s_chol {
            None => {
                // Unconstrained: y = -B^{-1} b.
                for i in 0..n {
                    u[i] = -t1[i];
                    v[i] = -b_v[i] / self.mu;
                }
            }
            Some(s_chol) => {
                let mut rhs = vec![0.0; n - 1];
                for k in 0..n - 1 {
                    let a = t1[k] + b_v[k] / self.mu;
                    let b = t1[k + 1] + b_v[k + 1] / self.mu;
                    rhs[k] = -(a - b);
                }
                s_chol.solve_in_place(&mut rhs);
                // G' nu, then the primal recovery solves.
                let mut bu_adj = vec![0.0; n];
                for i in 0..n {
                    let mut g = 0.0;
                    if i < n - 1 {
                        g += rhs[i];
                    }
                    if i > 0 {
                        g -= rhs[i - 1];
                    }
                    bu_adj[i] = b_u[i] + g;
                    v[i] = -(b_v[i] + g) / self.mu;
                }
                self.m_chol.solve_in_place(&mut bu_adj);
                for i in 0..n {
                    u[i] = -bu_adj[i];
                }
            }
        }
    }
}
