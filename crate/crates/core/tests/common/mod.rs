//! Independent reference implementations shared by the integration suites.
//! Everything here deliberately avoids the library's own solve paths: dense
//! LU instead of Cholesky/Schur, subgradient descent instead of ADMM, and
//! support enumeration instead of the sort-based simplex projection.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spsg::color::LabImage;
use spsg::model::{ModelInstance, Similarity};

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn lu_solve(a: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[[row, col]].abs() > m[[pivot, col]].abs() {
                pivot = row;
            }
        }
        assert!(m[[pivot, col]].abs() > 1e-14, "singular system");
        if pivot != col {
            for k in 0..n {
                let tmp = m[[col, k]];
                m[[col, k]] = m[[pivot, k]];
                m[[pivot, k]] = tmp;
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = m[[row, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for k in (row + 1)..n {
            s -= m[[row, k]] * x[k];
        }
        x[row] = s / m[[row, row]];
    }
    x
}

/// Dense `B = blockdiag(2 gamma L + mu I, mu I)` for one row QP.
pub fn dense_b(lap: &Array2<f64>, gamma: f64, mu: f64) -> Array2<f64> {
    let n = lap.nrows();
    let mut b = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            b[[i, j]] = 2.0 * gamma * lap[[i, j]];
        }
        b[[i, i]] += mu;
        b[[n + i, n + i]] = mu;
    }
    b
}

/// Dense `(n-1) x 2n` constraint matrix for `u_i + v_i` constant.
pub fn dense_constraints(n: usize) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((n - 1, 2 * n));
    for k in 0..n - 1 {
        a[[k, k]] = 1.0;
        a[[k, k + 1]] = -1.0;
        a[[k, n + k]] = 1.0;
        a[[k, n + k + 1]] = -1.0;
    }
    a
}

/// Solve one row QP by assembling and LU-factoring the full KKT system
/// `[[B, A'], [A, 0]] [y; nu] = [-b; 0]`.
pub fn dense_kkt_row_solve(lap: &Array2<f64>, gamma: f64, mu: f64, b: &[f64]) -> Vec<f64> {
    let n = lap.nrows();
    let bm = dense_b(lap, gamma, mu);
    if n == 1 {
        return lu_solve(&bm, &b.iter().map(|v| -v).collect::<Vec<_>>());
    }
    let am = dense_constraints(n);
    let dim = 2 * n + (n - 1);
    let mut kkt = Array2::<f64>::zeros((dim, dim));
    for i in 0..2 * n {
        for j in 0..2 * n {
            kkt[[i, j]] = bm[[i, j]];
        }
    }
    for k in 0..n - 1 {
        for j in 0..2 * n {
            kkt[[2 * n + k, j]] = am[[k, j]];
            kkt[[j, 2 * n + k]] = am[[k, j]];
        }
    }
    let mut rhs = vec![0.0; dim];
    for i in 0..2 * n {
        rhs[i] = -b[i];
    }
    lu_solve(&kkt, &rhs)[..2 * n].to_vec()
}

/// Exact simplex projection by enumerating every support set: for each
/// nonempty subset, shift the selected coordinates to the constraint plane
/// and keep the feasible candidate with the smallest distance.
pub fn simplex_projection_by_enumeration(v: &[f64]) -> Vec<f64> {
    let l = v.len();
    assert!(l <= 20, "support enumeration is exponential");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << l) {
        let size = mask.count_ones() as f64;
        let sum: f64 = (0..l).filter(|k| mask >> k & 1 == 1).map(|k| v[k]).sum();
        let shift = (1.0 - sum) / size;
        let mut z = vec![0.0; l];
        let mut feasible = true;
        for k in 0..l {
            if mask >> k & 1 == 1 {
                z[k] = v[k] + shift;
                if z[k] < 0.0 {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = z.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().map(|(d, _)| dist < *d).unwrap_or(true) {
            best = Some((dist, z));
        }
    }
    best.expect("some support is feasible").1
}

/// Projected subgradient descent on the full model objective, independent
/// of the ADMM path. Returns the best iterate and its objective.
pub fn subgradient_reference(
    weighted_r: &Array2<f64>,
    lap_dense: &Array2<f64>,
    gamma: f64,
    lambda: f64,
    steps: usize,
) -> (Array2<f64>, f64) {
    let (l, n) = (weighted_r.nrows(), weighted_r.ncols());
    // Flat row-major buffers keep the million-step loop allocation-free.
    let wr: Vec<f64> = weighted_r.iter().cloned().collect();
    let lap: Vec<f64> = lap_dense.iter().cloned().collect();
    let mut u = vec![1.0 / l as f64; l * n];
    let mut ul = vec![0.0; l * n];
    let mut g = vec![0.0; l * n];
    let mut best_u = u.clone();
    let mut best_f = f64::INFINITY;
    let mut col = vec![0.0; l];
    let mut scratch: Vec<f64> = Vec::with_capacity(l);

    let mut step0 = 0.0;
    for t in 0..=steps {
        // U L for both the quadratic term and its gradient.
        for j in 0..l {
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += u[j * n + k] * lap[k * n + i];
                }
                ul[j * n + i] = acc;
            }
        }
        // Objective at the current point.
        let mut f = 0.0;
        for idx in 0..l * n {
            f += wr[idx] * u[idx] + gamma * ul[idx] * u[idx];
        }
        for j in 0..l {
            let mut m = 0.0f64;
            for i in 0..n {
                m = m.max(u[j * n + i].abs());
            }
            f += lambda * m;
        }
        if f < best_f {
            best_f = f;
            best_u.copy_from_slice(&u);
        }
        if t == steps {
            break;
        }
        // Subgradient: data + Laplacian + one spike per row at the argmax.
        for idx in 0..l * n {
            g[idx] = wr[idx] + 2.0 * gamma * ul[idx];
        }
        for j in 0..l {
            let mut arg = 0usize;
            let mut max = f64::NEG_INFINITY;
            for i in 0..n {
                if u[j * n + i].abs() > max {
                    max = u[j * n + i].abs();
                    arg = i;
                }
            }
            g[j * n + arg] += if max > 0.0 {
                lambda * u[j * n + arg].signum()
            } else {
                lambda
            };
        }
        if t == 0 {
            let g0_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            step0 = (2.0 * n as f64).sqrt() / g0_norm;
        }
        let eta = step0 / ((t + 1) as f64).sqrt();
        for idx in 0..l * n {
            u[idx] -= eta * g[idx];
        }
        for i in 0..n {
            for k in 0..l {
                col[k] = u[k * n + i];
            }
            project_simplex_sorted(&mut col, &mut scratch);
            for k in 0..l {
                u[k * n + i] = col[k];
            }
        }
    }
    (
        Array2::from_shape_vec((l, n), best_u).unwrap(),
        best_f,
    )
}

// The reference's own sort-based projection (re-derived, not shared with
// the library).
fn project_simplex_sorted(v: &mut [f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut rho = 0;
    let mut rho_sum = 0.0;
    for (k, &z) in scratch.iter().enumerate() {
        acc += z;
        if z > (acc - 1.0) / (k + 1) as f64 {
            rho = k + 1;
            rho_sum = acc;
        }
    }
    let tau = (rho_sum - 1.0) / rho as f64;
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

/// Random solver instance on a connected sparse graph.
pub fn random_instance(l: usize, n: usize, gamma: f64, seed: u64) -> ModelInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = Array2::from_shape_fn((l, n), |_| rng.gen_range(0.0..1.0));
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut entries = Vec::new();
    for i in 0..n - 1 {
        entries.push((i, i + 1, rng.gen_range(0.1..1.0)));
    }
    for _ in 0..n {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let (a, b) = (i.min(j), i.max(j));
        if a != b && b != a + 1 && !entries.iter().any(|&(x, y, _)| (x, y) == (a, b)) {
            entries.push((a, b, rng.gen_range(0.1..1.0)));
        }
    }
    ModelInstance::new(r, p, Similarity { n, entries }, gamma, 1.0).unwrap()
}

/// Two-region test scene: flat bluish left half, textured orange right
/// half. Returns the image and the pixel-level ground truth.
pub fn two_region_scene(h: usize, w: usize) -> (LabImage, Vec<u32>) {
    let mut px = Vec::with_capacity(h * w);
    let mut gt = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            if x < w / 2 {
                px.push([35.0, 15.0, -45.0]);
                gt.push(0);
            } else {
                let ripple = if (x / 2 + y / 2) % 2 == 0 { 6.0 } else { -6.0 };
                px.push([68.0 + ripple, 18.0, 52.0]);
                gt.push(1);
            }
        }
    }
    (LabImage::from_pixels(h, w, px).unwrap(), gt)
}
