//! Closed-form projections used by the auxiliary ADMM block.

use ndarray::Array2;

/// Euclidean projection of `v` onto `{z >= 0, sum z = 1}` in place.
///
/// Sort descending, locate the threshold index, shift and clamp.
pub fn project_simplex(v: &mut [f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &z) in scratch.iter().enumerate() {
        cumsum += z;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if z - candidate > 0.0 {
            tau = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

/// Project every column of `m` onto the probability simplex.
pub fn project_simplex_columns(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    let mut col = vec![0.0; m.nrows()];
    let mut scratch = Vec::with_capacity(m.nrows());
    for i in 0..m.ncols() {
        for (k, v) in col.iter_mut().enumerate() {
            *v = m[[k, i]];
        }
        project_simplex(&mut col, &mut scratch);
        for (k, &v) in col.iter().enumerate() {
            out[[k, i]] = v;
        }
    }
    out
}

/// Elementwise projection onto the nonnegative orthant.
pub fn project_nonneg(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn project(v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        let mut scratch = Vec::new();
        project_simplex(&mut out, &mut scratch);
        out
    }

    #[test]
    fn feasible_point_is_unchanged() {
        let v = [0.2, 0.5, 0.3];
        let p = project(&v);
        for (a, b) in p.iter().zip(v.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_vector_case_matches_grid_search() {
        let p = project(&[1.5, 0.5]);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12);

        // Exhaustive search over the 2-simplex parameterized by t in [0,1].
        let mut best = (f64::INFINITY, 0.0);
        let steps = 1_000_000usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let d = (t - 1.5).powi(2) + ((1.0 - t) - 0.5).powi(2);
            if d < best.0 {
                best = (d, t);
            }
        }
        assert!((best.1 - p[0]).abs() < 1e-5);
    }

    #[test]
    fn constant_vector_projects_to_uniform() {
        for l in [2usize, 3, 7] {
            let p = project(&vec![4.2; l]);
            for v in &p {
                assert!((v - 1.0 / l as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_is_always_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = project(&v);
            assert!(p.iter().all(|&x| x >= 0.0));
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nonneg_projection_cases() {
        let m = array![[1.0, -1.0], [0.0, 2.0]];
        assert_eq!(project_nonneg(&m), array![[1.0, 0.0], [0.0, 2.0]]);
        let all_pos = array![[0.5, 0.25]];
        assert_eq!(project_nonneg(&all_pos), all_pos);
    }

    #[test]
    fn nonneg_projection_is_separable_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-2.0..2.0));
        let p = project_nonneg(&m);
        for (pv, mv) in p.iter().zip(m.iter()) {
            // Per-entry case analysis of argmin_{z >= 0} (z - m)^2.
            let expect = if *mv >= 0.0 { *mv } else { 0.0 };
            assert_eq!(*pv, expect);
        }
    }

    #[test]
    fn column_projection_touches_each_column_independently() {
        let m = array![[1.5, 0.2], [0.5, 0.3]];
        let p = project_simplex_columns(&m);
        assert!((p[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((p[[1, 0]] - 0.0).abs() < 1e-12);
        // Second column sums to 0.5: mass is added equally.
        assert!((p.column(1).sum() - 1.0).abs() < 1e-12);
        assert!((p[[0, 1]] - 0.45).abs() < 1e-12);
        assert!((p[[1, 1]] - 0.55).abs() < 1e-12);
    }
}
