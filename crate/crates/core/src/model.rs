//! Solver inputs: the NMF dictionary, the word/superpixel dissimilarity
//! matrix, superpixel size weights, the adjacency similarity, and its graph
//! Laplacian.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::superpixels::{AdjacencyGraph, SizeVector};

/// Nonnegative dictionary of `l` words, one per column (`d x l`).
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub data: Array2<f64>,
}

impl Dictionary {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn words(&self) -> usize {
        self.data.ncols()
    }

    pub fn word(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }
}

/// Sparse symmetric similarity with zero diagonal; entries keyed `i < j`.
#[derive(Debug, Clone)]
pub struct Similarity {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// Graph Laplacian `L = diag(W 1) - W` kept in edge-list form.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    degree: Vec<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `out = L u` for one coefficient row `u`.
    pub fn matvec(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.n);
        for i in 0..self.n {
            out[i] = self.degree[i] * u[i];
        }
        for &(i, j, w) in &self.entries {
            out[i] -= w * u[j];
            out[j] -= w * u[i];
        }
    }

    /// `u^T L u` via the matrix route.
    pub fn quad_form(&self, u: &[f64]) -> f64 {
        let mut lu = vec![0.0; self.n];
        self.matvec(u, &mut lu);
        u.iter().zip(lu.iter()).map(|(a, b)| a * b).sum()
    }

    /// `tr(U L U^T)` summed over the rows of `U` (`l x n`).
    pub fn trace_quad_rows(&self, u: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for row in u.rows() {
            acc += self.quad_form(row.as_slice().expect("row-major layout"));
        }
        acc
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((self.n, self.n));
        for i in 0..self.n {
            m[[i, i]] = self.degree[i];
        }
        for &(i, j, w) in &self.entries {
            m[[i, j]] -= w;
            m[[j, i]] -= w;
        }
        m
    }

    /// Validate and convert a dense symmetric zero-diagonal similarity.
    pub fn from_dense(w: &Array2<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::dim("similarity matrix must be square"));
        }
        let mut entries = Vec::new();
        for i in 0..n {
            if w[[i, i]] != 0.0 {
                return Err(Error::invalid("similarity diagonal must be zero"));
            }
            for j in (i + 1)..n {
                if (w[[i, j]] - w[[j, i]]).abs() > 1e-12 {
                    return Err(Error::invalid("similarity matrix must be symmetric"));
                }
                if w[[i, j]] != 0.0 {
                    entries.push((i, j, w[[i, j]]));
                }
            }
        }
        Ok(build_laplacian(n, entries))
    }
}

fn build_laplacian(n: usize, entries: Vec<(usize, usize, f64)>) -> Laplacian {
    let mut degree = vec![0.0; n];
    for &(i, j, w) in &entries {
        degree[i] += w;
        degree[j] += w;
    }
    Laplacian { n, entries, degree }
}

/// `L = diag(W 1) - W`.
pub fn laplacian(w: &Similarity) -> Laplacian {
    build_laplacian(w.n, w.entries.clone())
}

/// Everything the solver consumes for one image.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    /// Dissimilarity, `l x n`, nonnegative.
    pub r: Array2<f64>,
    /// Superpixel size weights, positive, summing to one.
    pub p: Vec<f64>,
    pub w: Similarity,
    pub laplacian: Laplacian,
    pub gamma: f64,
    pub lambda: f64,
    pub sigma_x: f64,
}

impl ModelInstance {
    pub fn new(
        r: Array2<f64>,
        p: Vec<f64>,
        w: Similarity,
        gamma: f64,
        sigma_x: f64,
    ) -> Result<Self> {
        let n = r.ncols();
        if p.len() != n || w.n != n {
            return Err(Error::dim(format!(
                "inconsistent sizes: R has {} columns, p has {}, W has {}",
                n,
                p.len(),
                w.n
            )));
        }
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("dissimilarity entries must be finite and nonnegative"));
        }
        if p.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::invalid("size weights must be positive"));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::invalid("gamma must be finite and nonnegative"));
        }
        if sigma_x.is_nan() || sigma_x <= 0.0 {
            return Err(Error::invalid("sigma_x must be positive"));
        }
        let total: f64 = p.iter().sum();
        let p = p.into_iter().map(|v| v / total).collect();
        let laplacian = laplacian(&w);
        Ok(Self {
            r,
            p,
            w,
            laplacian,
            gamma,
            lambda: 0.0,
            sigma_x,
        })
    }

    pub fn words(&self) -> usize {
        self.r.nrows()
    }

    pub fn n(&self) -> usize {
        self.r.ncols()
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// `R diag(p)`: the size-weighted dissimilarity used by the solver.
    pub fn weighted_r(&self) -> Array2<f64> {
        let mut m = self.r.clone();
        for (i, &pi) in self.p.iter().enumerate() {
            m.column_mut(i).mapv_inplace(|v| v * pi);
        }
        m
    }
}

/// Alpha grid for the segmentation family, with the single-word threshold.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    alpha_grid: Vec<f64>,
    pub lambda_max: f64,
}

impl SweepConfig {
    pub fn new(mut alpha_grid: Vec<f64>, lambda_max: f64) -> Result<Self> {
        if alpha_grid.is_empty() {
            return Err(Error::invalid("alpha grid must be nonempty"));
        }
        if alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("alpha values must lie in [0,1]"));
        }
        if lambda_max.is_nan() || lambda_max <= 0.0 {
            return Err(Error::invalid("lambda_max must be positive"));
        }
        alpha_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { alpha_grid, lambda_max })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha_grid
    }

    /// 19 evenly spaced values in (0,1).
    pub fn default_grid() -> Vec<f64> {
        (1..20).map(|k| k as f64 * 0.05).collect()
    }
}

/// Learn the dictionary by multiplicative-update NMF on the Frobenius loss.
///
/// Initialization samples `l` distinct feature columns (perturbed by 1e-6);
/// words whose activation row collapses to zero are re-seeded from random
/// data columns. Deterministic for a fixed seed.
pub fn learn_dictionary(
    x: &FeatureMatrix,
    l: usize,
    iterations: usize,
    seed: u64,
) -> Result<Dictionary> {
    let (d, _, _) = nmf(&x.data, l, iterations, seed)?;
    Ok(Dictionary { data: d })
}

/// NMF internals, exposing the activation matrix and the per-iteration
/// reconstruction error history.
pub fn nmf(
    x: &Array2<f64>,
    l: usize,
    iterations: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>)> {
    let (d_dim, n) = (x.nrows(), x.ncols());
    if n == 0 || d_dim == 0 {
        return Err(Error::invalid("cannot factorize an empty matrix"));
    }
    if l < 1 {
        return Err(Error::invalid("dictionary needs at least one word"));
    }
    if x.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("feature matrix must be nonnegative and finite"));
    }
    if l > n {
        log::warn!("dictionary size {} exceeds superpixel count {}", l, n);
    }

    const EPS: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dict = Array2::<f64>::zeros((d_dim, l));
    if l <= n {
        let picks = sample(&mut rng, n, l);
        for (j, col) in picks.iter().enumerate() {
            for k in 0..d_dim {
                dict[[k, j]] = x[[k, col]] + 1e-6;
            }
        }
    } else {
        for j in 0..l {
            let col = rng.gen_range(0..n);
            for k in 0..d_dim {
                dict[[k, j]] = x[[k, col]] + 1e-6;
            }
        }
    }
    let mut act = Array2::<f64>::from_elem((l, n), 1.0 / l as f64);

    let mut errors = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // act <- act * (D^T X) / (D^T D act)
        let dtx = dict.t().dot(x);
        let dtd_act = dict.t().dot(&dict).dot(&act);
        ndarray::Zip::from(&mut act)
            .and(&dtx)
            .and(&dtd_act)
            .for_each(|a, &num, &den| *a *= num / (den + EPS));

        // D <- D * (X act^T) / (D act act^T)
        let xat = x.dot(&act.t());
        let d_aat = dict.dot(&act.dot(&act.t()));
        ndarray::Zip::from(&mut dict)
            .and(&xat)
            .and(&d_aat)
            .for_each(|v, &num, &den| *v *= num / (den + EPS));

        errors.push(reconstruction_error(x, &dict, &act));

        // Re-seed dead words.
        for j in 0..l {
            let row_max = act.row(j).iter().cloned().fold(0.0f64, f64::max);
            if row_max < EPS {
                let col = rng.gen_range(0..n);
                for k in 0..d_dim {
                    dict[[k, j]] = x[[k, col]] + 1e-6;
                }
                act.row_mut(j).fill(1.0 / l as f64);
            }
        }
    }

    Ok((dict, act, errors))
}

fn reconstruction_error(x: &Array2<f64>, d: &Array2<f64>, u: &Array2<f64>) -> f64 {
    let recon = d.dot(u);
    (x - &recon).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `R[j][i] = ||d_j - x_i||^2`, exactly.
pub fn dissimilarity(dict: &Dictionary, x: &FeatureMatrix) -> Result<Array2<f64>> {
    if dict.dim() != x.dim() {
        return Err(Error::dim(format!(
            "dictionary dimension {} does not match feature dimension {}",
            dict.dim(),
            x.dim()
        )));
    }
    let (l, n) = (dict.words(), x.n());
    let mut r = Array2::<f64>::zeros((l, n));
    for j in 0..l {
        let dj = dict.word(j);
        for i in 0..n {
            let xi = x.column(i);
            let mut acc = 0.0;
            for k in 0..dict.dim() {
                let diff = dj[k] - xi[k];
                acc += diff * diff;
            }
            r[[j, i]] = acc;
        }
    }
    Ok(r)
}

/// Normalize pixel counts into positive weights summing to one.
pub fn size_matrix(s: &SizeVector) -> Vec<f64> {
    let total = s.total() as f64;
    s.counts.iter().map(|&c| c as f64 / total).collect()
}

/// Edge weights `w_ij = exp(-||x_i - x_j||^2 / sigma_x - b)` on adjacent
/// pairs; zero elsewhere and on the diagonal.
pub fn edge_weights(graph: &AdjacencyGraph, x: &FeatureMatrix, sigma_x: f64) -> Result<Similarity> {
    if sigma_x.is_nan() || sigma_x <= 0.0 {
        return Err(Error::invalid("sigma_x must be positive"));
    }
    if graph.n != x.n() {
        return Err(Error::dim("graph nodes do not match feature columns"));
    }
    let entries = graph
        .edges
        .iter()
        .map(|e| {
            let dist_sq = feature_distance_sq(x.column(e.i), x.column(e.j));
            (e.i, e.j, (-dist_sq / sigma_x - e.strength).exp())
        })
        .collect();
    Ok(Similarity { n: graph.n, entries })
}

/// Mean squared feature distance over graph edges, floored at 1e-12.
pub fn auto_sigma(graph: &AdjacencyGraph, x: &FeatureMatrix) -> Result<f64> {
    if graph.edges.is_empty() {
        return Err(Error::invalid("cannot estimate sigma_x without edges"));
    }
    if graph.n != x.n() {
        return Err(Error::dim("graph nodes do not match feature columns"));
    }
    let mean = graph
        .edges
        .iter()
        .map(|e| feature_distance_sq(x.column(e.i), x.column(e.j)))
        .sum::<f64>()
        / graph.edges.len() as f64;
    Ok(mean.max(1e-12))
}

fn feature_distance_sq(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}
