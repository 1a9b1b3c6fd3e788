//! From soft assignments to final segmentations: argmax assignment over the
//! selected words, merging of same-word neighbors, and the sparsity sweep
//! that produces a family of segmentations.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelInstance, SweepConfig};
use crate::solver::{selected_rows, AdmmSolver, SolverParams, SolverState};
use crate::superpixels::{AdjacencyGraph, SuperpixelMap};

/// Hard word assignment derived from a solution matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Selected word index per superpixel.
    pub word_of: Vec<usize>,
    /// Ascending indices of the rows that cleared the selection threshold.
    pub selected_words: Vec<usize>,
}

impl Assignment {
    /// Number of selected words — the estimated number of coherent regions.
    pub fn k(&self) -> usize {
        self.selected_words.len()
    }
}

/// Assign every superpixel to the selected word with the largest
/// contribution; ties break toward the lower word index.
pub fn assign(u_star: &Array2<f64>) -> Assignment {
    let selected = selected_rows(u_star);
    // A column summing to one always puts some entry at >= 1/l > 0.1/l.
    assert!(!selected.is_empty(), "no word cleared the selection threshold");
    let word_of = (0..u_star.ncols())
        .map(|i| {
            let mut best = selected[0];
            let mut best_val = u_star[[selected[0], i]];
            for &j in &selected[1..] {
                let v = u_star[[j, i]];
                if v > best_val {
                    best = j;
                    best_val = v;
                }
            }
            best
        })
        .collect();
    Assignment {
        word_of,
        selected_words: selected,
    }
}

/// A rendered pixel-level segmentation with dense segment ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
    pub segments: usize,
}

/// Merge neighboring superpixels assigned to the same word: connected
/// components of the adjacency graph restricted to same-word edges.
pub fn merge(
    map: &SuperpixelMap,
    graph: &AdjacencyGraph,
    assignment: &Assignment,
) -> Result<Segmentation> {
    let n = map.n();
    if graph.n != n || assignment.word_of.len() != n {
        return Err(Error::dim("assignment does not cover the superpixel map"));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &graph.edges {
        if assignment.word_of[e.i] == assignment.word_of[e.j] {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    // Dense component ids in order of first appearance.
    let mut component = vec![u32::MAX; n];
    let mut next = 0u32;
    for i in 0..n {
        let root = find(&mut parent, i);
        if component[root] == u32::MAX {
            component[root] = next;
            next += 1;
        }
        component[i] = component[root];
    }
    let labels = map
        .labels()
        .iter()
        .map(|&sp| component[sp as usize])
        .collect();
    Ok(Segmentation {
        height: map.height,
        width: map.width,
        labels,
        segments: next as usize,
    })
}

/// One sweep entry at a given sparsity level.
#[derive(Debug, Clone)]
pub struct FamilyEntry {
    pub alpha: f64,
    pub lambda: f64,
    pub assignment: Assignment,
    pub segmentation: Segmentation,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// The family of segmentations over the alpha grid, ascending in alpha.
#[derive(Debug, Clone)]
pub struct SegmentationFamily {
    pub entries: Vec<FamilyEntry>,
}

/// Solve, assign, and merge once per alpha. With `warm_start` each solve
/// continues from the previous alpha's state (ascending order); without it
/// the entries are independent and run in parallel.
pub fn sweep(
    instance: &ModelInstance,
    config: &SweepConfig,
    params: SolverParams,
    map: &SuperpixelMap,
    graph: &AdjacencyGraph,
    warm_start: bool,
) -> Result<SegmentationFamily> {
    Ok(sweep_impl(instance, config, params, map, graph, warm_start, false)?.0)
}

/// Sweep variant that also returns the per-alpha solver traces.
pub fn sweep_with_trace(
    instance: &ModelInstance,
    config: &SweepConfig,
    params: SolverParams,
    map: &SuperpixelMap,
    graph: &AdjacencyGraph,
    warm_start: bool,
) -> Result<(SegmentationFamily, Vec<(f64, crate::solver::SolveTrace)>)> {
    let (family, traces) = sweep_impl(instance, config, params, map, graph, warm_start, true)?;
    Ok((family, traces))
}

fn sweep_impl(
    instance: &ModelInstance,
    config: &SweepConfig,
    params: SolverParams,
    map: &SuperpixelMap,
    graph: &AdjacencyGraph,
    warm_start: bool,
    collect_trace: bool,
) -> Result<(SegmentationFamily, Vec<(f64, crate::solver::SolveTrace)>)> {
    let solver = AdmmSolver::new(instance, params)?;
    let mut traces = Vec::new();
    let entries = if warm_start {
        let mut entries = Vec::with_capacity(config.alphas().len());
        let mut carry: Option<SolverState> = None;
        for &alpha in config.alphas() {
            let lambda = alpha * config.lambda_max;
            let outcome = solver.solve_with(lambda, carry.as_ref(), collect_trace);
            entries.push(build_entry(alpha, lambda, &outcome.solution, map, graph)?);
            if let Some(trace) = outcome.trace {
                traces.push((alpha, trace));
            }
            carry = Some(outcome.final_state);
        }
        entries
    } else {
        let results: Vec<(FamilyEntry, Option<(f64, crate::solver::SolveTrace)>)> = config
            .alphas()
            .par_iter()
            .map(|&alpha| {
                let lambda = alpha * config.lambda_max;
                let outcome = solver.solve_with(lambda, None, collect_trace);
                let entry = build_entry(alpha, lambda, &outcome.solution, map, graph)?;
                Ok((entry, outcome.trace.map(|t| (alpha, t))))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::with_capacity(results.len());
        for (entry, trace) in results {
            entries.push(entry);
            if let Some(t) = trace {
                traces.push(t);
            }
        }
        entries
    };
    Ok((SegmentationFamily { entries }, traces))
}

fn build_entry(
    alpha: f64,
    lambda: f64,
    solution: &crate::solver::Solution,
    map: &SuperpixelMap,
    graph: &AdjacencyGraph,
) -> Result<FamilyEntry> {
    let assignment = assign(&solution.u_star);
    let segmentation = merge(map, graph, &assignment)?;
    Ok(FamilyEntry {
        alpha,
        lambda,
        assignment,
        segmentation,
        objective: solution.objective,
        converged: solution.converged,
        iterations: solution.iterations,
    })
}
