//! The four subcommands: segment, eval, bench, features.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use spsg::model::SweepConfig;
use spsg::segment::{sweep, sweep_with_trace, SegmentationFamily};
use spsg::solver::{lambda_max, AdmmSolver, SolverParams};

use crate::config::RunConfig;
use crate::pipeline;

#[derive(Debug, Serialize)]
pub struct IndexEntry {
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub segments: usize,
    pub objective: f64,
    pub converged: bool,
    pub lambda: f64,
    pub iterations: usize,
    pub file: String,
}

fn solver_params(cfg: &RunConfig) -> SolverParams {
    SolverParams {
        mu: cfg.mu,
        tol: cfg.tol,
        max_iters: cfg.max_iters,
    }
}

fn alpha_grid(cfg: &RunConfig) -> Vec<f64> {
    if cfg.alpha_grid.is_empty() {
        SweepConfig::default_grid()
    } else {
        cfg.alpha_grid.clone()
    }
}

/// Run the full pipeline and write the segmentation family to disk.
pub fn cmd_segment(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let image = pipeline::load_image(cfg)?;
    let map = pipeline::superpixels_stage(cfg, &image)?;
    println!("superpixels: {}", map.n());

    let features = pipeline::features_stage(cfg, &image, &map)?;
    let dict = pipeline::dictionary_stage(cfg, &features)?;
    let graph = pipeline::graph_stage(cfg, &image, &map)?;
    let instance = pipeline::instance_stage(cfg, &map, &graph, &features, &dict)?;

    let params = solver_params(cfg);
    let lm = lambda_max(&instance, params)?;
    if !lm.converged {
        eprintln!("warning: a lambda_max probe hit the iteration cap");
    }
    if lm.value <= 0.0 {
        bail!("degenerate lambda_max: every sparsity level selects the same words");
    }
    let config = SweepConfig::new(alpha_grid(cfg), lm.value)?;

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;

    let warm = !cfg.no_warm_start;
    let (family, traces) = if cfg.trace.is_some() {
        let (family, traces) = sweep_with_trace(&instance, &config, params, &map, &graph, warm)?;
        (family, Some(traces))
    } else {
        (sweep(&instance, &config, params, &map, &graph, warm)?, None)
    };

    write_family(&cfg.out_dir, &family)?;
    fs::write(cfg.out_dir.join("run_config.txt"), cfg.to_config_text())?;
    if let (Some(path), Some(traces)) = (&cfg.trace, traces) {
        write_trace(path, &traces)?;
    }

    for entry in &family.entries {
        println!(
            "alpha {:.4}: K={} segments={} objective={:.6} converged={}",
            entry.alpha,
            entry.assignment.k(),
            entry.segmentation.segments,
            entry.objective,
            entry.converged
        );
    }
    if family.entries.iter().any(|e| !e.converged) {
        eprintln!("warning: some sweep entries did not converge; see index.json");
    }
    Ok(())
}

fn write_family(out_dir: &Path, family: &SegmentationFamily) -> Result<()> {
    let mut index = Vec::with_capacity(family.entries.len());
    for entry in &family.entries {
        let file = format!("alpha_{:.4}.png", entry.alpha);
        spsg::io::write_label_png(
            out_dir.join(&file),
            &entry.segmentation.labels,
            entry.segmentation.height,
            entry.segmentation.width,
        )?;
        index.push(IndexEntry {
            alpha: entry.alpha,
            k: entry.assignment.k(),
            segments: entry.segmentation.segments,
            objective: entry.objective,
            converged: entry.converged,
            lambda: entry.lambda,
            iterations: entry.iterations,
            file,
        });
    }
    let json = serde_json::to_string_pretty(&index)?;
    fs::write(out_dir.join("index.json"), json)?;
    Ok(())
}

fn write_trace(path: &Path, traces: &[(f64, spsg::solver::SolveTrace)]) -> Result<()> {
    let mut out = String::from("alpha,iteration,epsilon,objective\n");
    for (alpha, trace) in traces {
        for s in &trace.iterations {
            out.push_str(&format!(
                "{},{},{},{}\n",
                alpha, s.iteration, s.residual, s.objective
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Score prediction families against ground truths and print the table.
pub fn cmd_eval(pred_dir: &Path, gt_dir: &Path, report: Option<&Path>) -> Result<()> {
    let report_data = spsg::eval::evaluate_dataset(pred_dir, gt_dir)?;
    if !report_data.skipped.is_empty() {
        eprintln!(
            "warning: skipped {} image(s) without ground truth: {}",
            report_data.skipped.len(),
            report_data.skipped.join(", ")
        );
    }
    print!("{}", spsg::eval::format_table(&report_data));
    println!(
        "images: {}  alphas: {}  skipped: {}",
        report_data.images.len(),
        report_data.alphas.len(),
        report_data.skipped.len()
    );
    if let Some(path) = report {
        fs::write(path, serde_json::to_string_pretty(&report_data)?)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

/// Median wall-clock seconds per pipeline stage.
pub fn cmd_bench(cfg: &RunConfig, repeats: usize, out: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    if repeats == 0 {
        bail!("repeats must be at least 1");
    }
    let image = pipeline::load_image(cfg)?;
    let map = pipeline::superpixels_stage(cfg, &image)?;

    let median = |mut xs: Vec<f64>| -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs[xs.len() / 2]
    };

    // Features stage: pixel features plus superpixel averaging.
    let mut feature_times = Vec::with_capacity(repeats);
    let mut features = None;
    for _ in 0..repeats {
        let t = Instant::now();
        let f = pipeline::features_stage(cfg, &image, &map)?;
        feature_times.push(t.elapsed().as_secs_f64());
        features = Some(f);
    }
    let features = features.unwrap();

    let mut dict_times = Vec::with_capacity(repeats);
    let mut dict = None;
    for _ in 0..repeats {
        let t = Instant::now();
        let d = pipeline::dictionary_stage(cfg, &features)?;
        dict_times.push(t.elapsed().as_secs_f64());
        dict = Some(d);
    }
    let dict = dict.unwrap();

    // Solver stage: factorization plus one solve at a mid-scale sparsity
    // level; the threshold search itself is untimed setup.
    let graph = pipeline::graph_stage(cfg, &image, &map)?;
    let instance = pipeline::instance_stage(cfg, &map, &graph, &features, &dict)?;
    let params = solver_params(cfg);
    let lm = lambda_max(&instance, params)?;
    let lambda = 0.5 * lm.value;
    let mut solver_times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        let solver = AdmmSolver::new(&instance, params)?;
        let _ = solver.solve(lambda);
        solver_times.push(t.elapsed().as_secs_f64());
    }

    let mut csv = String::from("stage,median_seconds,repeats\n");
    csv.push_str(&format!("features,{:.6},{}\n", median(feature_times), repeats));
    csv.push_str(&format!("dictionary,{:.6},{}\n", median(dict_times), repeats));
    csv.push_str(&format!("solver,{:.6},{}\n", median(solver_times), repeats));
    print!("{}", csv);
    if let Some(path) = out {
        fs::write(path, &csv)?;
    }
    Ok(())
}

/// Compute pixel features and write them to the cache container.
pub fn cmd_features(input: &Path, window_radius: usize, bins: usize, out: &Path) -> Result<()> {
    let cfg = RunConfig {
        input: input.to_path_buf(),
        window_radius,
        bins_per_filter: bins,
        ..Default::default()
    };
    let image = pipeline::load_image(&cfg)?;
    let field = pipeline::pixel_features_stage(&cfg, &image)?;
    spsg::io::write_matrix(out, &field.data)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "wrote {} ({} pixels x {} dims)",
        out.display(),
        field.data.nrows(),
        field.data.ncols()
    )?;
    Ok(())
}
