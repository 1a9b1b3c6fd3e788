use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use spsg_cli::commands;
use spsg_cli::config::{parse_alpha_list, RunConfig, SigmaMode, SuperpixelSource};

#[derive(Parser)]
#[command(
    name = "spsg",
    version,
    about = "Superpixel segmentation by sparse dictionary-word selection"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Segment an image into a family of label maps over the sparsity sweep
    Segment(SegmentArgs),
    /// Score prediction families against ground-truth directories
    Eval(EvalArgs),
    /// Time the pipeline stages
    Bench(BenchArgs),
    /// Compute pixel features and write the cache container
    Features(FeaturesArgs),
}

#[derive(Args, Clone)]
struct SegmentArgs {
    /// Flat key = value config file; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input image (PNG or PPM)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Imported over-segmentation (16-bit PNG or CSV of ids)
    #[arg(long, conflicts_with = "slic")]
    superpixels: Option<PathBuf>,
    /// Built-in over-segmenter with this target superpixel count
    #[arg(long)]
    slic: Option<usize>,
    #[arg(long)]
    slic_compactness: Option<f64>,
    #[arg(long)]
    slic_iterations: Option<usize>,
    /// Optional 8-bit boundary-strength side file
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long)]
    window_radius: Option<usize>,
    #[arg(long)]
    bins_per_filter: Option<usize>,
    /// Dictionary size l
    #[arg(long)]
    dict_size: Option<usize>,
    #[arg(long)]
    dict_iterations: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// 'auto' or a positive number
    #[arg(long)]
    sigma_x: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Single sparsity level (fraction of lambda_max)
    #[arg(long, conflicts_with = "alpha_grid")]
    alpha: Option<f64>,
    /// Comma-separated sparsity levels
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write a per-iteration solver trace CSV here
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    feature_cache: Option<PathBuf>,
    #[arg(long)]
    dict_cache: Option<PathBuf>,
    /// Solve each sweep entry cold (enables parallel entries)
    #[arg(long)]
    no_warm_start: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    /// Write the full JSON report here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    segment: SegmentArgs,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Write the timing CSV here as well as stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 9)]
    window_radius: usize,
    #[arg(long, default_value_t = 11)]
    bins_per_filter: usize,
    #[arg(long)]
    out: PathBuf,
}

fn build_config(args: &SegmentArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.input {
        cfg.input = v.clone();
    }
    if let Some(v) = &args.superpixels {
        cfg.source = SuperpixelSource::Import(v.clone());
    }
    if let Some(v) = args.slic {
        cfg.source = SuperpixelSource::Slic(v);
    }
    if let Some(v) = args.slic_compactness {
        cfg.slic_compactness = v;
    }
    if let Some(v) = args.slic_iterations {
        cfg.slic_iterations = v;
    }
    if let Some(v) = &args.boundary {
        cfg.boundary = Some(v.clone());
    }
    if let Some(v) = args.window_radius {
        cfg.window_radius = v;
    }
    if let Some(v) = args.bins_per_filter {
        cfg.bins_per_filter = v;
    }
    if let Some(v) = args.dict_size {
        cfg.dict_size = v;
    }
    if let Some(v) = args.dict_iterations {
        cfg.dict_iterations = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = &args.sigma_x {
        cfg.sigma_x = SigmaMode::parse(v)?;
    }
    if let Some(v) = args.mu {
        cfg.mu = v;
    }
    if let Some(v) = args.tol {
        cfg.tol = v;
    }
    if let Some(v) = args.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha_grid = vec![v];
    }
    if let Some(v) = &args.alpha_grid {
        cfg.alpha_grid = parse_alpha_list(v)?;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &args.trace {
        cfg.trace = Some(v.clone());
    }
    if let Some(v) = &args.feature_cache {
        cfg.feature_cache = Some(v.clone());
    }
    if let Some(v) = &args.dict_cache {
        cfg.dict_cache = Some(v.clone());
    }
    if args.no_warm_start {
        cfg.no_warm_start = true;
    }
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SPSG_THREADS") {
        let n: usize = match v.parse() {
            Ok(n) => n,
            Err(_) => bail!("SPSG_THREADS must be a positive integer, got {:?}", v),
        };
        if n == 0 {
            bail!("SPSG_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {:#}", err);
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    configure_threads()?;
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Segment(args) => {
            let cfg = build_config(&args)?;
            commands::cmd_segment(&cfg)
        }
        Cmd::Eval(args) => commands::cmd_eval(&args.pred_dir, &args.gt_dir, args.report.as_deref()),
        Cmd::Bench(args) => {
            let cfg = build_config(&args.segment)?;
            commands::cmd_bench(&cfg, args.repeats, args.out.as_deref())
        }
        Cmd::Features(args) => {
            commands::cmd_features(&args.input, args.window_radius, args.bins_per_filter, &args.out)
        }
    }
}
