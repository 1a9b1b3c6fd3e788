//! Run configuration: every knob of the segmentation pipeline, loadable
//! from a flat `key = value` file with command-line override precedence.
//! The effective configuration is written next to the outputs so a run can
//! be replayed exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaMode {
    Auto,
    Fixed(f64),
}

impl SigmaMode {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(SigmaMode::Auto)
        } else {
            let v: f64 = s.parse().context("sigma-x must be 'auto' or a number")?;
            if v.is_nan() || v <= 0.0 {
                bail!("sigma-x must be positive");
            }
            Ok(SigmaMode::Fixed(v))
        }
    }
}

impl std::fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigmaMode::Auto => write!(f, "auto"),
            SigmaMode::Fixed(v) => write!(f, "{}", v),
        }
    }
}

/// Superpixel source: exactly one of an imported label map or the built-in
/// over-segmenter.
#[derive(Debug, Clone, PartialEq)]
pub enum SuperpixelSource {
    Import(PathBuf),
    Slic(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub source: SuperpixelSource,
    pub slic_compactness: f64,
    pub slic_iterations: usize,
    pub boundary: Option<PathBuf>,
    pub window_radius: usize,
    pub bins_per_filter: usize,
    pub dict_size: usize,
    pub dict_iterations: usize,
    pub gamma: f64,
    pub sigma_x: SigmaMode,
    pub mu: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Empty means the default 19-point grid.
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub trace: Option<PathBuf>,
    pub feature_cache: Option<PathBuf>,
    pub dict_cache: Option<PathBuf>,
    pub no_warm_start: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            source: SuperpixelSource::Slic(200),
            slic_compactness: 10.0,
            slic_iterations: 10,
            boundary: None,
            window_radius: 9,
            bins_per_filter: 11,
            dict_size: 20,
            dict_iterations: 200,
            gamma: 10.0,
            sigma_x: SigmaMode::Auto,
            mu: 1.0,
            tol: 1e-5,
            max_iters: 3000,
            alpha_grid: Vec::new(),
            seed: 42,
            out_dir: PathBuf::from("out"),
            trace: None,
            feature_cache: None,
            dict_cache: None,
            no_warm_start: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            bail!("an input image is required");
        }
        if self.window_radius < 1 {
            bail!("window radius must be at least 1");
        }
        if self.bins_per_filter < 2 {
            bail!("need at least 2 bins per filter");
        }
        if self.dict_size < 1 {
            bail!("dictionary needs at least one word");
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            bail!("gamma must be nonnegative");
        }
        if self.mu.is_nan() || self.mu <= 0.0 || self.tol.is_nan() || self.tol <= 0.0 || self.max_iters == 0 {
            bail!("solver parameters out of range");
        }
        if self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            bail!("alpha values must lie in [0,1]");
        }
        if let SuperpixelSource::Slic(n) = self.source {
            if n < 2 {
                bail!("slic target must be at least 2");
            }
        }
        Ok(())
    }

    /// Serialize as the flat `key = value` format.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{} = {}", k, v);
        };
        kv("input", self.input.display().to_string());
        match &self.source {
            SuperpixelSource::Import(p) => kv("superpixels", p.display().to_string()),
            SuperpixelSource::Slic(n) => kv("slic", n.to_string()),
        }
        kv("slic_compactness", format!("{}", self.slic_compactness));
        kv("slic_iterations", self.slic_iterations.to_string());
        if let Some(b) = &self.boundary {
            kv("boundary", b.display().to_string());
        }
        kv("window_radius", self.window_radius.to_string());
        kv("bins_per_filter", self.bins_per_filter.to_string());
        kv("dict_size", self.dict_size.to_string());
        kv("dict_iterations", self.dict_iterations.to_string());
        kv("gamma", format!("{}", self.gamma));
        kv("sigma_x", self.sigma_x.to_string());
        kv("mu", format!("{}", self.mu));
        kv("tol", format!("{}", self.tol));
        kv("max_iters", self.max_iters.to_string());
        if !self.alpha_grid.is_empty() {
            kv(
                "alpha_grid",
                self.alpha_grid
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        kv("seed", self.seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        if let Some(t) = &self.trace {
            kv("trace", t.display().to_string());
        }
        if let Some(f) = &self.feature_cache {
            kv("feature_cache", f.display().to_string());
        }
        if let Some(d) = &self.dict_cache {
            kv("dict_cache", d.display().to_string());
        }
        kv("no_warm_start", self.no_warm_start.to_string());
        s
    }

    /// Parse the flat format, starting from defaults.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected 'key = value'", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.apply(key, value)
                .with_context(|| format!("line {}: bad value for '{}'", lineno + 1, key))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_config_text(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = PathBuf::from(value),
            "superpixels" => self.source = SuperpixelSource::Import(PathBuf::from(value)),
            "slic" => self.source = SuperpixelSource::Slic(value.parse()?),
            "slic_compactness" => self.slic_compactness = value.parse()?,
            "slic_iterations" => self.slic_iterations = value.parse()?,
            "boundary" => self.boundary = Some(PathBuf::from(value)),
            "window_radius" => self.window_radius = value.parse()?,
            "bins_per_filter" => self.bins_per_filter = value.parse()?,
            "dict_size" => self.dict_size = value.parse()?,
            "dict_iterations" => self.dict_iterations = value.parse()?,
            "gamma" => self.gamma = value.parse()?,
            "sigma_x" => self.sigma_x = SigmaMode::parse(value)?,
            "mu" => self.mu = value.parse()?,
            "tol" => self.tol = value.parse()?,
            "max_iters" => self.max_iters = value.parse()?,
            "alpha_grid" => self.alpha_grid = parse_alpha_list(value)?,
            "seed" => self.seed = value.parse()?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "trace" => self.trace = Some(PathBuf::from(value)),
            "feature_cache" => self.feature_cache = Some(PathBuf::from(value)),
            "dict_cache" => self.dict_cache = Some(PathBuf::from(value)),
            "no_warm_start" => self.no_warm_start = value.parse()?,
            other => bail!("unknown config key '{}'", other),
        }
        Ok(())
    }
}

pub fn parse_alpha_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .with_context(|| format!("bad alpha value '{}'", tok))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trips() {
        let cfg = RunConfig {
            input: PathBuf::from("img.png"),
            source: SuperpixelSource::Slic(64),
            alpha_grid: vec![0.25, 0.5],
            sigma_x: SigmaMode::Fixed(1.25),
            trace: Some(PathBuf::from("trace.csv")),
            ..Default::default()
        };
        let text = cfg.to_config_text();
        let back = RunConfig::from_config_text(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_config_text("nope = 1").is_err());
    }

    #[test]
    fn sigma_mode_parses() {
        assert_eq!(SigmaMode::parse("auto").unwrap(), SigmaMode::Auto);
        assert_eq!(SigmaMode::parse("2.5").unwrap(), SigmaMode::Fixed(2.5));
        assert!(SigmaMode::parse("-1").is_err());
        assert!(SigmaMode::parse("xyz").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig {
            input: PathBuf::from("x.png"),
            ..Default::default()
        };
        assert!(cfg.validate().is_ok());
        cfg.bins_per_filter = 1;
        assert!(cfg.validate().is_err());
    }
}
