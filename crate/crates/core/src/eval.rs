//! Region benchmarks: segmentation covering, probabilistic Rand index, and
//! variation of information, with ODS/OIS aggregation over an alpha grid
//! and a directory-based dataset harness.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;

/// Scores for one (prediction, ground truth) comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreTriple {
    pub cov: f64,
    pub pri: f64,
    pub voi: f64,
}

struct Contingency {
    counts: Vec<u64>,
    pred_sizes: Vec<u64>,
    gt_sizes: Vec<u64>,
    total: u64,
}

impl Contingency {
    #[inline]
    fn at(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.gt_sizes.len() + j]
    }
}

fn dense_relabel(labels: &[u32]) -> (Vec<u32>, usize) {
    let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
    let mut next = 0u32;
    let out = labels
        .iter()
        .map(|&l| {
            *remap.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect();
    (out, next as usize)
}

fn contingency(pred: &[u32], gt: &[u32]) -> Result<Contingency> {
    if pred.len() != gt.len() {
        return Err(Error::dim(format!(
            "prediction has {} pixels, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("cannot score empty label maps"));
    }
    let (pred, np) = dense_relabel(pred);
    let (gt, ng) = dense_relabel(gt);
    let mut counts = vec![0u64; np * ng];
    let mut pred_sizes = vec![0u64; np];
    let mut gt_sizes = vec![0u64; ng];
    for (&p, &g) in pred.iter().zip(gt.iter()) {
        counts[p as usize * ng + g as usize] += 1;
        pred_sizes[p as usize] += 1;
        gt_sizes[g as usize] += 1;
    }
    Ok(Contingency {
        counts,
        pred_sizes,
        gt_sizes,
        total: pred.len() as u64,
    })
}

/// Segmentation covering of the ground truth by the prediction:
/// `(1/N) sum_{R in gt} |R| max_{R' in pred} IoU(R, R')`.
pub fn covering(pred: &[u32], gt: &[u32]) -> Result<f64> {
    let c = contingency(pred, gt)?;
    let mut acc = 0.0;
    for j in 0..c.gt_sizes.len() {
        let mut best = 0.0f64;
        for i in 0..c.pred_sizes.len() {
            let inter = c.at(i, j);
            if inter == 0 {
                continue;
            }
            let union = c.pred_sizes[i] + c.gt_sizes[j] - inter;
            best = best.max(inter as f64 / union as f64);
        }
        acc += c.gt_sizes[j] as f64 * best;
    }
    Ok(acc / c.total as f64)
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// Probabilistic Rand index: the fraction of unordered pixel pairs labeled
/// consistently (together in both maps or apart in both).
pub fn pri(pred: &[u32], gt: &[u32]) -> Result<f64> {
    let c = contingency(pred, gt)?;
    let total_pairs = choose2(c.total);
    if total_pairs == 0 {
        return Ok(1.0);
    }
    let same_both: u64 = c.counts.iter().map(|&v| choose2(v)).sum();
    let same_pred: u64 = c.pred_sizes.iter().map(|&v| choose2(v)).sum();
    let same_gt: u64 = c.gt_sizes.iter().map(|&v| choose2(v)).sum();
    let agreements = total_pairs + 2 * same_both - same_pred - same_gt;
    Ok(agreements as f64 / total_pairs as f64)
}

/// Variation of information `H(pred|gt) + H(gt|pred)` in nats.
pub fn voi(pred: &[u32], gt: &[u32]) -> Result<f64> {
    let c = contingency(pred, gt)?;
    let n = c.total as f64;
    let ng = c.gt_sizes.len();
    let mut acc = 0.0;
    for i in 0..c.pred_sizes.len() {
        for j in 0..ng {
            let nij = c.at(i, j);
            if nij == 0 {
                continue;
            }
            let p = nij as f64 / n;
            acc += p * ((c.gt_sizes[j] as f64 / nij as f64).ln() + (c.pred_sizes[i] as f64 / nij as f64).ln());
        }
    }
    Ok(acc)
}

pub fn score_pair(pred: &[u32], gt: &[u32]) -> Result<ScoreTriple> {
    Ok(ScoreTriple {
        cov: covering(pred, gt)?,
        pri: pri(pred, gt)?,
        voi: voi(pred, gt)?,
    })
}

/// ODS/OIS aggregate of one metric over a shared alpha grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricSummary {
    /// Best fixed alpha for the whole dataset, and its mean score.
    pub ods: f64,
    pub ods_alpha: f64,
    /// Mean over images of each image's best score.
    pub ois: f64,
}

/// Aggregate `scores[image][alpha]` at the dataset and image scales.
/// `higher_better` is false for distance-like metrics.
pub fn ods_ois(scores: &[Vec<f64>], alphas: &[f64], higher_better: bool) -> Result<MetricSummary> {
    if scores.is_empty() {
        return Err(Error::invalid("no images to aggregate"));
    }
    if scores.iter().any(|row| row.len() != alphas.len()) || alphas.is_empty() {
        return Err(Error::dim("score tables must share the alpha grid"));
    }
    let n_img = scores.len() as f64;
    let better = |a: f64, b: f64| if higher_better { a > b } else { a < b };

    let mut ods = f64::NAN;
    let mut ods_alpha = alphas[0];
    for (a, &alpha) in alphas.iter().enumerate() {
        let mean = scores.iter().map(|row| row[a]).sum::<f64>() / n_img;
        if ods.is_nan() || better(mean, ods) {
            ods = mean;
            ods_alpha = alpha;
        }
    }
    let ois = scores
        .iter()
        .map(|row| {
            row.iter()
                .cloned()
                .reduce(|a, b| if better(b, a) { b } else { a })
                .unwrap()
        })
        .sum::<f64>()
        / n_img;
    Ok(MetricSummary { ods, ods_alpha, ois })
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageScores {
    pub name: String,
    pub gt_count: usize,
    /// Per alpha, averaged over this image's ground truths.
    pub per_alpha: Vec<ScoreTriple>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetReport {
    pub alphas: Vec<f64>,
    pub images: Vec<ImageScores>,
    /// Images skipped for missing ground truth.
    pub skipped: Vec<String>,
    pub cov: MetricSummary,
    pub pri: MetricSummary,
    pub voi: MetricSummary,
}

fn family_entries(dir: &Path) -> Result<Vec<(f64, std::path::PathBuf)>> {
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = match path.file_name().and_then(|s| s.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(stem) = name.strip_prefix("alpha_").and_then(|s| s.strip_suffix(".png")) {
            let alpha: f64 = stem.parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                reason: "unparseable alpha in file name".into(),
            })?;
            entries.push((alpha, path));
        }
    }
    if entries.is_empty() {
        return Err(Error::invalid(format!(
            "no alpha_*.png label maps in {}",
            dir.display()
        )));
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(entries)
}

/// Score a directory of per-image segmentation families against a directory
/// of per-image ground-truth sets. Layout: one subdirectory per image on
/// both sides; predictions are `alpha_<value>.png`, ground truths any PNGs.
/// Images without ground truth are skipped (and counted).
pub fn evaluate_dataset(pred_dir: &Path, gt_dir: &Path) -> Result<DatasetReport> {
    let mut image_dirs: Vec<std::path::PathBuf> = std::fs::read_dir(pred_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    image_dirs.sort();
    if image_dirs.is_empty() {
        return Err(Error::invalid(format!(
            "no image subdirectories in {}",
            pred_dir.display()
        )));
    }

    let mut alphas: Option<Vec<f64>> = None;
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for dir in &image_dirs {
        let name = dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let family = family_entries(dir)?;
        let these: Vec<f64> = family.iter().map(|(a, _)| *a).collect();
        match &alphas {
            None => alphas = Some(these),
            Some(reference) => {
                if reference.len() != these.len()
                    || reference
                        .iter()
                        .zip(these.iter())
                        .any(|(a, b)| (a - b).abs() > 1e-9)
                {
                    return Err(Error::invalid(format!(
                        "image {} uses a different alpha grid",
                        name
                    )));
                }
            }
        }

        let gt_sub = gt_dir.join(&name);
        let mut gt_files: Vec<std::path::PathBuf> = match std::fs::read_dir(&gt_sub) {
            Ok(rd) => rd
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().map(|e| e == "png").unwrap_or(false))
                .collect(),
            Err(_) => Vec::new(),
        };
        gt_files.sort();
        if gt_files.is_empty() {
            log::warn!("no ground truth for image {}, skipping", name);
            skipped.push(name);
            continue;
        }

        let gts: Vec<(Vec<u32>, usize, usize)> = gt_files
            .iter()
            .map(io::read_label_png)
            .collect::<Result<_>>()?;
        let mut per_alpha = Vec::with_capacity(family.len());
        for (_, pred_path) in &family {
            let (pred, ph, pw) = io::read_label_png(pred_path)?;
            let mut acc = ScoreTriple {
                cov: 0.0,
                pri: 0.0,
                voi: 0.0,
            };
            for (gt, gh, gw) in &gts {
                if (ph, pw) != (*gh, *gw) {
                    return Err(Error::dim(format!(
                        "prediction {} and ground truth dimensions differ",
                        pred_path.display()
                    )));
                }
                let s = score_pair(&pred, gt)?;
                acc.cov += s.cov;
                acc.pri += s.pri;
                acc.voi += s.voi;
            }
            let m = gts.len() as f64;
            per_alpha.push(ScoreTriple {
                cov: acc.cov / m,
                pri: acc.pri / m,
                voi: acc.voi / m,
            });
        }
        images.push(ImageScores {
            name,
            gt_count: gts.len(),
            per_alpha,
        });
    }

    if images.is_empty() {
        return Err(Error::invalid("every image was skipped; nothing to aggregate"));
    }
    let alphas = alphas.unwrap();
    let table = |f: fn(&ScoreTriple) -> f64| -> Vec<Vec<f64>> {
        images
            .iter()
            .map(|img| img.per_alpha.iter().map(f).collect())
            .collect()
    };
    let cov = ods_ois(&table(|s| s.cov), &alphas, true)?;
    let pri = ods_ois(&table(|s| s.pri), &alphas, true)?;
    let voi = ods_ois(&table(|s| s.voi), &alphas, false)?;
    Ok(DatasetReport {
        alphas,
        images,
        skipped,
        cov,
        pri,
        voi,
    })
}

/// Render the ODS/OIS summary as the usual benchmark table.
pub fn format_table(report: &DatasetReport) -> String {
    let mut out = String::new();
    out.push_str("          Cov             PRI             VoI\n");
    out.push_str("          ODS     OIS     ODS     OIS     ODS     OIS\n");
    out.push_str(&format!(
        "          {:<7.4} {:<7.4} {:<7.4} {:<7.4} {:<7.4} {:<7.4}\n",
        report.cov.ods, report.cov.ois, report.pri.ods, report.pri.ois, report.voi.ods, report.voi.ois
    ));
    out
}
