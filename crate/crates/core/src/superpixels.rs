//! Initial over-segmentation: import of external label maps, a built-in
//! SLIC-style over-segmenter, adjacency structure with boundary strengths,
//! and superpixel sizes.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::{lab_distance, lab_distance_sq, LabImage};
use crate::error::{Error, Result};
use crate::io;

/// A dense, 4-connected partition of the image into superpixels.
///
/// Ids are dense in `0..n` and every id labels one 4-connected region;
/// construction enforces both by splitting disconnected components.
#[derive(Debug, Clone)]
pub struct SuperpixelMap {
    pub height: usize,
    pub width: usize,
    labels: Vec<u32>,
    n: usize,
}

impl SuperpixelMap {
    /// Build from raw ids: disconnected components of an id are split into
    /// distinct superpixels and ids are relabeled densely in scan order.
    pub fn from_labels(height: usize, width: usize, raw: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("empty label map"));
        }
        if raw.len() != height * width {
            return Err(Error::dim(format!(
                "label buffer has {} entries for {}x{}",
                raw.len(),
                height,
                width
            )));
        }
        let mut labels = vec![u32::MAX; raw.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..raw.len() {
            if labels[start] != u32::MAX {
                continue;
            }
            let id = raw[start];
            labels[start] = next;
            stack.push(start);
            while let Some(p) = stack.pop() {
                let (y, x) = (p / width, p % width);
                let mut visit = |q: usize| {
                    if labels[q] == u32::MAX && raw[q] == id {
                        labels[q] = next;
                        stack.push(q);
                    }
                };
                if x > 0 {
                    visit(p - 1);
                }
                if x + 1 < width {
                    visit(p + 1);
                }
                if y > 0 {
                    visit(p - width);
                }
                if y + 1 < height {
                    visit(p + width);
                }
            }
            next += 1;
        }
        Ok(Self {
            height,
            width,
            labels,
            n: next as usize,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label_at(&self, y: usize, x: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

/// One adjacency edge between superpixels `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Number of 4-adjacent pixel pairs on the shared boundary.
    pub boundary_pairs: usize,
    /// Mean boundary strength, rescaled to [0,1].
    pub strength: f64,
}

/// Superpixel adjacency graph with mean boundary strengths.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    pub n: usize,
    pub edges: Vec<Edge>,
}

/// Per-superpixel pixel counts.
#[derive(Debug, Clone)]
pub struct SizeVector {
    pub counts: Vec<usize>,
}

impl SizeVector {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Load an over-segmentation from a 16-bit grayscale PNG or a headerless CSV
/// of ids. `image_dims` is `(height, width)` of the image being segmented.
pub fn import_labels(path: impl AsRef<Path>, image_dims: (usize, usize)) -> Result<SuperpixelMap> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    let (raw, h, w) = if is_csv {
        io::read_label_csv(path)?
    } else {
        io::read_label_png(path)?
    };
    if (h, w) != image_dims {
        return Err(Error::dim(format!(
            "label map is {}x{} but image is {}x{}",
            h, w, image_dims.0, image_dims.1
        )));
    }
    SuperpixelMap::from_labels(h, w, raw)
}

/// Built-in SLIC-style over-segmenter: k-means in (Lab, scaled x, scaled y)
/// space seeded on a jittered grid, followed by connectivity enforcement.
pub fn grid_slic(
    image: &LabImage,
    target_n: usize,
    compactness: f64,
    iterations: usize,
    seed: u64,
) -> Result<SuperpixelMap> {
    let (h, w) = (image.height, image.width);
    let npix = h * w;
    if target_n < 2 {
        return Err(Error::invalid("target superpixel count must be at least 2"));
    }
    if target_n > npix {
        return Err(Error::invalid(format!(
            "target superpixel count {} exceeds pixel count {}",
            target_n, npix
        )));
    }
    if iterations < 1 {
        return Err(Error::invalid("need at least one clustering iteration"));
    }
    if compactness.is_nan() || compactness <= 0.0 {
        return Err(Error::invalid("compactness must be positive"));
    }

    let s = (npix as f64 / target_n as f64).sqrt();
    // Round up so the seed count does not undershoot the target; the model
    // merges extra superpixels anyway.
    let nx = ((w as f64 / s).ceil() as usize).max(1);
    let ny = ((h as f64 / s).ceil() as usize).max(1);

    #[derive(Clone, Copy)]
    struct Center {
        lab: [f64; 3],
        x: f64,
        y: f64,
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = (s / 4.0).floor() as i64;
    let mut centers = Vec::with_capacity(nx * ny);
    for gy in 0..ny {
        for gx in 0..nx {
            let mut cx = ((gx as f64 + 0.5) * w as f64 / nx as f64).floor() as i64;
            let mut cy = ((gy as f64 + 0.5) * h as f64 / ny as f64).floor() as i64;
            if jitter > 0 {
                cx += rng.gen_range(-jitter..=jitter);
                cy += rng.gen_range(-jitter..=jitter);
            }
            let cx = cx.clamp(0, w as i64 - 1) as usize;
            let cy = cy.clamp(0, h as i64 - 1) as usize;
            centers.push(Center {
                lab: image.pixel(cy, cx),
                x: cx as f64,
                y: cy as f64,
            });
        }
    }

    let spatial = (compactness / s) * (compactness / s);
    let reach = (2.0 * s).ceil() as i64;
    let mut assign = vec![u32::MAX; npix];
    let mut best = vec![f64::INFINITY; npix];

    for _ in 0..iterations {
        best.iter_mut().for_each(|d| *d = f64::INFINITY);
        assign.iter_mut().for_each(|a| *a = u32::MAX);
        for (k, c) in centers.iter().enumerate() {
            let y0 = ((c.y as i64) - reach).max(0) as usize;
            let y1 = (((c.y as i64) + reach) as usize).min(h - 1);
            let x0 = ((c.x as i64) - reach).max(0) as usize;
            let x1 = (((c.x as i64) + reach) as usize).min(w - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let dx = x as f64 - c.x;
                    let dy = y as f64 - c.y;
                    let d = lab_distance_sq(image.pixel(y, x), c.lab)
                        + spatial * (dx * dx + dy * dy);
                    if d < best[p] {
                        best[p] = d;
                        assign[p] = k as u32;
                    }
                }
            }
        }
        // Pixels outside every search window (possible with strong jitter).
        for (p, slot) in assign.iter_mut().enumerate() {
            if *slot == u32::MAX {
                let (y, x) = (p / w, p % w);
                let mut bd = f64::INFINITY;
                for (k, c) in centers.iter().enumerate() {
                    let dx = x as f64 - c.x;
                    let dy = y as f64 - c.y;
                    let d = lab_distance_sq(image.pixel(y, x), c.lab)
                        + spatial * (dx * dx + dy * dy);
                    if d < bd {
                        bd = d;
                        *slot = k as u32;
                    }
                }
            }
        }
        // Recompute centers as cluster means.
        let mut acc = vec![[0.0f64; 6]; centers.len()];
        for (p, &k) in assign.iter().enumerate() {
            let k = k as usize;
            let (y, x) = (p / w, p % w);
            let lab = image.pixel(y, x);
            let a = &mut acc[k];
            a[0] += lab[0];
            a[1] += lab[1];
            a[2] += lab[2];
            a[3] += x as f64;
            a[4] += y as f64;
            a[5] += 1.0;
        }
        for (c, a) in centers.iter_mut().zip(acc.iter()) {
            if a[5] > 0.0 {
                c.lab = [a[0] / a[5], a[1] / a[5], a[2] / a[5]];
                c.x = a[3] / a[5];
                c.y = a[4] / a[5];
            }
        }
    }

    let min_size = npix / (nx * ny) / 4;
    let enforced = absorb_small_components(&assign, h, w, min_size);
    SuperpixelMap::from_labels(h, w, enforced)
}

/// Relabel connected components in scan order, absorbing components smaller
/// than `min_size` into the already-labeled neighbor sharing the most
/// boundary (ties toward the smaller label).
fn absorb_small_components(assign: &[u32], h: usize, w: usize, min_size: usize) -> Vec<u32> {
    let mut out = vec![u32::MAX; assign.len()];
    let mut next = 0u32;
    let mut component = Vec::new();
    let mut stack = Vec::new();
    for start in 0..assign.len() {
        if out[start] != u32::MAX {
            continue;
        }
        let id = assign[start];
        component.clear();
        stack.push(start);
        out[start] = next;
        let mut touches: BTreeMap<u32, usize> = BTreeMap::new();
        while let Some(p) = stack.pop() {
            component.push(p);
            let (y, x) = (p / w, p % w);
            let mut visit = |q: usize, touches: &mut BTreeMap<u32, usize>| {
                if assign[q] == id {
                    if out[q] == u32::MAX {
                        out[q] = next;
                        stack.push(q);
                    }
                } else if out[q] != u32::MAX {
                    *touches.entry(out[q]).or_insert(0) += 1;
                }
            };
            if x > 0 {
                visit(p - 1, &mut touches);
            }
            if x + 1 < w {
                visit(p + 1, &mut touches);
            }
            if y > 0 {
                visit(p - w, &mut touches);
            }
            if y + 1 < h {
                visit(p + w, &mut touches);
            }
        }
        let adjacent = touches
            .iter()
            .max_by_key(|(label, count)| (**count, std::cmp::Reverse(**label)))
            .map(|(label, _)| *label);
        match adjacent {
            Some(label) if component.len() < min_size => {
                for &p in &component {
                    out[p] = label;
                }
            }
            _ => next += 1,
        }
    }
    out
}

/// Build the adjacency graph. Boundary strength is the mean Lab contrast of
/// the shared boundary pixel pairs, rescaled so the strongest pair in the
/// image maps to 1.
pub fn build_adjacency(map: &SuperpixelMap, image: &LabImage) -> Result<AdjacencyGraph> {
    if (map.height, map.width) != (image.height, image.width) {
        return Err(Error::dim("superpixel map does not match image dimensions"));
    }
    build_adjacency_impl(map, |p, q| {
        let (py, px) = (p / map.width, p % map.width);
        let (qy, qx) = (q / map.width, q % map.width);
        lab_distance(image.pixel(py, px), image.pixel(qy, qx))
    }, true)
}

/// Adjacency with boundary strengths taken from an imported per-pixel
/// strength map in [0,1] (e.g. a contour detector output) instead of image
/// contrast. Pair strength is the mean of the two pixel values; no rescaling.
pub fn build_adjacency_with_boundary(
    map: &SuperpixelMap,
    boundary: &[f64],
) -> Result<AdjacencyGraph> {
    if boundary.len() != map.height * map.width {
        return Err(Error::dim("boundary map does not match image dimensions"));
    }
    build_adjacency_impl(map, |p, q| 0.5 * (boundary[p] + boundary[q]), false)
}

fn build_adjacency_impl(
    map: &SuperpixelMap,
    pair_strength: impl Fn(usize, usize) -> f64,
    rescale: bool,
) -> Result<AdjacencyGraph> {
    let (h, w) = (map.height, map.width);
    let labels = map.labels();
    let mut acc: BTreeMap<(u32, u32), (usize, f64)> = BTreeMap::new();
    let mut max_pair = 0.0f64;
    let mut record = |p: usize, q: usize| {
        let (a, b) = (labels[p], labels[q]);
        if a == b {
            return;
        }
        let key = (a.min(b), a.max(b));
        let s = pair_strength(p, q);
        max_pair = max_pair.max(s);
        let e = acc.entry(key).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += s;
    };
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                record(p, p + 1);
            }
            if y + 1 < h {
                record(p, p + w);
            }
        }
    }
    let scale = if rescale && max_pair > 0.0 { 1.0 / max_pair } else { 1.0 };
    let edges = acc
        .into_iter()
        .map(|((i, j), (pairs, sum))| Edge {
            i: i as usize,
            j: j as usize,
            boundary_pairs: pairs,
            strength: if rescale {
                (sum / pairs as f64) * scale
            } else {
                sum / pairs as f64
            },
        })
        .collect();
    Ok(AdjacencyGraph { n: map.n(), edges })
}

/// Exact per-superpixel pixel counts.
pub fn sizes(map: &SuperpixelMap) -> SizeVector {
    let mut counts = vec![0usize; map.n()];
    for &l in map.labels() {
        counts[l as usize] += 1;
    }
    SizeVector { counts }
}
