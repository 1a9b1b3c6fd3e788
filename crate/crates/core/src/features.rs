//! Local spectral histogram features: per-pixel concatenated histograms of
//! filter responses over a local window, then averaged per superpixel.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::color::LabImage;
use crate::error::{Error, Result};
use crate::superpixels::SuperpixelMap;

/// One response raster generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filter {
    /// Pass a Lab channel through unchanged (0 = L, 1 = a, 2 = b).
    Channel(usize),
    /// Laplacian-of-Gaussian on the L channel, zero-sum sampled kernel.
    LaplacianOfGaussian { sigma: f64 },
}

/// Ordered, validated list of filters.
#[derive(Debug, Clone)]
pub struct FilterBank {
    filters: Vec<Filter>,
}

impl FilterBank {
    pub fn new(filters: Vec<Filter>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::invalid("filter bank must be nonempty"));
        }
        for f in &filters {
            match f {
                Filter::Channel(c) if *c > 2 => {
                    return Err(Error::invalid("Lab channel index out of range"))
                }
                Filter::LaplacianOfGaussian { sigma } if sigma.is_nan() || *sigma <= 0.0 => {
                    return Err(Error::invalid("filter scale must be positive"))
                }
                _ => {}
            }
        }
        Ok(Self { filters })
    }

    /// Three Lab channels plus LoG at sigma 1 and 2 on L.
    pub fn default_bank() -> Self {
        Self {
            filters: vec![
                Filter::Channel(0),
                Filter::Channel(1),
                Filter::Channel(2),
                Filter::LaplacianOfGaussian { sigma: 1.0 },
                Filter::LaplacianOfGaussian { sigma: 2.0 },
            ],
        }
    }

    pub fn filters(&self) -> &[Filter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }
}

/// Histogram windowing parameters.
#[derive(Debug, Clone)]
pub struct LshParams {
    pub window_radius: usize,
    pub bins_per_filter: usize,
    pub filter_bank: FilterBank,
}

impl LshParams {
    pub fn new(window_radius: usize, bins_per_filter: usize, filter_bank: FilterBank) -> Result<Self> {
        if window_radius < 1 {
            return Err(Error::invalid("window radius must be at least 1"));
        }
        if bins_per_filter < 2 {
            return Err(Error::invalid("need at least 2 bins per filter"));
        }
        Ok(Self {
            window_radius,
            bins_per_filter,
            filter_bank,
        })
    }

    /// 19x19 window, 11 bins, default bank (d = 55).
    pub fn default_params() -> Self {
        Self {
            window_radius: 9,
            bins_per_filter: 11,
            filter_bank: FilterBank::default_bank(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bins_per_filter * self.filter_bank.len()
    }
}

/// Per-filter scalar response rasters, all sharing the image dimensions.
#[derive(Debug, Clone)]
pub struct FilterResponses {
    pub height: usize,
    pub width: usize,
    pub rasters: Vec<Vec<f64>>,
}

/// One nonnegative feature vector per pixel, stored pixel-major
/// (`data.row(p)` is the feature of pixel `p` in scan order).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFeatureField {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub data: Array2<f64>,
}

impl PixelFeatureField {
    #[inline]
    pub fn feature(&self, pixel: usize) -> ArrayView1<'_, f64> {
        self.data.row(pixel)
    }
}

/// Per-superpixel feature columns: `d x n`, nonnegative, per-filter blocks
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.column(i)
    }
}

#[inline]
fn reflect(i: isize, len: isize) -> usize {
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Sampled LoG kernel at `sigma`, radius `ceil(3 sigma)`, shifted to sum to
/// zero so constant regions respond with exactly zero.
pub fn log_kernel(sigma: f64) -> (Vec<f64>, usize) {
    let r = (3.0 * sigma).ceil() as usize;
    let size = 2 * r + 1;
    let mut k = Vec::with_capacity(size * size);
    let s2 = sigma * sigma;
    for dy in -(r as isize)..=(r as isize) {
        for dx in -(r as isize)..=(r as isize) {
            let rr = (dx * dx + dy * dy) as f64;
            k.push((rr - 2.0 * s2) / (s2 * s2) * (-rr / (2.0 * s2)).exp());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    for v in &mut k {
        *v -= mean;
    }
    (k, r)
}

fn convolve_reflect(src: &[f64], h: usize, w: usize, kernel: &[f64], r: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let size = 2 * r + 1;
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for dy in 0..size {
                let sy = reflect(y as isize + dy as isize - r as isize, h as isize);
                for dx in 0..size {
                    let sx = reflect(x as isize + dx as isize - r as isize, w as isize);
                    acc += kernel[dy * size + dx] * src[sy * w + sx];
                }
            }
            *o = acc;
        }
    });
    out
}

/// Run every filter over the image.
pub fn compute_filter_responses(image: &LabImage, bank: &FilterBank) -> Result<FilterResponses> {
    if bank.is_empty() {
        return Err(Error::invalid("filter bank must be nonempty"));
    }
    let (h, w) = (image.height, image.width);
    let luminance = image.channel(0);
    let rasters = bank
        .filters()
        .iter()
        .map(|f| match f {
            Filter::Channel(c) => image.channel(*c),
            Filter::LaplacianOfGaussian { sigma } => {
                let (kernel, r) = log_kernel(*sigma);
                convolve_reflect(&luminance, h, w, &kernel, r)
            }
        })
        .collect();
    Ok(FilterResponses {
        height: h,
        width: w,
        rasters,
    })
}

/// Histogram the responses over the window around each pixel.
///
/// Bins are uniform over the raster-wide [min, max] range of each filter,
/// last bin right-inclusive; a degenerate range puts all mass in bin 0.
/// Windows are clipped at the image borders.
pub fn compute_lsh_features(responses: &FilterResponses, params: &LshParams) -> Result<PixelFeatureField> {
    let (h, w) = (responses.height, responses.width);
    let npix = h * w;
    if npix == 0 {
        return Err(Error::invalid("empty response rasters"));
    }
    if responses.rasters.len() != params.filter_bank.len() {
        return Err(Error::dim(format!(
            "{} response rasters for a bank of {} filters",
            responses.rasters.len(),
            params.filter_bank.len()
        )));
    }
    for raster in &responses.rasters {
        if raster.len() != npix {
            return Err(Error::dim("response rasters must share dimensions"));
        }
        if raster.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite filter response"));
        }
    }
    let bins = params.bins_per_filter;
    let r = params.window_radius;
    let d = params.dim();
    let mut data = vec![0.0f64; npix * d];

    let stride = (h + 1) * (w + 1);
    for (f_idx, raster) in responses.rasters.iter().enumerate() {
        let lo = raster.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = raster.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let bin_of = |v: f64| -> usize {
            if range <= 0.0 {
                0
            } else {
                (((v - lo) / range * bins as f64) as usize).min(bins - 1)
            }
        };
        // Integral image per bin for O(bins) window histograms.
        let mut integral = vec![0u32; bins * stride];
        for y in 0..h {
            for x in 0..w {
                let b = bin_of(raster[y * w + x]);
                for bb in 0..bins {
                    let base = bb * stride;
                    integral[base + (y + 1) * (w + 1) + (x + 1)] = integral
                        [base + y * (w + 1) + (x + 1)]
                        + integral[base + (y + 1) * (w + 1) + x]
                        - integral[base + y * (w + 1) + x]
                        + u32::from(bb == b);
                }
            }
        }
        data.par_chunks_mut(d).enumerate().for_each(|(p, feat)| {
            let (y, x) = (p / w, p % w);
            let y0 = y.saturating_sub(r);
            let y1 = (y + r).min(h - 1);
            let x0 = x.saturating_sub(r);
            let x1 = (x + r).min(w - 1);
            let total = ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
            let block = &mut feat[f_idx * bins..(f_idx + 1) * bins];
            for (bb, out) in block.iter_mut().enumerate() {
                let base = bb * stride;
                let count = integral[base + (y1 + 1) * (w + 1) + (x1 + 1)]
                    + integral[base + y0 * (w + 1) + x0]
                    - integral[base + y0 * (w + 1) + (x1 + 1)]
                    - integral[base + (y1 + 1) * (w + 1) + x0];
                *out = count as f64 / total;
            }
        });
    }

    Ok(PixelFeatureField {
        height: h,
        width: w,
        dim: d,
        data: Array2::from_shape_vec((npix, d), data).expect("shape"),
    })
}

/// Column `i` is the mean feature of the pixels labeled `i`.
pub fn superpixel_features(field: &PixelFeatureField, map: &SuperpixelMap) -> Result<FeatureMatrix> {
    if (field.height, field.width) != (map.height, map.width) {
        return Err(Error::dim("feature field does not match superpixel map"));
    }
    superpixel_features_raw(field, map.labels(), map.n())
}

/// Raw-label variant used by the public entry point; errors when a label in
/// `0..n` has no pixels.
pub fn superpixel_features_raw(field: &PixelFeatureField, labels: &[u32], n: usize) -> Result<FeatureMatrix> {
    if labels.len() != field.height * field.width {
        return Err(Error::dim("label buffer does not match feature field"));
    }
    let d = field.dim;
    let mut sums = Array2::<f64>::zeros((d, n));
    let mut counts = vec![0usize; n];
    for (p, &l) in labels.iter().enumerate() {
        let l = l as usize;
        if l >= n {
            return Err(Error::invalid(format!("label {} out of range 0..{}", l, n)));
        }
        counts[l] += 1;
        let feat = field.feature(p);
        for k in 0..d {
            sums[[k, l]] += feat[k];
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::invalid(format!("superpixel {} has no pixels", i)));
        }
        let inv = 1.0 / c as f64;
        for k in 0..d {
            sums[[k, i]] *= inv;
        }
    }
    Ok(FeatureMatrix { data: sums })
}
