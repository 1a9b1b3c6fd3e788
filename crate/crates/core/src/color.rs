//! Image loading and CIELAB conversion.
//!
//! All downstream stages (filters, SLIC, boundary contrast) work on Lab
//! values, so decoding converts once up front: 8-bit sRGB in [0,1] to Lab
//! with the D65 white point.

use std::path::Path;

use crate::error::{Error, Result};

/// An image stored as per-pixel CIELAB triples, row-major.
#[derive(Debug, Clone)]
pub struct LabImage {
    pub height: usize,
    pub width: usize,
    data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn from_pixels(height: usize, width: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("empty image"));
        }
        if data.len() != height * width {
            return Err(Error::dim(format!(
                "pixel buffer has {} entries for {}x{} image",
                data.len(),
                height,
                width
            )));
        }
        for p in &data {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("non-finite pixel value"));
            }
        }
        Ok(Self { height, width, data })
    }

    /// Decode a PNG or PPM file and convert to Lab.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.to_rgb8();
        Self::from_rgb8(img.height() as usize, img.width() as usize, img.as_raw())
    }

    /// Convert packed 8-bit RGB (row-major, 3 bytes per pixel) to Lab.
    pub fn from_rgb8(height: usize, width: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != height * width * 3 {
            return Err(Error::dim("rgb buffer length does not match dimensions"));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|px| {
                srgb_to_lab(
                    px[0] as f64 / 255.0,
                    px[1] as f64 / 255.0,
                    px[2] as f64 / 255.0,
                )
            })
            .collect();
        Self::from_pixels(height, width, data)
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    /// One Lab channel as a flat row-major raster.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().map(|p| p[c]).collect()
    }
}

#[inline]
pub fn lab_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    lab_distance_sq(a, b).sqrt()
}

#[inline]
pub fn lab_distance_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dl = a[0] - b[0];
    let da = a[1] - b[1];
    let db = a[2] - b[2];
    dl * dl + da * da + db * db
}

/// sRGB in [0,1] to CIELAB (D65).
pub fn srgb_to_lab(r: f64, g: f64, b: f64) -> [f64; 3] {
    #[inline]
    fn linearize(c: f64) -> f64 {
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    let rl = linearize(r);
    let gl = linearize(g);
    let bl = linearize(b);

    let x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;

    // D65 reference white
    const XN: f64 = 0.95047;
    const YN: f64 = 1.0;
    const ZN: f64 = 1.08883;

    #[inline]
    fn f(t: f64) -> f64 {
        const DELTA: f64 = 6.0 / 29.0;
        if t > DELTA * DELTA * DELTA {
            t.cbrt()
        } else {
            t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
        }
    }

    let fx = f(x / XN);
    let fy = f(y / YN);
    let fz = f(z / ZN);

    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black_reference_points() {
        // The conversion matrix is rounded at the 7th digit; expect ~1e-5.
        let white = srgb_to_lab(1.0, 1.0, 1.0);
        assert!((white[0] - 100.0).abs() < 1e-4);
        assert!(white[1].abs() < 1e-3 && white[2].abs() < 1e-3);

        let black = srgb_to_lab(0.0, 0.0, 0.0);
        assert!(black[0].abs() < 1e-9);
    }

    #[test]
    fn gray_axis_has_zero_chroma() {
        for v in [0.1, 0.25, 0.5, 0.8] {
            let lab = srgb_to_lab(v, v, v);
            assert!(lab[1].abs() < 1e-3);
            assert!(lab[2].abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(LabImage::from_pixels(0, 0, vec![]).is_err());
        assert!(LabImage::from_pixels(1, 1, vec![[f64::NAN, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn opens_ppm_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        // Binary P6, 2x1, white then black.
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 255, 255, 0, 0, 0]);
        std::fs::write(&path, bytes).unwrap();
        let img = LabImage::open(&path).unwrap();
        assert_eq!((img.height, img.width), (1, 2));
        assert!(img.pixel(0, 0)[0] > 99.0);
        assert!(img.pixel(0, 1)[0] < 1.0);
    }
}
