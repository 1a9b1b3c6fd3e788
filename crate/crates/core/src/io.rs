//! On-disk formats: the flat binary matrix container used for feature and
//! dictionary caches, 16-bit PNG label maps, and headerless CSV label files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::Array2;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SPSG";
const VERSION: u32 = 1;

/// Write a dense matrix: magic "SPSG", u32 version, u32 rows, u32 cols,
/// then row-major little-endian f64.
pub fn write_matrix(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.nrows() as u32).to_le_bytes())?;
    w.write_all(&(m.ncols() as u32).to_le_bytes())?;
    for row in m.rows() {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let bad = |reason: &str| Error::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(bad("truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad("unsupported version"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + rows * cols * 8;
    if bytes.len() != expected {
        return Err(bad("payload length does not match header"));
    }
    let data: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|_| bad("shape error"))
}

/// Write a label map as 16-bit grayscale PNG (label id = gray value).
pub fn write_label_png(path: impl AsRef<Path>, labels: &[u32], height: usize, width: usize) -> Result<()> {
    if labels.len() != height * width {
        return Err(Error::dim("label buffer does not match dimensions"));
    }
    if let Some(&max) = labels.iter().max() {
        if max > u16::MAX as u32 {
            return Err(Error::invalid(format!("label id {} exceeds 16-bit range", max)));
        }
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
        Luma([labels[y as usize * width + x as usize] as u16])
    });
    DynamicImage::ImageLuma16(img).save(path.as_ref())?;
    Ok(())
}

/// Read a grayscale PNG as raw label ids (not yet dense).
pub fn read_label_png(path: impl AsRef<Path>) -> Result<(Vec<u32>, usize, usize)> {
    let img = image::open(path.as_ref())?;
    let gray = img.to_luma16();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::invalid("empty label image"));
    }
    let labels = gray.as_raw().iter().map(|&v| v as u32).collect();
    Ok((labels, h, w))
}

/// Read a headerless CSV of integer label ids, one image row per line.
pub fn read_label_csv(path: impl AsRef<Path>) -> Result<(Vec<u32>, usize, usize)> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<u32> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u32>()
                    .map_err(|_| bad(format!("line {}: not an integer id: {:?}", lineno + 1, tok)))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(bad(format!("line {}: ragged row width", lineno + 1)))
            }
            _ => {}
        }
        labels.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| bad("empty file".into()))?;
    if width == 0 || height == 0 {
        return Err(bad("empty file".into()));
    }
    Ok((labels, height, width))
}

/// Read an 8-bit grayscale PNG as per-pixel strengths scaled to [0,1].
pub fn read_boundary_png(path: impl AsRef<Path>) -> Result<(Vec<f64>, usize, usize)> {
    let img = image::open(path.as_ref())?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::invalid("empty boundary image"));
    }
    let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    Ok((data, h, w))
}
