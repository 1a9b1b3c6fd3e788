//! Superpixel segmentation by sparse dictionary-word selection.
//!
//! The pipeline: local spectral histogram features per pixel, averaged over
//! an initial over-segmentation; a nonnegative dictionary learned over the
//! superpixel features; a convex model that picks a small subset of words
//! and softly assigns every superpixel to one, solved by a purpose-built
//! ADMM; and a merge of neighboring superpixels sharing a word into final
//! segments. A sweep over the sparsity level yields a family of
//! segmentations, scored against ground truth with region benchmarks.

pub mod color;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod linalg;
pub mod model;
pub mod segment;
pub mod solver;
pub mod superpixels;

pub use error::{Error, Result};
