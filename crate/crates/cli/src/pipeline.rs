//! Pipeline stages shared by `segment` and `bench`: each stage is a plain
//! function so the bench command can time them individually.

use anyhow::{bail, Context, Result};
use spsg::color::LabImage;
use spsg::features::{
    compute_filter_responses, compute_lsh_features, superpixel_features, FeatureMatrix,
    FilterBank, LshParams, PixelFeatureField,
};
use spsg::model::{
    auto_sigma, dissimilarity, edge_weights, learn_dictionary, size_matrix, Dictionary,
    ModelInstance,
};
use spsg::superpixels::{
    build_adjacency, build_adjacency_with_boundary, grid_slic, import_labels, sizes,
    AdjacencyGraph, SuperpixelMap,
};

use crate::config::{RunConfig, SigmaMode, SuperpixelSource};

pub fn load_image(cfg: &RunConfig) -> Result<LabImage> {
    LabImage::open(&cfg.input).with_context(|| format!("loading image {}", cfg.input.display()))
}

pub fn superpixels_stage(cfg: &RunConfig, image: &LabImage) -> Result<SuperpixelMap> {
    match &cfg.source {
        SuperpixelSource::Import(path) => import_labels(path, (image.height, image.width))
            .with_context(|| format!("importing superpixels from {}", path.display())),
        SuperpixelSource::Slic(n) => Ok(grid_slic(
            image,
            *n,
            cfg.slic_compactness,
            cfg.slic_iterations,
            cfg.seed,
        )?),
    }
}

pub fn lsh_params(cfg: &RunConfig) -> Result<LshParams> {
    Ok(LshParams::new(
        cfg.window_radius,
        cfg.bins_per_filter,
        FilterBank::default_bank(),
    )?)
}

/// Pixel feature field, read from the cache when present, written to it
/// after computing otherwise.
pub fn pixel_features_stage(cfg: &RunConfig, image: &LabImage) -> Result<PixelFeatureField> {
    let params = lsh_params(cfg)?;
    let d = params.dim();
    let npix = image.height * image.width;
    if let Some(cache) = &cfg.feature_cache {
        if cache.exists() {
            let m = spsg::io::read_matrix(cache)?;
            if m.nrows() != npix || m.ncols() != d {
                bail!(
                    "feature cache {} is {}x{}, expected {}x{}",
                    cache.display(),
                    m.nrows(),
                    m.ncols(),
                    npix,
                    d
                );
            }
            return Ok(PixelFeatureField {
                height: image.height,
                width: image.width,
                dim: d,
                data: m,
            });
        }
    }
    let responses = compute_filter_responses(image, &params.filter_bank)?;
    let field = compute_lsh_features(&responses, &params)?;
    if let Some(cache) = &cfg.feature_cache {
        spsg::io::write_matrix(cache, &field.data)?;
    }
    Ok(field)
}

pub fn features_stage(
    cfg: &RunConfig,
    image: &LabImage,
    map: &SuperpixelMap,
) -> Result<FeatureMatrix> {
    let field = pixel_features_stage(cfg, image)?;
    Ok(superpixel_features(&field, map)?)
}

pub fn dictionary_stage(cfg: &RunConfig, features: &FeatureMatrix) -> Result<Dictionary> {
    if let Some(cache) = &cfg.dict_cache {
        if cache.exists() {
            let m = spsg::io::read_matrix(cache)?;
            if m.nrows() != features.dim() || m.ncols() != cfg.dict_size {
                bail!(
                    "dictionary cache {} is {}x{}, expected {}x{}",
                    cache.display(),
                    m.nrows(),
                    m.ncols(),
                    features.dim(),
                    cfg.dict_size
                );
            }
            return Ok(Dictionary { data: m });
        }
    }
    let dict = learn_dictionary(features, cfg.dict_size, cfg.dict_iterations, cfg.seed)?;
    if let Some(cache) = &cfg.dict_cache {
        spsg::io::write_matrix(cache, &dict.data)?;
    }
    Ok(dict)
}

pub fn graph_stage(
    cfg: &RunConfig,
    image: &LabImage,
    map: &SuperpixelMap,
) -> Result<AdjacencyGraph> {
    match &cfg.boundary {
        Some(path) => {
            let (strengths, h, w) = spsg::io::read_boundary_png(path)?;
            if (h, w) != (image.height, image.width) {
                bail!("boundary map {} does not match the image", path.display());
            }
            Ok(build_adjacency_with_boundary(map, &strengths)?)
        }
        None => Ok(build_adjacency(map, image)?),
    }
}

pub fn instance_stage(
    cfg: &RunConfig,
    map: &SuperpixelMap,
    graph: &AdjacencyGraph,
    features: &FeatureMatrix,
    dict: &Dictionary,
) -> Result<ModelInstance> {
    let r = dissimilarity(dict, features)?;
    let p = size_matrix(&sizes(map));
    let sigma = match cfg.sigma_x {
        SigmaMode::Auto => auto_sigma(graph, features)?,
        SigmaMode::Fixed(v) => v,
    };
    let w = edge_weights(graph, features, sigma)?;
    Ok(ModelInstance::new(r, p, w, cfg.gamma, sigma)?)
}
