//! Builds dataset records from a directory of images, each with a sidecar
//! `<stem>.json` holding `{"keywords": [...], "category": "..."}`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::imaging::load_rgb;

use super::{clean_keyword, curate_palette, extract_dominant_colors, CategoryVocab, CurationConfig, DatasetRecord, KMeansConfig};

/// Images larger than this on their long side are downsampled before
/// clustering.
pub const CLUSTER_MAX_SIDE: usize = 128;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Deserialize)]
struct Sidecar {
    keywords: Vec<String>,
    category: String,
}

#[derive(Debug, Default)]
pub struct BuildReport {
    pub records: Vec<DatasetRecord>,
    pub skipped: Vec<(PathBuf, String)>,
}

/// Image files directly under `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn build_one(
    path: &Path,
    categories: &CategoryVocab,
    kmeans: &KMeansConfig,
    curation: &CurationConfig,
) -> Result<DatasetRecord> {
    let sidecar_path = path.with_extension("json");
    let sidecar: Sidecar = serde_json::from_slice(&std::fs::read(&sidecar_path).map_err(|e| {
        Error::validation(format!("missing sidecar {}: {e}", sidecar_path.display()))
    })?)?;
    if categories.id(&sidecar.category).is_none() {
        return Err(Error::validation(format!("unknown category {:?}", sidecar.category)));
    }
    let keywords: Vec<String> = sidecar
        .keywords
        .iter()
        .map(|k| clean_keyword(k))
        .filter(|k| !k.is_empty())
        .collect();
    if keywords.is_empty() {
        return Err(Error::validation("keywords empty after cleaning"));
    }
    let mut image = load_rgb(path)?;
    let long = image.width.max(image.height);
    if long > CLUSTER_MAX_SIDE {
        let scale = CLUSTER_MAX_SIDE as f64 / long as f64;
        let w = ((image.width as f64 * scale).round() as usize).max(1);
        let h = ((image.height as f64 * scale).round() as usize).max(1);
        image = image.resize(w, h);
    }
    let candidates = extract_dominant_colors(&image, kmeans)?;
    let palette = curate_palette(&candidates, curation, None)?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::validation(format!("non-UTF-8 file name {}", path.display())))?;
    Ok(DatasetRecord {
        image: name.to_string(),
        palette,
        keywords,
        category: sidecar.category,
    })
}

/// Extracts and curates a palette for every image in `dir`. Images that
/// fail (missing sidecar, too few distinct colors, ...) are reported and
/// skipped; an empty directory is an error.
pub fn build_from_dir(
    dir: &Path,
    categories: &CategoryVocab,
    kmeans: &KMeansConfig,
    curation: &CurationConfig,
) -> Result<BuildReport> {
    let images = list_images(dir)?;
    if images.is_empty() {
        return Err(Error::validation(format!("no images found in {}", dir.display())));
    }
    let mut report = BuildReport::default();
    for path in images {
        match build_one(&path, categories, kmeans, curation) {
            Ok(rec) => report.records.push(rec),
            Err(e) => {
                tracing::warn!(image = %path.display(), error = %e, "skipping image");
                report.skipped.push((path, e.to_string()));
            }
        }
    }
    Ok(report)
}
