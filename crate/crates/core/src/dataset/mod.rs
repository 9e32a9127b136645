//! Palette dataset records, their JSONL storage format and the corpus
//! building blocks: dominant color extraction, palette curation and HSL
//! statistics.

mod build;
mod curate;
mod kmeans;
mod stats;
mod text;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::color::{Palette, PALETTE_LEN};
use crate::error::{Error, Result};

pub use build::{build_from_dir, list_images, BuildReport, CLUSTER_MAX_SIDE};
pub use curate::{curate_palette, dedup_candidates, greedy_pick, CurationConfig, Survivor};
pub use kmeans::{extract_dominant_colors, CandidateColors, KMeansConfig};
pub use stats::{
    circular_mean_deg, circular_std_deg, compute_hsl_stats, welch_t_test, HslStats, ImageDir,
    PixelSource, StatsSource, TTest,
};
pub use text::clean_keyword;

/// Default fourteen-entry category vocabulary for the youth-subculture
/// corpus. Deployments with their own labels override it in the config.
pub const CYS_CATEGORIES: [&str; 14] = [
    "punk",
    "hiphop",
    "techno",
    "indie",
    "rock",
    "metal",
    "folk",
    "electronic",
    "guochao",
    "anime",
    "streetwear",
    "vaporwave",
    "lofi",
    "experimental",
];

/// Closed, ordered category vocabulary. Ids are positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryVocab(Vec<String>);

impl CategoryVocab {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::validation("category vocabulary is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::validation(format!("duplicate category {n:?}")));
            }
        }
        Ok(CategoryVocab(names))
    }

    pub fn cys_default() -> Self {
        CategoryVocab(CYS_CATEGORIES.iter().map(|s| s.to_string()).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let names: Vec<String> = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::new(names)
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.0.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.0.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One training example: an image reference with its curated palette,
/// descriptive keywords and category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub image: String,
    pub palette: Palette,
    pub keywords: Vec<String>,
    pub category: String,
}

impl DatasetRecord {
    /// Keywords joined into a single text condition.
    pub fn text(&self) -> String {
        self.keywords.join(" ")
    }
}

#[derive(Deserialize)]
struct RawRecord {
    image: String,
    palette: Vec<String>,
    keywords: Vec<String>,
    category: String,
}

fn validate(raw: RawRecord, categories: &CategoryVocab) -> Result<DatasetRecord> {
    if raw.palette.len() != PALETTE_LEN {
        return Err(Error::validation(format!(
            "palette length must be {PALETTE_LEN}, got {}",
            raw.palette.len()
        )));
    }
    let palette = Palette::from_hex(&raw.palette)?;
    if categories.id(&raw.category).is_none() {
        return Err(Error::validation(format!("unknown category {:?}", raw.category)));
    }
    let keywords: Vec<String> = raw
        .keywords
        .iter()
        .map(|k| clean_keyword(k))
        .filter(|k| !k.is_empty())
        .collect();
    if keywords.is_empty() {
        return Err(Error::validation("keywords empty after cleaning"));
    }
    Ok(DatasetRecord {
        image: raw.image,
        palette,
        keywords,
        category: raw.category,
    })
}

#[derive(Debug, Default)]
pub struct LoadReport {
    pub records: Vec<DatasetRecord>,
    /// Records that failed validation, skipped in lenient mode.
    pub rejected: Vec<(usize, String)>,
}

/// Reads JSONL dataset records. Blank lines are ignored. In strict mode the
/// first invalid record aborts with its (1-based) line number; otherwise
/// invalid records are reported and skipped.
pub fn load_dataset<R: BufRead>(
    reader: R,
    categories: &CategoryVocab,
    strict: bool,
) -> Result<LoadReport> {
    let mut report = LoadReport::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawRecord>(&line)
            .map_err(Error::from)
            .and_then(|raw| validate(raw, categories));
        match parsed {
            Ok(rec) => report.records.push(rec),
            Err(e) if strict => {
                return Err(Error::Record {
                    line: lineno,
                    reason: e.to_string(),
                })
            }
            Err(e) => {
                tracing::warn!(line = lineno, error = %e, "skipping invalid record");
                report.rejected.push((lineno, e.to_string()));
            }
        }
    }
    Ok(report)
}

pub fn load_dataset_file(path: &Path, categories: &CategoryVocab, strict: bool) -> Result<LoadReport> {
    let file = std::fs::File::open(path)?;
    load_dataset(std::io::BufReader::new(file), categories, strict)
}

pub fn write_dataset<W: Write>(mut writer: W, records: &[DatasetRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
