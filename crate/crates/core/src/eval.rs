//! Evaluation harness: controlled diversity grids, blinded preference
//! studies with exact binomial tallies, and corpus HSL comparisons.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::color::{palette_distance, Palette};
use crate::dataset::{compute_hsl_stats, welch_t_test, DatasetRecord, StatsSource};
use crate::error::{Error, Result};
use crate::imaging::{encode_png8, LumaGrid, RgbGrid};
use crate::palette_gan::PaletteGan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Category,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Text(String),
    Image(LumaGrid),
    Category(String),
}

impl Variant {
    fn modality(&self) -> Modality {
        match self {
            Variant::Text(_) => Modality::Text,
            Variant::Image(_) => Modality::Image,
            Variant::Category(_) => Modality::Category,
        }
    }
}

/// One modality varies over `variants` while the others stay at the base
/// context.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityExperiment {
    pub varied: Modality,
    pub base_text: String,
    pub base_category: String,
    pub base_image: LumaGrid,
    pub variants: Vec<Variant>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityGrid {
    pub varied: Modality,
    pub palettes: Vec<Palette>,
    /// Mean pairwise palette distance across variants; absent with fewer
    /// than two variants.
    pub dispersion: Option<f64>,
    /// Palette of the unmodified base context.
    pub baseline: Palette,
    pub distance_to_baseline: Vec<f64>,
}

pub fn run_diversity_grid(experiment: &DiversityExperiment, model: &PaletteGan) -> Result<DiversityGrid> {
    if experiment.variants.is_empty() {
        return Err(Error::validation("diversity experiment needs at least one variant"));
    }
    if let Some(v) = experiment.variants.iter().find(|v| v.modality() != experiment.varied) {
        return Err(Error::validation(format!(
            "variant of kind {:?} in an experiment varying {:?}",
            v.modality(),
            experiment.varied
        )));
    }
    let builder = model.context_builder();
    let generate = |text: &str, category: &str, image: &LumaGrid| -> Result<Palette> {
        let ctx = builder.build(text, category, image)?;
        model.sample_palette(&ctx, experiment.seed)
    };
    let (t, c, i) = (&experiment.base_text, &experiment.base_category, &experiment.base_image);
    let baseline = generate(t, c, i)?;
    let palettes = experiment
        .variants
        .iter()
        .map(|v| match v {
            Variant::Text(text) => generate(text, c, i),
            Variant::Image(image) => generate(t, c, image),
            Variant::Category(category) => generate(t, category, i),
        })
        .collect::<Result<Vec<_>>>()?;
    let dispersion = mean_pairwise_distance(&palettes);
    let distance_to_baseline = palettes.iter().map(|p| palette_distance(p, &baseline)).collect();
    Ok(DiversityGrid {
        varied: experiment.varied,
        palettes,
        dispersion,
        baseline,
        distance_to_baseline,
    })
}

pub fn mean_pairwise_distance(palettes: &[Palette]) -> Option<f64> {
    let n = palettes.len();
    if n < 2 {
        return None;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += palette_distance(&palettes[i], &palettes[j]);
        }
    }
    Some(sum / (n * (n - 1) / 2) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Palette(Palette),
    Image(RgbGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyItem {
    pub keyword: String,
    pub artifact: Artifact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::Parse {
                input: other.to_string(),
                reason: "choice must be \"left\" or \"right\"".into(),
            }),
        }
    }
}

/// What raters see: file names only, no provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindPair {
    pub pair_id: String,
    pub keyword: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub pairs: Vec<BlindPair>,
}

/// Which side holds the system's own artifact, per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub ours: BTreeMap<String, Side>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Pairs `ours` with `baseline` by keyword, shuffles pair order and sides
/// with `seed`, and writes the blinded bundle (artifacts plus
/// `manifest.json`) into `bundle_dir`. The answer key is returned and
/// never written into the bundle.
pub fn build_preference_study(
    ours: &[StudyItem],
    baseline: &[StudyItem],
    bundle_dir: &Path,
    seed: u64,
) -> Result<(StudyManifest, AnswerKey)> {
    if ours.len() != baseline.len() {
        return Err(Error::validation(format!(
            "ours has {} items, baseline has {}",
            ours.len(),
            baseline.len()
        )));
    }
    let mut by_keyword: HashMap<&str, Vec<&StudyItem>> = HashMap::new();
    for b in baseline {
        by_keyword.entry(b.keyword.as_str()).or_default().push(b);
    }
    let mut pairs = Vec::with_capacity(ours.len());
    for o in ours {
        let b = by_keyword
            .get_mut(o.keyword.as_str())
            .and_then(Vec::pop)
            .ok_or_else(|| Error::validation(format!("no baseline item for keyword {:?}", o.keyword)))?;
        pairs.push((o, b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    std::fs::create_dir_all(bundle_dir)?;
    let mut manifest = StudyManifest { pairs: Vec::new() };
    let mut key = AnswerKey { ours: BTreeMap::new() };
    for (i, (o, b)) in pairs.into_iter().enumerate() {
        let pair_id = format!("p{:03}", i + 1);
        let ours_side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
        let (left, right) = match ours_side {
            Side::Left => (o, b),
            Side::Right => (b, o),
        };
        let left_file = write_artifact(bundle_dir, &format!("{pair_id}_left"), &left.artifact)?;
        let right_file = write_artifact(bundle_dir, &format!("{pair_id}_right"), &right.artifact)?;
        manifest.pairs.push(BlindPair {
            pair_id: pair_id.clone(),
            keyword: o.keyword.clone(),
            left: left_file,
            right: right_file,
        });
        key.ours.insert(pair_id, ours_side);
    }
    std::fs::write(bundle_dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok((manifest, key))
}

const SWATCH: usize = 32;

/// Renders a palette as a horizontal strip of five square swatches.
pub fn palette_swatch(palette: &Palette) -> RgbGrid {
    let rgb = palette.rgb();
    let width = SWATCH * rgb.len();
    let pixels = (0..SWATCH * width).map(|i| rgb[(i % width) / SWATCH]).collect();
    RgbGrid {
        width,
        height: SWATCH,
        pixels,
    }
}

fn write_artifact(dir: &Path, stem: &str, artifact: &Artifact) -> Result<String> {
    let png = format!("{stem}.png");
    match artifact {
        Artifact::Palette(p) => {
            std::fs::write(dir.join(&png), encode_png8(&palette_swatch(p))?)?;
            let json = serde_json::json!({ "palette": p });
            std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&json)?)?;
        }
        Artifact::Image(img) => std::fs::write(dir.join(&png), encode_png8(img)?)?,
    }
    Ok(png)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub pairs: usize,
    pub raters: usize,
    pub votes: usize,
    pub ours: usize,
    pub fraction: f64,
    /// Two-sided exact binomial test against 0.5.
    pub p_value: f64,
}

/// `min(1, 2 P(X ≤ min(k, n−k)))` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_two_sided_p(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let tail = k.min(n - k) as u64;
    let dist = Binomial::new(0.5, n as u64).expect("valid binomial");
    (2.0 * dist.cdf(tail)).min(1.0)
}

#[derive(Deserialize)]
struct Vote {
    pair_id: String,
    rater_id: String,
    choice: String,
}

/// Reads votes as CSV with header `pair_id,rater_id,choice` and counts how
/// often the system's artifact was preferred.
pub fn tally<R: Read>(votes: R, key: &AnswerKey) -> Result<Tally> {
    let mut reader = csv::Reader::from_reader(votes);
    let mut total = 0;
    let mut ours = 0;
    let mut pairs = std::collections::BTreeSet::new();
    let mut raters = std::collections::BTreeSet::new();
    for (i, row) in reader.deserialize::<Vote>().enumerate() {
        let vote = row?;
        let side = key.ours.get(&vote.pair_id).ok_or_else(|| Error::Record {
            line: i + 2,
            reason: format!("unknown pair {:?}", vote.pair_id),
        })?;
        let choice: Side = vote.choice.parse().map_err(|e: Error| Error::Record {
            line: i + 2,
            reason: e.to_string(),
        })?;
        total += 1;
        ours += (choice == *side) as usize;
        pairs.insert(vote.pair_id);
        raters.insert(vote.rater_id);
    }
    if total == 0 {
        return Err(Error::validation("no votes"));
    }
    Ok(Tally {
        pairs: pairs.len(),
        raters: raters.len(),
        votes: total,
        ours,
        fraction: ours as f64 / total as f64,
        p_value: binomial_two_sided_p(ours, total),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatComparison {
    pub statistic: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_a: usize,
    pub n_b: usize,
    pub comparisons: Vec<StatComparison>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["statistic", "n_a", "n_b", "mean_a", "mean_b", "t", "df", "p"])?;
        for c in &self.comparisons {
            w.write_record([
                c.statistic.clone(),
                self.n_a.to_string(),
                self.n_b.to_string(),
                c.mean_a.to_string(),
                c.mean_b.to_string(),
                c.t.to_string(),
                c.df.to_string(),
                c.p.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Draws up to `n` records without replacement.
pub fn sample_records(records: &[DatasetRecord], n: usize, seed: u64) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<DatasetRecord> = records.to_vec();
    picked.shuffle(&mut rng);
    picked.truncate(n);
    picked
}

/// HSL statistics of both corpora compared with Welch tests.
pub fn corpus_comparison_report(
    a: &[DatasetRecord],
    source_a: &StatsSource<'_>,
    b: &[DatasetRecord],
    source_b: &StatsSource<'_>,
) -> Result<ComparisonReport> {
    let sa = compute_hsl_stats(a, source_a)?;
    let sb = compute_hsl_stats(b, source_b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let comparisons = [
        ("hue_std", &sa.hue_std, &sb.hue_std),
        ("lightness_mean", &sa.lightness_mean, &sb.lightness_mean),
        ("saturation_mean", &sa.saturation_mean, &sb.saturation_mean),
    ]
    .into_iter()
    .map(|(name, x, y)| {
        let t = welch_t_test(x, y)?;
        Ok(StatComparison {
            statistic: name.to_string(),
            mean_a: mean(x),
            mean_b: mean(y),
            t: t.t,
            df: t.df,
            p: t.p,
        })
    })
    .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport {
        n_a: a.len(),
        n_b: b.len(),
        comparisons,
    })
}
