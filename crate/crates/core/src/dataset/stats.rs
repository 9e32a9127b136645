//! Per-image HSL statistics and the two-sample Welch test used to compare
//! corpora.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::color::{rgb_to_hsl, ColorSpace};
use crate::error::{Error, Result};
use crate::imaging::load_rgb;

use super::DatasetRecord;

/// Mean direction of angles given in degrees, in `[0, 360)`.
pub fn circular_mean_deg(angles: &[f64]) -> f64 {
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| {
        let r = a.to_radians();
        (s + r.sin(), c + r.cos())
    });
    s.atan2(c).to_degrees().rem_euclid(360.0)
}

/// Angular deviation `sqrt(2 (1 - R))` in degrees, where `R` is the mean
/// resultant length. Bounded by `sqrt(2)` radians (about 81°), reached when
/// the angles cancel out.
pub fn circular_std_deg(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let n = angles.len() as f64;
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| {
        let r = a.to_radians();
        (s + r.sin(), c + r.cos())
    });
    let r = ((s / n).powi(2) + (c / n).powi(2)).sqrt().min(1.0);
    (2.0 * (1.0 - r)).sqrt().to_degrees()
}

/// Per-image statistics over a corpus, one entry per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HslStats {
    /// Circular hue dispersion, degrees.
    pub hue_std: Vec<f64>,
    pub lightness_mean: Vec<f64>,
    pub saturation_mean: Vec<f64>,
}

impl HslStats {
    pub fn len(&self) -> usize {
        self.hue_std.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hue_std.is_empty()
    }
}

/// Supplies the pixels of a record's image.
pub trait PixelSource {
    fn pixels(&self, image_ref: &str) -> Result<Vec<[f64; 3]>>;
}

/// Resolves image references as paths relative to a root directory.
#[derive(Debug, Clone)]
pub struct ImageDir {
    pub root: PathBuf,
}

impl PixelSource for ImageDir {
    fn pixels(&self, image_ref: &str) -> Result<Vec<[f64; 3]>> {
        Ok(load_rgb(&self.root.join(image_ref))?.pixels)
    }
}

pub enum StatsSource<'a> {
    Palette,
    Image(&'a dyn PixelSource),
}

fn summarize(rgb: impl Iterator<Item = [f64; 3]>) -> (f64, f64, f64) {
    let mut hues = Vec::new();
    let mut l_sum = 0.0;
    let mut s_sum = 0.0;
    for p in rgb {
        let [h, s, l] = rgb_to_hsl(p);
        hues.push(h);
        s_sum += s;
        l_sum += l;
    }
    let n = hues.len() as f64;
    (circular_std_deg(&hues), l_sum / n, s_sum / n)
}

/// Hue dispersion, mean lightness and mean saturation for each record,
/// taken over the palette colors or over all image pixels.
pub fn compute_hsl_stats(records: &[DatasetRecord], source: &StatsSource<'_>) -> Result<HslStats> {
    if records.is_empty() {
        return Err(Error::validation("corpus is empty"));
    }
    let mut stats = HslStats {
        hue_std: Vec::with_capacity(records.len()),
        lightness_mean: Vec::with_capacity(records.len()),
        saturation_mean: Vec::with_capacity(records.len()),
    };
    for rec in records {
        let (h, l, s) = match source {
            StatsSource::Palette => summarize(
                rec.palette
                    .colors()
                    .iter()
                    .map(|c| c.to(ColorSpace::Rgb).channels()),
            ),
            StatsSource::Image(px) => {
                let pixels = px.pixels(&rec.image)?;
                if pixels.is_empty() {
                    return Err(Error::validation(format!("image {:?} has no pixels", rec.image)));
                }
                summarize(pixels.into_iter())
            }
        };
        stats.hue_std.push(h);
        stats.lightness_mean.push(l);
        stats.saturation_mean.push(s);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::validation(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::validation("samples must be finite"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, df, p: 1.0 }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                df,
                p: 0.0,
            }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    if t == 0.0 {
        return Ok(TTest { t, df, p: 1.0 });
    }
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::validation(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}
