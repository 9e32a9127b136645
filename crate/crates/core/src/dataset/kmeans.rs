use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::{lab_distance, lab_to_rgb_unclamped, rgb_to_lab, Color, ColorSpace};
use crate::error::{Error, Result};
use crate::imaging::RgbGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 10,
            seed: 0,
            restarts: 8,
            max_iters: 100,
        }
    }
}

/// Cluster centers of an image with their pixel shares, sorted by share.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateColors {
    colors: Vec<Color>,
    proportions: Vec<f64>,
}

impl CandidateColors {
    pub fn new(colors: Vec<Color>, proportions: Vec<f64>) -> Result<Self> {
        if colors.is_empty() || colors.len() != proportions.len() {
            return Err(Error::validation(format!(
                "{} colors with {} proportions",
                colors.len(),
                proportions.len()
            )));
        }
        if proportions.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::validation("proportions must be non-negative"));
        }
        let total: f64 = proportions.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!("proportions sum to {total}, not 1")));
        }
        if proportions.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::validation("proportions must be sorted descending"));
        }
        Ok(CandidateColors { colors, proportions })
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }
}

struct WeightedPoint {
    lab: [f64; 3],
    weight: f64,
}

fn sq_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Collapses identical pixels into weighted Lab points in first-seen order.
fn weighted_points(image: &RgbGrid) -> Vec<WeightedPoint> {
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut points: Vec<WeightedPoint> = Vec::new();
    for p in &image.pixels {
        let key = p.map(f64::to_bits);
        match index.get(&key) {
            Some(&i) => points[i].weight += 1.0,
            None => {
                index.insert(key, points.len());
                points.push(WeightedPoint {
                    lab: rgb_to_lab(*p),
                    weight: 1.0,
                });
            }
        }
    }
    points
}

fn sample_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..weights.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn plus_plus_seed(points: &[WeightedPoint], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let weights: Vec<f64> = points.iter().map(|p| p.weight).collect();
    let mut centers = vec![points[sample_weighted(rng, &weights)].lab];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p.lab, centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = points
            .iter()
            .zip(&nearest)
            .map(|(p, d)| p.weight * d)
            .collect();
        let next = points[sample_weighted(rng, &scores)].lab;
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p.lab, next));
        }
        centers.push(next);
    }
    centers
}

fn nearest_center(lab: [f64; 3], centers: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(lab, *c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Weighted Lloyd iterations. Returns centers, assignment and inertia.
fn lloyd(
    points: &[WeightedPoint],
    mut centers: Vec<[f64; 3]>,
    max_iters: usize,
) -> (Vec<[f64; 3]>, Vec<usize>, f64) {
    let k = centers.len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..max_iters {
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(points) {
            let (c, _) = nearest_center(p.lab, &centers);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        let mut sums = vec![[0.0; 3]; k];
        let mut mass = vec![0.0; k];
        for (a, p) in assign.iter().zip(points) {
            for i in 0..3 {
                sums[*a][i] += p.weight * p.lab[i];
            }
            mass[*a] += p.weight;
        }
        for c in 0..k {
            if mass[c] > 0.0 {
                centers[c] = sums[c].map(|s| s / mass[c]);
            } else {
                // Re-seed an empty cluster at the point contributing the most error.
                let far = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, p.weight * sq_dist(p.lab, centers[assign[i]])))
                    .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
                    .0;
                centers[c] = points[far].lab;
                assign[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = assign
        .iter()
        .zip(points)
        .map(|(a, p)| p.weight * sq_dist(p.lab, centers[*a]))
        .sum();
    (centers, assign, inertia)
}

fn lab_center_to_color(lab: [f64; 3]) -> Color {
    Color::clamped(ColorSpace::Rgb, lab_to_rgb_unclamped(lab))
}

/// Dominant colors by k-means++ seeded k-means in Lab space. Centers come
/// back as RGB colors with their membership fractions, sorted descending.
/// When the image has fewer than `k` distinct colors the distinct colors
/// are returned and the list is padded with zero-share copies.
pub fn extract_dominant_colors(image: &RgbGrid, config: &KMeansConfig) -> Result<CandidateColors> {
    if image.pixels.is_empty() {
        return Err(Error::validation("image has no pixels"));
    }
    if config.k == 0 {
        return Err(Error::validation("k must be positive"));
    }
    let points = weighted_points(image);
    let total: f64 = points.iter().map(|p| p.weight).sum();

    let mut clusters: Vec<([f64; 3], f64)> = if points.len() <= config.k {
        points.iter().map(|p| (p.lab, p.weight)).collect()
    } else {
        let mut best: Option<(Vec<[f64; 3]>, Vec<usize>, f64)> = None;
        for restart in 0..config.restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart as u64));
            let seeds = plus_plus_seed(&points, config.k, &mut rng);
            let run = lloyd(&points, seeds, config.max_iters);
            if best.as_ref().map_or(true, |b| run.2 < b.2) {
                best = Some(run);
            }
        }
        let (centers, assign, _) = best.expect("at least one restart");
        let mut mass = vec![0.0; centers.len()];
        for (a, p) in assign.iter().zip(&points) {
            mass[*a] += p.weight;
        }
        centers.into_iter().zip(mass).collect()
    };

    clusters.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.partial_cmp(&b.0).unwrap())
    });
    let distinct = clusters.len();
    for i in 0..config.k.saturating_sub(distinct) {
        let (lab, _) = clusters[i % distinct];
        clusters.push((lab, 0.0));
    }

    let colors = clusters.iter().map(|(lab, _)| lab_center_to_color(*lab)).collect();
    let proportions = clusters.iter().map(|(_, w)| w / total).collect();
    CandidateColors::new(colors, proportions)
}

/// ΔE76 between two candidate colors.
pub(crate) fn candidate_distance(a: &Color, b: &Color) -> f64 {
    lab_distance(a.to_lab(), b.to_lab())
}
