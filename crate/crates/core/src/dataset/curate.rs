use crate::color::{Color, Palette, PALETTE_LEN};
use crate::error::{Error, Result};

use super::kmeans::{candidate_distance, CandidateColors};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurationConfig {
    /// Candidates closer than this ΔE76 are merged.
    pub dedup_threshold: f64,
    /// Weight of distinctiveness against proportion in the automatic pick.
    pub beta: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            dedup_threshold: 10.0,
            beta: 0.01,
        }
    }
}

/// A candidate that survived deduplication, with the proportion of any
/// candidates merged into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Survivor {
    pub color: Color,
    pub proportion: f64,
}

/// Merges every candidate that lies within `threshold` of an earlier
/// (higher-proportion) survivor into that survivor. Survivor order follows
/// candidate order, and survivors are pairwise at least `threshold` apart.
pub fn dedup_candidates(candidates: &CandidateColors, threshold: f64) -> Vec<Survivor> {
    let mut survivors: Vec<Survivor> = Vec::new();
    for (color, proportion) in candidates.colors().iter().zip(candidates.proportions()) {
        match survivors
            .iter_mut()
            .find(|s| candidate_distance(&s.color, color) < threshold)
        {
            Some(s) => s.proportion += proportion,
            None => survivors.push(Survivor {
                color: *color,
                proportion: *proportion,
            }),
        }
    }
    survivors
}

/// Score of adding `next` after `selected`: its proportion plus `beta`
/// times its mean ΔE76 to the colors already selected (zero when none are).
pub(crate) fn pick_score(survivors: &[Survivor], selected: &[usize], next: usize, beta: f64) -> f64 {
    let spread = if selected.is_empty() {
        0.0
    } else {
        selected
            .iter()
            .map(|&s| candidate_distance(&survivors[s].color, &survivors[next].color))
            .sum::<f64>()
            / selected.len() as f64
    };
    survivors[next].proportion + beta * spread
}

/// Greedy ordered pick of five survivors. Ties go to the lower index.
pub fn greedy_pick(survivors: &[Survivor], beta: f64) -> Result<[usize; PALETTE_LEN]> {
    if survivors.len() < PALETTE_LEN {
        return Err(Error::validation(format!(
            "need {PALETTE_LEN} survivors, have {}",
            survivors.len()
        )));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(PALETTE_LEN);
    while selected.len() < PALETTE_LEN {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..survivors.len()).filter(|i| !selected.contains(i)) {
            let score = pick_score(survivors, &selected, i, beta);
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        selected.push(best.expect("enough survivors").0);
    }
    Ok(selected.try_into().expect("five picks"))
}

/// Dedups the candidates, then either takes the designer's five picks (in
/// rank order) from the deduplicated list or proposes five greedily.
pub fn curate_palette(
    candidates: &CandidateColors,
    config: &CurationConfig,
    manual_pick: Option<&[usize]>,
) -> Result<Palette> {
    let survivors = dedup_candidates(candidates, config.dedup_threshold);
    if survivors.len() < PALETTE_LEN {
        return Err(Error::CurationUnderflow {
            survivors: survivors.len(),
            threshold: config.dedup_threshold,
        });
    }
    let picks: Vec<usize> = match manual_pick {
        Some(p) => {
            if p.len() != PALETTE_LEN {
                return Err(Error::validation(format!(
                    "manual pick needs {PALETTE_LEN} indices, got {}",
                    p.len()
                )));
            }
            for (n, &i) in p.iter().enumerate() {
                if i >= survivors.len() {
                    return Err(Error::validation(format!(
                        "pick index {i} out of range for {} survivors",
                        survivors.len()
                    )));
                }
                if p[..n].contains(&i) {
                    return Err(Error::validation(format!("pick index {i} repeated")));
                }
            }
            p.to_vec()
        }
        None => greedy_pick(&survivors, config.beta)?.to_vec(),
    };
    Palette::new(picks.iter().map(|&i| survivors[i].color).collect())
}
