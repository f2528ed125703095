use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sets::TranslationSet;
use super::similarity::Similarity;
use crate::error::{Error, Result};

/// Thresholds for picking two clearly different targets out of a
/// translation set.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguitySelectionConfig {
    /// Upper bound on the similarity of the chosen target pair.
    pub target_threshold: f64,
    /// Cross-lingual thresholds tried in order, strictly descending.
    pub schedule: Vec<f64>,
}

impl Default for AmbiguitySelectionConfig {
    fn default() -> Self {
        AmbiguitySelectionConfig {
            target_threshold: 0.3,
            schedule: vec![0.8, 0.7, 0.6, 0.5, 0.4, 0.3],
        }
    }
}

impl AmbiguitySelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64| (0.0..=1.0).contains(&v);
        if !in_range(self.target_threshold) || !self.schedule.iter().all(|&v| in_range(v)) {
            return Err(Error::Config("similarity thresholds must lie in [0, 1]".into()));
        }
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config("threshold schedule must be non-empty and strictly descending".into()));
        }
        Ok(())
    }
}

/// One source with the two targets selected from its translation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousTranslationSet {
    pub source_text: String,
    /// Ordered lexicographically.
    pub targets: [String; 2],
    /// Representative record of each target.
    pub record_ids: [String; 2],
    /// Cross-lingual threshold at which the pair qualified.
    pub level: f64,
    pub pair_similarity: f64,
}

/// Walk the threshold schedule for every set and emit at most one pair per
/// set: at the first level where the most different surviving pair is below
/// the target threshold.
pub fn select_ambiguous_sets(
    sets: &[TranslationSet],
    record_ids: &[String],
    sim: &dyn Similarity,
    config: &AmbiguitySelectionConfig,
) -> Result<Vec<AmbiguousTranslationSet>> {
    config.validate()?;
    Ok(sets
        .par_iter()
        .map(|s| select_one(s, record_ids, sim, config))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

fn select_one(
    set: &TranslationSet,
    record_ids: &[String],
    sim: &dyn Similarity,
    config: &AmbiguitySelectionConfig,
) -> Option<AmbiguousTranslationSet> {
    let cross: Vec<f64> = set.representatives.iter().map(|&r| sim.cross(r)).collect();
    for &level in &config.schedule {
        let kept: Vec<usize> = (0..set.targets.len()).filter(|&i| cross[i] > level).collect();
        let mut best: Option<(f64, (&str, &str), usize, usize)> = None;
        for (x, &i) in kept.iter().enumerate() {
            for &j in &kept[x + 1..] {
                let (a, b) = order(i, j, set);
                let s = sim.target(set.representatives[a], set.representatives[b]);
                let key = (set.targets[a].as_str(), set.targets[b].as_str());
                let better = match &best {
                    None => true,
                    Some((bs, bkey, _, _)) => s < *bs || (s == *bs && key < *bkey),
                };
                if better {
                    best = Some((s, key, a, b));
                }
            }
        }
        if let Some((s, _, a, b)) = best {
            if s < config.target_threshold {
                let ra = set.representatives[a];
                let rb = set.representatives[b];
                return Some(AmbiguousTranslationSet {
                    source_text: set.source_text.clone(),
                    targets: [set.targets[a].clone(), set.targets[b].clone()],
                    record_ids: [record_ids[ra].clone(), record_ids[rb].clone()],
                    level,
                    pair_similarity: s,
                });
            }
        }
    }
    None
}

fn order(i: usize, j: usize, set: &TranslationSet) -> (usize, usize) {
    if set.targets[i] <= set.targets[j] {
        (i, j)
    } else {
        (j, i)
    }
}
