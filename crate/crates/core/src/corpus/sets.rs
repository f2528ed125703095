use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::record::SubtitleRecord;

/// NFC-normalized, whitespace-trimmed text used to decide whether two
/// subtitles are "the same".
pub fn normalize_text(s: &str) -> String {
    s.trim().nfc().collect()
}

/// Records sharing one source subtitle but carrying at least two distinct
/// targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationSet {
    pub source_text: String,
    /// Every record with this source, in corpus order.
    pub record_ids: Vec<String>,
    /// Distinct targets in order of first appearance.
    pub targets: Vec<String>,
    /// Corpus indices of `record_ids`.
    #[serde(skip)]
    pub members: Vec<usize>,
    /// Corpus index of the first record carrying each target.
    #[serde(skip)]
    pub representatives: Vec<usize>,
}

/// Group records by normalized source and keep groups with two or more
/// distinct normalized targets. Sets come out in order of first appearance.
pub fn collect_translation_sets(records: &[SubtitleRecord]) -> Vec<TranslationSet> {
    let mut groups: IndexMap<String, TranslationSet> = IndexMap::new();
    for (i, r) in records.iter().enumerate() {
        let source = normalize_text(&r.source_text);
        let target = normalize_text(&r.target_text);
        let set = groups.entry(source.clone()).or_insert_with(|| TranslationSet {
            source_text: source,
            record_ids: Vec::new(),
            targets: Vec::new(),
            members: Vec::new(),
            representatives: Vec::new(),
        });
        set.record_ids.push(r.id.clone());
        set.members.push(i);
        if !set.targets.contains(&target) {
            set.targets.push(target);
            set.representatives.push(i);
        }
    }
    groups.into_values().filter(|s| s.targets.len() >= 2).collect()
}

/// `true` for records whose source belongs to one of `sets`.
pub fn flag_ambiguous_samples(records: &[SubtitleRecord], sets: &[TranslationSet]) -> Vec<bool> {
    let sources: std::collections::HashSet<&str> = sets.iter().map(|s| s.source_text.as_str()).collect();
    records
        .iter()
        .map(|r| sources.contains(normalize_text(&r.source_text).as_str()))
        .collect()
}
