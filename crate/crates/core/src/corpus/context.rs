use std::collections::BTreeMap;

use super::record::SubtitleRecord;

pub const SEPARATOR: &str = "<sep>";

/// Replace each source with the two subtitles before it, itself and the two
/// after it within the same video, joined by [`SEPARATOR`]. Videos are
/// ordered by `start_ms` (stable on ties); output keeps input order.
pub fn build_context_corpus(records: &[SubtitleRecord]) -> Vec<SubtitleRecord> {
    let mut videos: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        videos.entry(r.video_id.as_str()).or_default().push(i);
    }
    let mut out = records.to_vec();
    let sep = format!(" {SEPARATOR} ");
    for order in videos.values_mut() {
        order.sort_by_key(|&i| records[i].start_ms);
        for (pos, &i) in order.iter().enumerate() {
            let lo = pos.saturating_sub(2);
            let hi = (pos + 3).min(order.len());
            out[i].source_text = order[lo..hi]
                .iter()
                .map(|&j| records[j].source_text.trim())
                .collect::<Vec<_>>()
                .join(&sep);
        }
    }
    out
}
