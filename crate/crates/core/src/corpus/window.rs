use serde::{Deserialize, Serialize};

use super::record::SubtitleRecord;
use crate::error::{Error, Result};

pub const CLIP_MS: u64 = 10_000;
pub const FPS: u64 = 25;
pub const CLIP_FRAMES: u64 = CLIP_MS * FPS / 1000;

/// A fixed 10 s span of a video, 250 frames at 25 fps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipWindow {
    pub video_id: String,
    pub window_start_ms: u64,
    pub window_end_ms: u64,
    pub frame_count: u64,
}

/// Centre a 10 s window on the subtitle midpoint (rounded down to the
/// millisecond). A window crossing either end of the video is shifted inward,
/// never truncated.
pub fn compute_clip_window(record: &SubtitleRecord, video_duration_ms: Option<u64>) -> Result<ClipWindow> {
    if record.start_ms >= record.end_ms {
        return Err(Error::Input(format!(
            "record `{}`: start_ms {} is not before end_ms {}",
            record.id, record.start_ms, record.end_ms
        )));
    }
    if let Some(d) = video_duration_ms {
        if d < CLIP_MS {
            return Err(Error::UnusableClip {
                video_id: record.video_id.clone(),
                duration_ms: d,
            });
        }
    }
    let mid = (record.start_ms + record.end_ms) / 2;
    let mut start = mid.saturating_sub(CLIP_MS / 2);
    if let Some(d) = video_duration_ms {
        start = start.min(d - CLIP_MS);
    }
    Ok(ClipWindow {
        video_id: record.video_id.clone(),
        window_start_ms: start,
        window_end_ms: start + CLIP_MS,
        frame_count: CLIP_FRAMES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(start: u64, end: u64) -> SubtitleRecord {
        SubtitleRecord {
            id: "r".into(),
            source_text: "a".into(),
            target_text: "b".into(),
            start_ms: start,
            end_ms: end,
            video_id: "v".into(),
            split_hint: None,
        }
    }

    #[test]
    fn centred() {
        let w = compute_clip_window(&rec(12_000, 14_000), None).unwrap();
        assert_eq!((w.window_start_ms, w.window_end_ms, w.frame_count), (8_000, 18_000, 250));
    }

    #[test]
    fn shifted_at_start() {
        let w = compute_clip_window(&rec(1_000, 2_000), Some(60_000)).unwrap();
        assert_eq!((w.window_start_ms, w.window_end_ms), (0, 10_000));
    }

    #[test]
    fn shifted_at_end() {
        let w = compute_clip_window(&rec(58_000, 59_000), Some(60_000)).unwrap();
        assert_eq!((w.window_start_ms, w.window_end_ms), (50_000, 60_000));
        let w = compute_clip_window(&rec(1_000, 9_000), Some(10_000)).unwrap();
        assert_eq!((w.window_start_ms, w.window_end_ms), (0, 10_000));
    }

    #[test]
    fn short_video() {
        assert!(matches!(
            compute_clip_window(&rec(1_000, 2_000), Some(9_000)),
            Err(Error::UnusableClip { duration_ms: 9_000, .. })
        ));
    }
}
