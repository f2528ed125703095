use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{quantize, ClipStore, SubtitleRecord};
use crate::error::{Error, Result};

pub const SYNTHETIC_SOURCE: &str = "what is that";
pub const SYNTHETIC_TARGETS: [&str; 2] = ["class a", "class b"];
pub const BUMP: f64 = 2.0;

/// Where the class signal sits inside each clip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpPlacement {
    /// Frames `[M/3, ceil(2M/3))`.
    Central,
    /// The first and last `max(1, M/6)` frames.
    Edge,
}

impl BumpPlacement {
    pub fn frames(self, m: usize) -> Vec<usize> {
        match self {
            BumpPlacement::Central => (m / 3..(2 * m).div_ceil(3)).collect(),
            BumpPlacement::Edge => {
                let k = (m / 6).max(1).min(m);
                let mut f: Vec<usize> = (0..k).chain(m - k..m).collect();
                f.dedup();
                f
            }
        }
    }
}

/// One fixed source sentence whose translation is decided by the video
/// alone.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub records: Vec<SubtitleRecord>,
    pub clips: ClipStore,
    /// 0 for "class a", 1 for "class b".
    pub labels: Vec<usize>,
}

impl SyntheticDataset {
    /// Consecutive slices of the given sizes.
    pub fn split(&self, sizes: &[usize]) -> Result<Vec<SyntheticDataset>> {
        if sizes.iter().sum::<usize>() > self.records.len() {
            return Err(Error::Input("split sizes exceed dataset".into()));
        }
        let mut start = 0;
        let mut out = Vec::new();
        for &n in sizes {
            let mut clips = ClipStore::new(self.clips.frames, self.clips.dim);
            for i in start..start + n {
                clips.push(self.clips.clip(i))?;
            }
            out.push(SyntheticDataset {
                records: self.records[start..start + n].to_vec(),
                clips,
                labels: self.labels[start..start + n].to_vec(),
            });
            start += n;
        }
        Ok(out)
    }
}

/// `n / 2` samples per class in shuffled order. Features are unit normal
/// noise, plus [`BUMP`] on channel `label` for the frames chosen by
/// `placement`, rounded to `f32` precision.
pub fn generate_synthetic_dataset(
    n: usize,
    frames: usize,
    dim: usize,
    seed: u64,
    placement: BumpPlacement,
) -> Result<SyntheticDataset> {
    if !n.is_multiple_of(2) {
        return Err(Error::Input(format!("synthetic dataset size must be even, got {n}")));
    }
    if frames == 0 || dim < 2 {
        return Err(Error::Input("synthetic clips need at least 1 frame and 2 channels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let bumped = placement.frames(frames);
    let mut clips = ClipStore::new(frames, dim);
    let mut records = Vec::with_capacity(n);
    for (i, &label) in labels.iter().enumerate() {
        let mut clip: Vec<f64> = (0..frames * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for &f in &bumped {
            clip[f * dim + label] += BUMP;
        }
        clip.iter_mut().for_each(|v| *v = quantize(*v));
        clips.push(&clip)?;
        let id = format!("syn{i:05}");
        records.push(SubtitleRecord {
            id: id.clone(),
            source_text: SYNTHETIC_SOURCE.into(),
            target_text: SYNTHETIC_TARGETS[label].into(),
            start_ms: 0,
            end_ms: 2000,
            video_id: id,
            split_hint: None,
        });
    }
    Ok(SyntheticDataset { records, clips, labels })
}
