use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ClipStore, SubtitleRecord, Vocabulary};
use crate::error::Result;
use crate::model::{TextBatch, VideoFeatureBatch};

/// An id-mapped training pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub src: Vec<usize>,
    /// Target ids without BOS/EOS.
    pub tgt: Vec<usize>,
    pub ambiguous: bool,
    /// Index into the clip store.
    pub clip: usize,
}

impl Example {
    /// Padded length this example occupies in a batch row.
    pub fn row_len(&self) -> usize {
        self.src.len().max(self.tgt.len() + 1)
    }
}

/// Map records through the vocabularies. Clip `i` belongs to record `i`.
pub fn examples_from_records(
    records: &[SubtitleRecord],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    flags: &[bool],
) -> Vec<Example> {
    records
        .iter()
        .zip(flags)
        .enumerate()
        .map(|(i, (r, &f))| Example {
            src: src_vocab.encode(&r.source_text),
            tgt: tgt_vocab.encode(&r.target_text),
            ambiguous: f,
            clip: i,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub text: TextBatch,
    /// Example indices, one per row.
    pub examples: Vec<usize>,
    pub clips: Vec<usize>,
}

impl Batch {
    pub fn features(&self, store: &ClipStore) -> Result<VideoFeatureBatch> {
        let clips: Vec<&[f64]> = self.clips.iter().map(|&c| store.clip(c)).collect();
        VideoFeatureBatch::stack(&clips, store.frames, store.dim)
    }

    pub fn rows(&self) -> usize {
        self.examples.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batches {
    pub batches: Vec<Batch>,
    /// Examples longer than the token cap (or with an empty source).
    pub skipped: Vec<usize>,
}

/// Sort by padded length (stable on index), fill batches greedily so that
/// rows x longest row stays within `tokens_per_batch`, then shuffle batch
/// order with `seed`.
pub fn make_batches(examples: &[Example], tokens_per_batch: usize, seed: u64) -> Result<Batches> {
    let mut out = Batches::default();
    let mut order: Vec<usize> = Vec::with_capacity(examples.len());
    for (i, e) in examples.iter().enumerate() {
        if e.src.is_empty() || e.row_len() > tokens_per_batch {
            out.skipped.push(i);
        } else {
            order.push(i);
        }
    }
    order.sort_by_key(|&i| (examples[i].row_len(), i));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut longest = 0;
    for i in order {
        let len = examples[i].row_len();
        let widest = longest.max(len);
        if !current.is_empty() && (current.len() + 1) * widest > tokens_per_batch {
            groups.push(std::mem::take(&mut current));
            longest = 0;
        }
        longest = longest.max(len);
        current.push(i);
    }
    if !current.is_empty() {
        groups.push(current);
    }
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for g in groups {
        out.batches.push(build_batch(examples, &g)?);
    }
    Ok(out)
}

pub(crate) fn build_batch(examples: &[Example], idx: &[usize]) -> Result<Batch> {
    let src: Vec<Vec<usize>> = idx.iter().map(|&i| examples[i].src.clone()).collect();
    let tgt: Vec<Vec<usize>> = idx.iter().map(|&i| examples[i].tgt.clone()).collect();
    let flags: Vec<bool> = idx.iter().map(|&i| examples[i].ambiguous).collect();
    Ok(Batch {
        text: TextBatch::from_pairs(&src, &tgt, &flags)?,
        examples: idx.to_vec(),
        clips: idx.iter().map(|&i| examples[i].clip).collect(),
    })
}

/// Batch visiting order for one epoch.
pub fn epoch_order(batches: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..batches).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    order.shuffle(&mut rng);
    order
}
