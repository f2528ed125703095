use crate::error::{Error, Result};

/// Reserved vocabulary ids shared by both sides.
pub mod special {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const BOS: usize = 2;
    pub const EOS: usize = 3;
    pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];
}

/// Padded source/target id matrices for one minibatch.
///
/// Masks are `true` on real tokens. The target is stored twice: `tgt_in`
/// starts with BOS (decoder input), `tgt_out` ends with EOS (prediction
/// target); both have the same length per row.
#[derive(Clone, Debug, PartialEq)]
pub struct TextBatch {
    pub batch_size: usize,
    pub src_len: usize,
    pub tgt_len: usize,
    pub src_ids: Vec<usize>,
    pub src_mask: Vec<bool>,
    pub tgt_in: Vec<usize>,
    pub tgt_out: Vec<usize>,
    pub tgt_mask: Vec<bool>,
    /// Possibly-ambiguous flag per sample.
    pub ambiguous: Vec<bool>,
}

impl TextBatch {
    /// Build a batch from unpadded id sequences. Targets must not contain
    /// BOS/EOS; they are added here.
    pub fn from_pairs(src: &[Vec<usize>], tgt: &[Vec<usize>], ambiguous: &[bool]) -> Result<Self> {
        let b = src.len();
        if tgt.len() != b || ambiguous.len() != b {
            return Err(Error::Input(format!(
                "batch parts disagree: {} sources, {} targets, {} flags",
                b,
                tgt.len(),
                ambiguous.len()
            )));
        }
        if b == 0 {
            return Err(Error::Input("empty batch".into()));
        }
        if let Some(i) = src.iter().position(Vec::is_empty) {
            return Err(Error::Input(format!("sample {i} has an empty source")));
        }
        let s = src.iter().map(Vec::len).max().unwrap_or(0);
        let t = tgt.iter().map(|v| v.len() + 1).max().unwrap_or(1);
        let mut batch = TextBatch {
            batch_size: b,
            src_len: s,
            tgt_len: t,
            src_ids: vec![special::PAD; b * s],
            src_mask: vec![false; b * s],
            tgt_in: vec![special::PAD; b * t],
            tgt_out: vec![special::PAD; b * t],
            tgt_mask: vec![false; b * t],
            ambiguous: ambiguous.to_vec(),
        };
        for (i, (sv, tv)) in src.iter().zip(tgt).enumerate() {
            for (j, &id) in sv.iter().enumerate() {
                batch.src_ids[i * s + j] = id;
                batch.src_mask[i * s + j] = true;
            }
            batch.tgt_in[i * t] = special::BOS;
            for (j, &id) in tv.iter().enumerate() {
                batch.tgt_in[i * t + j + 1] = id;
                batch.tgt_out[i * t + j] = id;
            }
            batch.tgt_out[i * t + tv.len()] = special::EOS;
            for j in 0..=tv.len() {
                batch.tgt_mask[i * t + j] = true;
            }
        }
        Ok(batch)
    }

    /// Number of real target tokens (including EOS) per sample.
    pub fn target_tokens(&self, sample: usize) -> usize {
        self.tgt_mask[sample * self.tgt_len..(sample + 1) * self.tgt_len]
            .iter()
            .filter(|&&m| m)
            .count()
    }

    pub fn source_tokens(&self, sample: usize) -> usize {
        self.src_mask[sample * self.src_len..(sample + 1) * self.src_len]
            .iter()
            .filter(|&&m| m)
            .count()
    }
}

/// `B x M x d_v` per-frame video features.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoFeatureBatch {
    pub batch_size: usize,
    pub frames: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl VideoFeatureBatch {
    pub fn new(batch_size: usize, frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch_size * frames * dim {
            return Err(Error::shape(
                "video_features",
                format!("{batch_size}x{frames}x{dim} needs {} values, got {}", batch_size * frames * dim, data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("video features contain non-finite values".into()));
        }
        Ok(VideoFeatureBatch {
            batch_size,
            frames,
            dim,
            data,
        })
    }

    pub fn zeros(batch_size: usize, frames: usize, dim: usize) -> Self {
        VideoFeatureBatch {
            batch_size,
            frames,
            dim,
            data: vec![0.0; batch_size * frames * dim],
        }
    }

    /// Stack per-clip `M x d_v` matrices.
    pub fn stack(clips: &[&[f64]], frames: usize, dim: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(clips.len() * frames * dim);
        for (i, c) in clips.iter().enumerate() {
            if c.len() != frames * dim {
                return Err(Error::shape(
                    "video_features",
                    format!("clip {i} has {} values, expected {frames}x{dim}", c.len()),
                ));
            }
            data.extend_from_slice(c);
        }
        Self::new(clips.len(), frames, dim, data)
    }

    /// Repeat each clip `times` times in place (clip-major).
    pub fn repeat_each(&self, times: usize) -> Self {
        let clip = self.frames * self.dim;
        let mut data = Vec::with_capacity(self.data.len() * times);
        for c in self.data.chunks(clip) {
            for _ in 0..times {
                data.extend_from_slice(c);
            }
        }
        VideoFeatureBatch {
            batch_size: self.batch_size * times,
            frames: self.frames,
            dim: self.dim,
            data,
        }
    }

    pub fn clip(&self, i: usize) -> &[f64] {
        let n = self.frames * self.dim;
        &self.data[i * n..(i + 1) * n]
    }
}
