use super::attention::attention_dumps;
use crate::corpus::{build_vocabulary, collect_translation_sets, flag_ambiguous_samples, ClipStore, Side, Vocabulary};
use crate::error::Result;
use crate::model::{ModelConfig, TextBatch, VideoFeatureBatch};
use crate::numerics::ParamSet;
use crate::training::{examples_from_records, generate_synthetic_dataset, BumpPlacement, Example, SyntheticDataset};

/// The synthetic disambiguation task mapped to examples over one clip store
/// (train clips first, then validation, then test).
pub struct SyntheticTask {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
    pub test_references: Vec<String>,
    pub clips: ClipStore,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub placement: BumpPlacement,
}

impl SyntheticTask {
    /// Generate `train + valid + test` samples with `seed` and build
    /// vocabularies (min count 3) from the training part.
    pub fn generate(
        sizes: [usize; 3],
        frames: usize,
        dim: usize,
        seed: u64,
        placement: BumpPlacement,
    ) -> Result<Self> {
        let data = generate_synthetic_dataset(sizes.iter().sum(), frames, dim, seed, placement)?;
        let parts = data.split(&sizes)?;
        let src_vocab = build_vocabulary(&parts[0].records, Side::Source, 3);
        let tgt_vocab = build_vocabulary(&parts[0].records, Side::Target, 3);
        let mut clips = ClipStore::new(frames, dim);
        let mut split = |d: &SyntheticDataset| -> Result<Vec<Example>> {
            let flags = flag_ambiguous_samples(&d.records, &collect_translation_sets(&d.records));
            let mut xs = examples_from_records(&d.records, &src_vocab, &tgt_vocab, &flags);
            for (i, x) in xs.iter_mut().enumerate() {
                x.clip = clips.push(d.clips.clip(i))?;
            }
            Ok(xs)
        };
        let train = split(&parts[0])?;
        let valid = split(&parts[1])?;
        let test = split(&parts[2])?;
        Ok(SyntheticTask {
            train,
            valid,
            test,
            test_references: parts[2].records.iter().map(|r| r.target_text.clone()).collect(),
            clips,
            src_vocab,
            tgt_vocab,
            placement,
        })
    }

    /// A one-layer model sized for this task.
    pub fn model_config(&self, d_model: usize) -> ModelConfig {
        ModelConfig::tiny(d_model, self.clips.frames, self.clips.dim, self.src_vocab.len(), self.tgt_vocab.len())
    }

    /// Mean selective-attention mass that test sentences put on the frames
    /// carrying the class signal.
    pub fn signal_attention_mass(&self, params: &ParamSet, config: &ModelConfig) -> Result<f64> {
        let n = self.test.len();
        let src: Vec<Vec<usize>> = self.test.iter().map(|e| e.src.clone()).collect();
        let tgt: Vec<Vec<usize>> = self.test.iter().map(|e| e.tgt.clone()).collect();
        let flags: Vec<bool> = self.test.iter().map(|e| e.ambiguous).collect();
        let batch = TextBatch::from_pairs(&src, &tgt, &flags)?;
        let clips: Vec<&[f64]> = self.test.iter().map(|e| self.clips.clip(e.clip)).collect();
        let feats = VideoFeatureBatch::stack(&clips, self.clips.frames, self.clips.dim)?;
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let tokens: Vec<Vec<String>> = src
            .iter()
            .map(|s| s.iter().map(|&t| self.src_vocab.token(t).unwrap_or_default().to_string()).collect())
            .collect();
        let dumps = attention_dumps(params, config, &batch, &feats, &ids, &tokens)?;
        let signal = self.placement.frames(self.clips.frames);
        let total: f64 = dumps
            .iter()
            .map(|d| signal.iter().map(|&f| d.frame_weights[f]).sum::<f64>())
            .sum();
        Ok(total / n as f64)
    }
}
