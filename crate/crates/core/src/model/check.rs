use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batch::{TextBatch, VideoFeatureBatch};
use super::config::ModelConfig;
use super::params::init_params;
use super::safa::forward_full;
use crate::error::Result;
use crate::numerics::{check_gradients, GradCheckReport};

/// Central-difference check of the full training loss (label smoothing,
/// frame-attention KL and ambiguity weighting all on) for a random tiny
/// model with two sentence pairs, one of them ambiguous.
pub fn gradient_check(seed: u64, d_model: usize, frames: usize) -> Result<GradCheckReport> {
    let dim = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = ModelConfig::tiny(d_model, frames, dim, 9, 8);
    config.label_smoothing = 0.1;
    config.frame_loss_weight = 0.5;
    config.ambiguity_weight = 2.0;
    let mut params = init_params(&config, seed)?;
    let src = vec![vec![4, 5, 6], vec![7, 8]];
    let tgt = vec![vec![4, 5], vec![6, 7, 4]];
    let batch = TextBatch::from_pairs(&src, &tgt, &[true, false])?;
    let data = (0..2 * frames * dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let feats = VideoFeatureBatch::new(2, frames, dim, data)?;
    check_gradients(
        |g, p| Ok(forward_full(g, p, &config, &batch, &feats)?.total),
        &mut params,
        1e-4,
    )
}
