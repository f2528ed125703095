//! Memorize a 32-pair toy corpus, then decode it back with beam size 1.
//!
//! cargo run --release --example overfit_toy_corpus

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgmt::corpus::ClipStore;
use vgmt::evaluation::{beam_decode, DecodeConfig};
use vgmt::model::{init_params, ModelConfig};
use vgmt::training::{train, Example, Schedule, TrainConfig};

fn main() -> vgmt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (src_vocab, tgt_vocab) = (24, 24);
    let mut clips = ClipStore::new(4, 8);
    let examples: Vec<Example> = (0..32)
        .map(|i| {
            let src = (0..rng.random_range(3..7)).map(|_| rng.random_range(4..src_vocab)).collect();
            let tgt = (0..rng.random_range(2..6)).map(|_| rng.random_range(4..tgt_vocab)).collect();
            let clip: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
            clips.push(&clip).unwrap();
            Example { src, tgt, ambiguous: false, clip: i }
        })
        .collect();

    let mut config = ModelConfig::tiny(32, 4, 8, src_vocab, tgt_vocab);
    config.label_smoothing = 0.0;
    config.frame_loss_weight = 0.0;
    let tc = TrainConfig {
        max_steps: 500,
        patience: 500,
        schedule: Schedule { warmup_steps: 50, lr_start: 1e-4, lr_peak: 5e-3 },
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let out = train(&config, init_params(&config, 0)?, &examples, &examples, &clips, &tc, &mut ())?;
    let last = out.metrics.last().unwrap();
    println!("steps {} stop {:?} last train loss {:.5} best val {:.5} in {:.1?}", out.steps, out.stop, last.l_o, out.best_val_loss, start.elapsed());

    let sources: Vec<Vec<usize>> = examples.iter().map(|e| e.src.clone()).collect();
    let idx: Vec<usize> = (0..32).collect();
    let dc = DecodeConfig { beam_size: 1, ..Default::default() };
    let hyps = beam_decode(&out.params, &config, &sources, &clips, &idx, &dc)?;
    let exact = hyps.iter().zip(&examples).filter(|(h, e)| h.tokens == e.tgt).count();
    println!("exact reproductions: {exact}/32");
    Ok(())
}
