//! Video-only disambiguation: every sample has the same source sentence and
//! the correct target ("class a" / "class b") is only visible in the clip.
//! Trains the ablation variants and prints the comparison table.
//!
//! cargo run --release --example synthetic_disambiguation [seed]

use vgmt::evaluation::{results_report, run_ablation_suite, AblationData, DecodeConfig, SyntheticTask, Variant};
use vgmt::training::{BumpPlacement, Schedule, TrainConfig};

fn main() -> vgmt::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let task = SyntheticTask::generate([2000, 200, 200], 12, 16, seed, BumpPlacement::Central)?;

    let mut config = task.model_config(16);
    config.dropout = 0.1;
    let tc = TrainConfig {
        tokens_per_batch: 256,
        max_steps: 1500,
        patience: 5,
        seed,
        schedule: Schedule { warmup_steps: 200, lr_start: 1e-5, lr_peak: 5e-3 },
        ..Default::default()
    };
    let data = AblationData {
        train: &task.train,
        valid: &task.valid,
        test: &task.test,
        test_references: &task.test_references,
        clips: &task.clips,
        tgt_vocab: &task.tgt_vocab,
    };
    let start = std::time::Instant::now();
    let rows = run_ablation_suite(&data, &config, &tc, &DecodeConfig::default(), &Variant::ALL, seed)?;
    print!("{}", results_report(&rows));
    for r in &rows {
        println!("{}: {} steps, best validation loss {:.4}", r.variant.name(), r.steps, r.best_val_loss);
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
