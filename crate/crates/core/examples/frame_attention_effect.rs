//! How much selective attention lands on the frames that carry the signal,
//! with and without the Gaussian frame-attention loss.
//!
//! cargo run --release --example frame_attention_effect [temperature] [gamma]

use vgmt::evaluation::SyntheticTask;
use vgmt::model::{gaussian_target, init_params};
use vgmt::training::{train, BumpPlacement, Schedule, TrainConfig};

fn central_mass(task: &SyntheticTask, temperature: f64, gamma: f64, seed: u64) -> vgmt::Result<f64> {
    let mut config = task.model_config(16);
    config.dropout = 0.1;
    config.temperature = temperature;
    config.frame_loss_weight = gamma;
    let tc = TrainConfig {
        tokens_per_batch: 256,
        max_steps: 1500,
        seed,
        schedule: Schedule { warmup_steps: 200, lr_start: 1e-5, lr_peak: 5e-3 },
        ..Default::default()
    };
    let out = train(&config, init_params(&config, seed)?, &task.train, &task.valid, &task.clips, &tc, &mut ())?;
    task.signal_attention_mass(&out.params, &config)
}

fn main() -> vgmt::Result<()> {
    let mut args = std::env::args().skip(1);
    let temperature: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let gamma: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let target = gaussian_target(12, 3.0, 1.0, 1.0, temperature);
    let prior: f64 = BumpPlacement::Central.frames(12).iter().map(|&f| target[f]).sum();
    println!("target mass on central third at T={temperature}: {prior:.4}");
    let mut diffs = Vec::new();
    for seed in 0..3 {
        let task = SyntheticTask::generate([2000, 200, 200], 12, 16, seed, BumpPlacement::Central)?;
        let with = central_mass(&task, temperature, gamma, seed)?;
        let without = central_mass(&task, temperature, 0.0, seed)?;
        println!("seed {seed}: gamma={gamma} {with:.4}  gamma=0 {without:.4}");
        diffs.push(with - without);
    }
    println!("mean difference {:.4}", diffs.iter().sum::<f64>() / 3.0);
    Ok(())
}
