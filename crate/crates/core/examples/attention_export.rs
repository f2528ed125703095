//! Train briefly on the synthetic task, then export per-token frame attention
//! for a few test sentences and show where each one looks.
//!
//! cargo run --release --example attention_export [out.jsonl]

use vgmt::evaluation::{attention_dumps, export_attention, SyntheticTask};
use vgmt::model::{init_params, TextBatch, VideoFeatureBatch};
use vgmt::training::{train, BumpPlacement, Schedule, TrainConfig};

fn main() -> vgmt::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "attention.jsonl".into());
    let task = SyntheticTask::generate([400, 40, 8], 12, 16, 0, BumpPlacement::Central)?;
    let config = task.model_config(16);
    let tc = TrainConfig {
        tokens_per_batch: 256,
        max_steps: 300,
        schedule: Schedule { warmup_steps: 100, lr_start: 1e-5, lr_peak: 5e-3 },
        ..Default::default()
    };
    let trained = train(&config, init_params(&config, 0)?, &task.train, &task.valid, &task.clips, &tc, &mut ())?;

    let src: Vec<Vec<usize>> = task.test.iter().map(|e| e.src.clone()).collect();
    let tgt: Vec<Vec<usize>> = task.test.iter().map(|e| e.tgt.clone()).collect();
    let batch = TextBatch::from_pairs(&src, &tgt, &vec![true; src.len()])?;
    let clips: Vec<&[f64]> = task.test.iter().map(|e| task.clips.clip(e.clip)).collect();
    let feats = VideoFeatureBatch::stack(&clips, 12, 16)?;
    let ids: Vec<String> = (0..src.len()).map(|i| format!("test{i}")).collect();
    let tokens: Vec<Vec<String>> = src
        .iter()
        .map(|s| s.iter().map(|&t| task.src_vocab.token(t).unwrap_or("?").to_string()).collect())
        .collect();
    let dumps = attention_dumps(&trained.params, &config, &batch, &feats, &ids, &tokens)?;
    for d in &dumps {
        let w: Vec<String> = d.frame_weights.iter().map(|v| format!("{v:.2}")).collect();
        println!("{} argmax frame {:>2}  [{}]", d.id, d.argmax_frame(), w.join(" "));
    }
    export_attention(&dumps, std::path::Path::new(&out))?;
    println!("wrote {out}");
    Ok(())
}
