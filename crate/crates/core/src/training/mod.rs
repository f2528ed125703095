//! Optimization: Adam, the warmup schedule, token-capped batching, the
//! training loop with early stopping, and a synthetic disambiguation task.

mod adam;
mod batching;
mod schedule;
mod synthetic;
mod trainer;

pub use adam::{adam_step, clip_grad_norm, OptimizerState};
pub use batching::{epoch_order, examples_from_records, make_batches, Batch, Batches, Example};
pub use schedule::{lr_at_step, Schedule};
pub use synthetic::{
    generate_synthetic_dataset, BumpPlacement, SyntheticDataset, BUMP, SYNTHETIC_SOURCE, SYNTHETIC_TARGETS,
};
pub use trainer::{
    evaluate_loss, train, EarlyStopping, MetricsRecord, StopReason, TrainConfig, TrainObserver, TrainOutcome,
    Verdict,
};
