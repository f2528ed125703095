use serde::{Deserialize, Serialize};

use super::adam::{adam_step, clip_grad_norm, OptimizerState};
use super::batching::{epoch_order, make_batches, Batch, Example};
use super::schedule::{lr_at_step, Schedule};
use crate::corpus::ClipStore;
use crate::error::{Error, Result};
use crate::model::{check_params, forward_full, ModelConfig};
use crate::numerics::{Graph, ParamSet};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub tokens_per_batch: usize,
    pub max_steps: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving validations tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Global gradient-norm bound; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub schedule: Schedule,
    /// Report a checkpoint every this many steps.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tokens_per_batch: 16000,
            max_steps: 100_000,
            max_epochs: usize::MAX,
            patience: 5,
            seed: 0,
            clip_norm: Some(1.0),
            schedule: Schedule::default(),
            checkpoint_every: None,
        }
    }
}

const TRAIN_KEYS: &[&str] = &[
    "tokens_per_batch",
    "max_steps",
    "max_epochs",
    "patience",
    "clip_norm",
    "warmup_steps",
    "lr_start",
    "lr_peak",
    "checkpoint_every",
];

impl TrainConfig {
    pub fn keys() -> &'static [&'static str] {
        TRAIN_KEYS
    }

    /// Set one field from text. `clip_norm` and `checkpoint_every` accept
    /// `none`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
        let int = || value.parse::<usize>().map_err(|_| bad());
        let real = || value.parse::<f64>().map_err(|_| bad());
        let none = value.eq_ignore_ascii_case("none");
        match key {
            "tokens_per_batch" => self.tokens_per_batch = int()?,
            "max_steps" => self.max_steps = int()?,
            "max_epochs" => self.max_epochs = int()?,
            "patience" => self.patience = int()?,
            "clip_norm" => self.clip_norm = if none { None } else { Some(real()?) },
            "warmup_steps" => self.schedule.warmup_steps = int()?,
            "lr_start" => self.schedule.lr_start = real()?,
            "lr_peak" => self.schedule.lr_peak = real()?,
            "checkpoint_every" => self.checkpoint_every = if none { None } else { Some(int()?) },
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        Some(match key {
            "tokens_per_batch" => self.tokens_per_batch.to_string(),
            "max_steps" => self.max_steps.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "clip_norm" => opt(self.clip_norm.map(|v| v.to_string())),
            "warmup_steps" => self.schedule.warmup_steps.to_string(),
            "lr_start" => self.schedule.lr_start.to_string(),
            "lr_peak" => self.schedule.lr_peak.to_string(),
            "checkpoint_every" => opt(self.checkpoint_every.map(|v| v.to_string())),
            _ => return None,
        })
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub lr: f64,
    pub train_loss: f64,
    #[serde(rename = "L_O")]
    pub l_o: f64,
    #[serde(rename = "L_G")]
    pub l_g: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    MaxSteps,
    MaxEpochs,
    EarlyStopped,
    /// Loss or gradient became non-finite at this step.
    Diverged { step: usize, cause: String },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the best validation loss (last good ones on divergence
    /// before any validation).
    pub params: ParamSet,
    pub best_val_loss: f64,
    pub best_step: usize,
    pub steps: usize,
    pub epochs: usize,
    pub stop: StopReason,
    pub metrics: Vec<MetricsRecord>,
}

/// Receives progress while training runs.
pub trait TrainObserver {
    fn metrics(&mut self, _record: &MetricsRecord) -> Result<()> {
        Ok(())
    }
    fn checkpoint(&mut self, _step: usize, _params: &ParamSet) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Tracks the best validation loss and counts evaluations without strict
/// improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    bad: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> Verdict {
        if loss < self.best {
            self.best = loss;
            self.bad = 0;
            Verdict::Improved
        } else {
            self.bad += 1;
            if self.bad >= self.patience {
                Verdict::Stop
            } else {
                Verdict::NoImprovement
            }
        }
    }
}

/// Dropout seed for one step, derived from the run seed.
fn step_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sample-weighted mean of the total loss over `batches`, eval mode.
pub fn evaluate_loss(params: &ParamSet, config: &ModelConfig, batches: &[Batch], clips: &ClipStore) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut g = Graph::new();
    for b in batches {
        g.reset();
        let f = forward_full(&mut g, params, config, &b.text, &b.features(clips)?)?;
        sum += f.losses.total * b.rows() as f64;
        n += b.rows();
    }
    if n == 0 {
        return Err(Error::Input("validation set is empty".into()));
    }
    Ok(sum / n as f64)
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite { .. } | Error::NonFiniteGradient(_))
}

/// Train with Adam under the warmup schedule, validating once per epoch (and
/// when the step budget runs out), keeping the best-validation parameters.
pub fn train(
    config: &ModelConfig,
    init: ParamSet,
    train_set: &[Example],
    valid_set: &[Example],
    clips: &ClipStore,
    tc: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    tc.schedule.validate()?;
    check_params(config, &init)?;
    if valid_set.is_empty() {
        return Err(Error::Input("validation set is empty".into()));
    }
    let train_batches = make_batches(train_set, tc.tokens_per_batch, tc.seed)?.batches;
    let valid_batches = make_batches(valid_set, tc.tokens_per_batch, tc.seed)?.batches;
    if train_batches.is_empty() || valid_batches.is_empty() {
        return Err(Error::Input("no usable examples after batching".into()));
    }
    let train_features: Vec<_> = train_batches
        .iter()
        .map(|b| b.features(clips))
        .collect::<Result<_>>()?;

    let mut params = init;
    let mut state = OptimizerState::new(&params);
    let mut stopper = EarlyStopping::new(tc.patience);
    let mut best = params.clone();
    let mut best_step = 0;
    let mut metrics = Vec::new();
    let mut step = 0;
    let mut epoch = 0;
    let stop = 'outer: loop {
        if epoch >= tc.max_epochs {
            break StopReason::MaxEpochs;
        }
        let order = epoch_order(train_batches.len(), tc.seed, epoch);
        let last = order.len() - 1;
        for (k, &bi) in order.iter().enumerate() {
            step += 1;
            let lr = lr_at_step(step, &tc.schedule);
            let before = params.clone();
            let mut g = Graph::training(step_seed(tc.seed, step));
            let result = (|| {
                let f = forward_full(&mut g, &params, config, &train_batches[bi].text, &train_features[bi])?;
                if !f.losses.total.is_finite() {
                    return Err(Error::NonFinite { op: "loss" });
                }
                params.zero_grad();
                g.backward(f.total, &mut params)?;
                if let Some(c) = tc.clip_norm {
                    clip_grad_norm(&mut params, c);
                }
                adam_step(&mut params, &mut state, lr)?;
                Ok(f.losses)
            })();
            let losses = match result {
                Ok(l) => l,
                Err(e) if is_divergence(&e) => {
                    if best_step == 0 {
                        best = before;
                    }
                    break 'outer StopReason::Diverged {
                        step,
                        cause: e.to_string(),
                    };
                }
                Err(e) => return Err(e),
            };
            let budget_done = step >= tc.max_steps;
            let val_loss = if k == last || budget_done {
                Some(evaluate_loss(&params, config, &valid_batches, clips)?)
            } else {
                None
            };
            let record = MetricsRecord {
                step,
                lr,
                train_loss: losses.total,
                l_o: losses.translation,
                l_g: losses.frame,
                val_loss,
            };
            observer.metrics(&record)?;
            metrics.push(record);
            if let Some(every) = tc.checkpoint_every {
                if every > 0 && step % every == 0 {
                    observer.checkpoint(step, &params)?;
                }
            }
            if let Some(v) = val_loss {
                match stopper.observe(v) {
                    Verdict::Improved => {
                        best = params.clone();
                        best_step = step;
                    }
                    Verdict::NoImprovement => {}
                    Verdict::Stop => break 'outer StopReason::EarlyStopped,
                }
            }
            if budget_done {
                break 'outer StopReason::MaxSteps;
            }
        }
        epoch += 1;
    };
    Ok(TrainOutcome {
        params: best,
        best_val_loss: stopper.best,
        best_step,
        steps: step,
        epochs: epoch,
        stop,
        metrics,
    })
}
