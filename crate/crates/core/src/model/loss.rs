//! Translation loss, Gaussian frame-attention loss and the ambiguity-weighted
//! total.

use std::f64::consts::PI;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{softmax_in_place, Graph, Var};

/// Floor applied to probabilities inside the KL divergence.
pub const PROB_FLOOR: f64 = 1e-12;

/// Per-sample label-smoothed cross entropy.
///
/// Per token: `(1 - eps) * NLL(target) + eps * mean_v NLL(v)`. Per sample:
/// mean over unmasked tokens. `logits` is `[B, T, V]`; `targets` and `mask`
/// are `B * T` row-major. Returns a `[B]` node.
pub fn label_smoothed_loss(
    g: &mut Graph,
    logits: Var,
    targets: &[usize],
    mask: &[bool],
    epsilon: f64,
) -> Result<Var> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!("label smoothing {epsilon} outside [0, 1)")));
    }
    let shape = g.shape(logits).to_vec();
    if shape.len() != 3 || targets.len() != shape[0] * shape[1] || mask.len() != targets.len() {
        return Err(Error::shape(
            "label_smoothed_loss",
            format!("logits {shape:?} with {} targets / {} mask entries", targets.len(), mask.len()),
        ));
    }
    let (b, t, v) = (shape[0], shape[1], shape[2]);
    let mut weights = vec![0.0; b * t * v];
    for s in 0..b {
        let n = mask[s * t..(s + 1) * t].iter().filter(|&&m| m).count();
        if n == 0 {
            return Err(Error::DegenerateSample(s));
        }
        let per_token = 1.0 / n as f64;
        for p in 0..t {
            if !mask[s * t + p] {
                continue;
            }
            let target = targets[s * t + p];
            if target >= v {
                return Err(Error::Vocabulary { id: target, size: v });
            }
            let row = &mut weights[(s * t + p) * v..(s * t + p + 1) * v];
            row.iter_mut().for_each(|w| *w = -per_token * epsilon / v as f64);
            row[target] -= per_token * (1.0 - epsilon);
        }
    }
    let lp = g.log_softmax(logits)?;
    let w = g.constant_from(vec![b, t, v], weights)?;
    let weighted = g.mul(lp, w)?;
    let per_token = g.sum_last(weighted)?;
    g.sum_last(per_token)
}

/// Normal density.
fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// `M` points equally spaced on `[-a, a]`; `[0]` for a single frame.
pub fn frame_positions(frames: usize, halfwidth: f64) -> Vec<f64> {
    if frames == 1 {
        return vec![0.0];
    }
    (0..frames)
        .map(|i| -halfwidth + 2.0 * halfwidth * i as f64 / (frames - 1) as f64)
        .collect()
}

/// Target distribution over frames: temperature softmax of the Normal(mu,
/// sigma^2) density evaluated at the frame positions.
pub fn gaussian_target(frames: usize, halfwidth: f64, mu: f64, sigma: f64, temperature: f64) -> Vec<f64> {
    let mut logits: Vec<f64> = frame_positions(frames, halfwidth)
        .into_iter()
        .map(|z| normal_pdf(z, mu, sigma) / temperature)
        .collect();
    softmax_in_place(&mut logits);
    logits
}

impl ModelConfig {
    pub fn frame_target(&self) -> Vec<f64> {
        gaussian_target(
            self.frames_per_clip,
            self.gaussian_halfwidth,
            self.gaussian_mu,
            self.gaussian_sigma,
            self.temperature,
        )
    }
}

/// `KL(attention row || target)` in nats, averaged over unmasked source
/// tokens of each sample and then over samples.
///
/// `attention` is `[B, S, M]`; `src_mask` is `B * S` with `true` on real
/// tokens. Both distributions are floored at [`PROB_FLOOR`] inside the log.
pub fn frame_attention_loss(g: &mut Graph, attention: Var, target: &[f64], src_mask: &[bool]) -> Result<Var> {
    let shape = g.shape(attention).to_vec();
    if shape.len() != 3 || shape[2] != target.len() || src_mask.len() != shape[0] * shape[1] {
        return Err(Error::shape(
            "frame_attention_loss",
            format!("attention {shape:?}, target {}, mask {}", target.len(), src_mask.len()),
        ));
    }
    let (b, s) = (shape[0], shape[1]);
    let counts: Vec<usize> = (0..b)
        .map(|i| src_mask[i * s..(i + 1) * s].iter().filter(|&&m| m).count())
        .collect();
    let live = counts.iter().filter(|&&c| c > 0).count().max(1);
    let row_weights: Vec<f64> = (0..b * s)
        .map(|r| {
            let c = counts[r / s];
            if src_mask[r] && c > 0 {
                1.0 / (c as f64 * live as f64)
            } else {
                0.0
            }
        })
        .collect();

    let log_target: Vec<f64> = target.iter().map(|q| q.max(PROB_FLOOR).ln()).collect();
    let floored = g.clamp_min(attention, PROB_FLOOR)?;
    let log_p = g.log(floored)?;
    let log_q = g.constant_from(vec![target.len()], log_target)?;
    let ratio = g.sub(log_p, log_q)?;
    let terms = g.mul(attention, ratio)?;
    let kl_rows = g.sum_last(terms)?;
    let w = g.constant_from(vec![b, s], row_weights)?;
    let weighted = g.mul(kl_rows, w)?;
    g.sum(weighted)
}

/// Loss decomposition for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLossBreakdown {
    /// Translation term: ambiguity-weighted group means (plain mean when no
    /// sample is flagged).
    pub translation: f64,
    /// Frame-attention KL term before weighting.
    pub frame: f64,
    pub total: f64,
    /// Number of possibly-ambiguous samples.
    pub ambiguous: usize,
    /// Number of possibly-unambiguous samples.
    pub unambiguous: usize,
    /// Unweighted mean per-sample loss.
    pub mean_sample_loss: f64,
}

/// Per-sample coefficients `c_i` with translation term `sum_i c_i * L_i`:
/// `w / P` for flagged samples and `1 / Q` for the rest. An empty group
/// contributes nothing.
pub fn group_weights(flags: &[bool], ambiguity_weight: f64) -> Vec<f64> {
    let p = flags.iter().filter(|&&f| f).count();
    let q = flags.len() - p;
    flags
        .iter()
        .map(|&f| {
            if f {
                ambiguity_weight / p as f64
            } else {
                1.0 / q as f64
            }
        })
        .collect()
}

/// Combine per-sample translation losses and the frame loss.
pub fn total_loss(per_sample: &[f64], flags: &[bool], frame_loss: f64, config: &ModelConfig) -> Result<BatchLossBreakdown> {
    if per_sample.len() != flags.len() {
        return Err(Error::shape(
            "total_loss",
            format!("{} losses vs {} flags", per_sample.len(), flags.len()),
        ));
    }
    let weights = group_weights(flags, config.ambiguity_weight);
    let translation: f64 = per_sample.iter().zip(&weights).map(|(l, w)| l * w).sum();
    let ambiguous = flags.iter().filter(|&&f| f).count();
    let mean_sample_loss = if per_sample.is_empty() {
        0.0
    } else {
        per_sample.iter().sum::<f64>() / per_sample.len() as f64
    };
    Ok(BatchLossBreakdown {
        translation,
        frame: frame_loss,
        total: translation + config.frame_loss_weight * frame_loss,
        ambiguous,
        unambiguous: flags.len() - ambiguous,
        mean_sample_loss,
    })
}

/// Graph version of [`total_loss`]; returns the scalar total.
pub fn total_loss_node(
    g: &mut Graph,
    per_sample: Var,
    flags: &[bool],
    frame_loss: Var,
    config: &ModelConfig,
) -> Result<Var> {
    let weights = group_weights(flags, config.ambiguity_weight);
    let w = g.constant_from(vec![weights.len()], weights)?;
    let weighted = g.mul(per_sample, w)?;
    let translation = g.sum(weighted)?;
    if config.frame_loss_weight == 0.0 {
        return Ok(translation);
    }
    let frame = g.scale(frame_loss, config.frame_loss_weight)?;
    g.add(translation, frame)
}
