//! Forward pass: text encoder, video projection, selective attention, gated
//! fusion and decoder.

use super::batch::{TextBatch, VideoFeatureBatch};
use super::config::ModelConfig;
use super::loss::{frame_attention_loss, label_smoothed_loss, total_loss, total_loss_node, BatchLossBreakdown};
use super::params::{attention_names, position_encodings};
use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamSet, Var};

/// Graph nodes produced by a full forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ModelOutput {
    /// `[B, T, V_tgt]`
    pub logits: Var,
    /// `[B, S, M]`, each row a distribution over frames.
    pub frame_attention: Var,
    /// `[B, S, d]` gate values in (0, 1).
    pub gate: Var,
    /// `[B, S, d]` fused representation fed to the decoder.
    pub fused: Var,
}

/// Result of [`forward_full`].
#[derive(Clone, Debug)]
pub struct Forward {
    pub output: ModelOutput,
    /// `[B]` per-sample translation losses.
    pub per_sample: Var,
    pub frame_loss: Var,
    /// Scalar node to differentiate.
    pub total: Var,
    pub losses: BatchLossBreakdown,
}

fn layer_norm(g: &mut Graph, p: &ParamSet, x: Var, prefix: &str) -> Result<Var> {
    let n = g.layer_norm(x)?;
    let gain = g.param_named(p, &format!("{prefix}.gain"))?;
    let bias = g.param_named(p, &format!("{prefix}.bias"))?;
    let scaled = g.mul(n, gain)?;
    g.add(scaled, bias)
}

fn linear(g: &mut Graph, p: &ParamSet, x: Var, w: &str, b: &str) -> Result<Var> {
    let w = g.param_named(p, w)?;
    let b = g.param_named(p, b)?;
    let y = g.matmul(x, w)?;
    g.add(y, b)
}

fn feed_forward(g: &mut Graph, p: &ParamSet, x: Var, prefix: &str, dropout: f64) -> Result<Var> {
    let h = linear(g, p, x, &format!("{prefix}.w1"), &format!("{prefix}.b1"))?;
    let h = g.relu(h)?;
    let h = g.dropout(h, dropout)?;
    linear(g, p, h, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
}

/// Multi-head scaled dot-product attention. `masked` is `B * Sq * Sk` with
/// `true` where the key must be ignored.
fn multi_head_attention(
    g: &mut Graph,
    p: &ParamSet,
    prefix: &str,
    query: Var,
    memory: Var,
    masked: Vec<bool>,
    heads: usize,
) -> Result<Var> {
    let [wq, bq, wk, bk, wv, bv, wo, bo] = attention_names(prefix);
    let q = linear(g, p, query, &wq, &bq)?;
    let k = linear(g, p, memory, &wk, &bk)?;
    let v = linear(g, p, memory, &wv, &bv)?;
    let d = g.shape(q)[2];
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.narrow(q, h * dh, dh)?;
        let kh = g.narrow(k, h * dh, dh)?;
        let vh = g.narrow(v, h * dh, dh)?;
        let kt = g.transpose(kh)?;
        let scores = g.matmul(qh, kt)?;
        let scores = g.scale(scores, scale)?;
        let scores = g.masked_fill(scores, masked.clone())?;
        let weights = g.softmax(scores)?;
        outs.push(g.matmul(weights, vh)?);
    }
    let joined = if heads == 1 { outs[0] } else { g.concat(&outs)? };
    linear(g, p, joined, &wo, &bo)
}

fn key_padding_mask(key_mask: &[bool], b: usize, sq: usize, sk: usize, causal: bool) -> Vec<bool> {
    let mut m = vec![false; b * sq * sk];
    for i in 0..b {
        for q in 0..sq {
            for k in 0..sk {
                m[(i * sq + q) * sk + k] = !key_mask[i * sk + k] || (causal && k > q);
            }
        }
    }
    m
}

fn embed(g: &mut Graph, p: &ParamSet, table: &str, ids: &[usize], b: usize, len: usize, d: usize) -> Result<Var> {
    let t = g.param_named(p, table)?;
    let e = g.embedding(t, ids)?;
    let e = g.reshape(e, vec![b, len, d])?;
    let e = g.scale(e, (d as f64).sqrt())?;
    let pe = g.constant_from(vec![len, d], position_encodings(len, d))?;
    g.add(e, pe)
}

/// Transformer encoder over the source tokens: `[B, S, d]`.
pub fn encode_text(g: &mut Graph, params: &ParamSet, config: &ModelConfig, batch: &TextBatch) -> Result<Var> {
    let (b, s, d) = (batch.batch_size, batch.src_len, config.d_model);
    if s == 0 {
        return Err(Error::Input("source length is zero".into()));
    }
    let mut x = embed(g, params, "src_embed", &batch.src_ids, b, s, d)?;
    x = g.dropout(x, config.dropout)?;
    let mask = key_padding_mask(&batch.src_mask, b, s, s, false);
    for l in 0..config.encoder_layers {
        let a = multi_head_attention(g, params, &format!("enc.{l}.attn"), x, x, mask.clone(), config.heads)?;
        let a = g.dropout(a, config.dropout)?;
        let r = g.add(x, a)?;
        x = layer_norm(g, params, r, &format!("enc.{l}.ln1"))?;
        let f = feed_forward(g, params, x, &format!("enc.{l}.ffn"), config.dropout)?;
        let f = g.dropout(f, config.dropout)?;
        let r = g.add(x, f)?;
        x = layer_norm(g, params, r, &format!("enc.{l}.ln2"))?;
    }
    Ok(x)
}

/// Per-frame linear map `d_v -> d_model` (no bias): `[B, M, d]`.
pub fn project_video(g: &mut Graph, params: &ParamSet, features: &VideoFeatureBatch) -> Result<Var> {
    let w = g.param_named(params, "video_proj")?;
    let dv = g.shape(w)[0];
    if features.dim != dv {
        return Err(Error::shape(
            "project_video",
            format!("feature dim {} vs configured {dv}", features.dim),
        ));
    }
    let x = g.constant_from(
        vec![features.batch_size, features.frames, features.dim],
        features.data.clone(),
    )?;
    g.matmul(x, w)
}

/// Single-head attention from text tokens to frames with no learned
/// projections. Returns `(H_attn [B,S,d], frame_attention [B,S,M])`.
pub fn selective_attention(g: &mut Graph, text: Var, video: Var) -> Result<(Var, Var)> {
    let st = g.shape(text).to_vec();
    let sv = g.shape(video).to_vec();
    if st.len() != 3 || sv.len() != 3 || st[0] != sv[0] || st[2] != sv[2] {
        return Err(Error::shape("selective_attention", format!("text {st:?} vs video {sv:?}")));
    }
    let kt = g.transpose(video)?;
    let scores = g.matmul(text, kt)?;
    let scores = g.scale(scores, 1.0 / (st[2] as f64).sqrt())?;
    let attention = g.softmax(scores)?;
    let attended = g.matmul(attention, video)?;
    Ok((attended, attention))
}

/// `lambda = sigmoid(H_text U + H_attn V)`,
/// `H_out = (1 - lambda) * H_text + lambda * H_attn`. Returns `(H_out, lambda)`.
pub fn gated_fusion(g: &mut Graph, params: &ParamSet, text: Var, attended: Var) -> Result<(Var, Var)> {
    if g.shape(text) != g.shape(attended) {
        return Err(Error::shape(
            "gated_fusion",
            format!("{:?} vs {:?}", g.shape(text), g.shape(attended)),
        ));
    }
    let u = g.param_named(params, "gate_u")?;
    let v = g.param_named(params, "gate_v")?;
    let tu = g.matmul(text, u)?;
    let av = g.matmul(attended, v)?;
    let pre = g.add(tu, av)?;
    let lambda = g.sigmoid(pre)?;
    let diff = g.sub(attended, text)?;
    let mixed = g.mul(lambda, diff)?;
    let out = g.add(text, mixed)?;
    Ok((out, lambda))
}

/// Transformer decoder whose cross-attention reads the fused representation.
/// `tgt_in` is `B * T` (BOS-prefixed); returns logits `[B, T, V_tgt]`.
#[allow(clippy::too_many_arguments)]
pub fn decode(
    g: &mut Graph,
    params: &ParamSet,
    config: &ModelConfig,
    fused: Var,
    src_mask: &[bool],
    tgt_in: &[usize],
    tgt_mask: &[bool],
    tgt_len: usize,
) -> Result<Var> {
    let fs = g.shape(fused).to_vec();
    let (b, s, d) = (fs[0], fs[1], fs[2]);
    if tgt_in.len() != b * tgt_len || tgt_mask.len() != tgt_in.len() || src_mask.len() != b * s {
        return Err(Error::shape("decode", "target or mask length disagrees with batch"));
    }
    let mut y = embed(g, params, "tgt_embed", tgt_in, b, tgt_len, d)?;
    y = g.dropout(y, config.dropout)?;
    let self_mask = key_padding_mask(tgt_mask, b, tgt_len, tgt_len, true);
    let cross_mask = key_padding_mask(src_mask, b, tgt_len, s, false);
    for l in 0..config.decoder_layers {
        let a = multi_head_attention(g, params, &format!("dec.{l}.self_attn"), y, y, self_mask.clone(), config.heads)?;
        let a = g.dropout(a, config.dropout)?;
        let r = g.add(y, a)?;
        y = layer_norm(g, params, r, &format!("dec.{l}.ln1"))?;
        let c = multi_head_attention(g, params, &format!("dec.{l}.cross_attn"), y, fused, cross_mask.clone(), config.heads)?;
        let c = g.dropout(c, config.dropout)?;
        let r = g.add(y, c)?;
        y = layer_norm(g, params, r, &format!("dec.{l}.ln2"))?;
        let f = feed_forward(g, params, y, &format!("dec.{l}.ffn"), config.dropout)?;
        let f = g.dropout(f, config.dropout)?;
        let r = g.add(y, f)?;
        y = layer_norm(g, params, r, &format!("dec.{l}.ln3"))?;
    }
    let out = g.param_named(params, "out_proj")?;
    g.matmul(y, out)
}

/// Encoder side up to the fused representation.
pub fn encode_fused(
    g: &mut Graph,
    params: &ParamSet,
    config: &ModelConfig,
    batch: &TextBatch,
    features: &VideoFeatureBatch,
) -> Result<(Var, Var, Var)> {
    if features.batch_size != batch.batch_size {
        return Err(Error::shape(
            "forward",
            format!("{} feature clips for {} samples", features.batch_size, batch.batch_size),
        ));
    }
    let text = encode_text(g, params, config, batch)?;
    let video = project_video(g, params, features)?;
    let (attended, attention) = selective_attention(g, text, video)?;
    let (fused, gate) = gated_fusion(g, params, text, attended)?;
    Ok((fused, gate, attention))
}

/// Full composition with losses. Train/eval mode is the graph's mode.
pub fn forward_full(
    g: &mut Graph,
    params: &ParamSet,
    config: &ModelConfig,
    batch: &TextBatch,
    features: &VideoFeatureBatch,
) -> Result<Forward> {
    if features.frames != config.frames_per_clip {
        return Err(Error::shape(
            "forward",
            format!("{} frames per clip, config expects {}", features.frames, config.frames_per_clip),
        ));
    }
    let (fused, gate, frame_attention) = encode_fused(g, params, config, batch, features)?;
    let logits = decode(
        g,
        params,
        config,
        fused,
        &batch.src_mask,
        &batch.tgt_in,
        &batch.tgt_mask,
        batch.tgt_len,
    )?;
    let per_sample = label_smoothed_loss(g, logits, &batch.tgt_out, &batch.tgt_mask, config.label_smoothing)?;
    let frame_loss = frame_attention_loss(g, frame_attention, &config.frame_target(), &batch.src_mask)?;
    let total = total_loss_node(g, per_sample, &batch.ambiguous, frame_loss, config)?;
    let losses = total_loss(g.value(per_sample), &batch.ambiguous, g.scalar(frame_loss), config)?;
    Ok(Forward {
        output: ModelOutput {
            logits,
            frame_attention,
            gate,
            fused,
        },
        per_sample,
        frame_loss,
        total,
        losses,
    })
}
