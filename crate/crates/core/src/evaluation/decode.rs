use rayon::prelude::*;

use crate::corpus::ClipStore;
use crate::error::{Error, Result};
use crate::model::{decode, encode_fused, special, ModelConfig, TextBatch, VideoFeatureBatch};
use crate::numerics::{Graph, ParamSet, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub max_length: usize,
    pub length_penalty: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 5,
            max_length: 64,
            length_penalty: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    /// Generated ids without BOS and EOS.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// `log_prob / len^length_penalty`, `len` counting EOS when emitted.
    pub score: f64,
}

struct Beam {
    tokens: Vec<usize>,
    log_prob: f64,
}

fn normalized(log_prob: f64, len: usize, penalty: f64) -> f64 {
    log_prob / (len.max(1) as f64).powf(penalty)
}

/// Encoder side of one sentence, reused across decoding steps.
struct Encoded {
    fused: Tensor,
    src_len: usize,
}

fn encode_one(params: &ParamSet, config: &ModelConfig, src: &[usize], clip: &[f64], frames: usize, dim: usize) -> Result<Encoded> {
    let batch = TextBatch::from_pairs(&[src.to_vec()], &[Vec::new()], &[false])?;
    let feats = VideoFeatureBatch::new(1, frames, dim, clip.to_vec())?;
    let mut g = Graph::new();
    let (fused, _, _) = encode_fused(&mut g, params, config, &batch, &feats)?;
    Ok(Encoded {
        fused: g.to_tensor(fused),
        src_len: src.len(),
    })
}

/// Next-token log-probabilities for each prefix (all of equal length).
fn step_log_probs(params: &ParamSet, config: &ModelConfig, enc: &Encoded, prefixes: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    let k = prefixes.len();
    let t = prefixes[0].len();
    let d = config.d_model;
    let mut g = Graph::new();
    let mut data = Vec::with_capacity(k * enc.fused.len());
    for _ in 0..k {
        data.extend_from_slice(enc.fused.data());
    }
    let fused = g.constant_from(vec![k, enc.src_len, d], data)?;
    let tgt_in: Vec<usize> = prefixes.iter().flatten().copied().collect();
    let logits = decode(
        &mut g,
        params,
        config,
        fused,
        &vec![true; k * enc.src_len],
        &tgt_in,
        &vec![true; k * t],
        t,
    )?;
    let v = config.tgt_vocab_size;
    let values = g.value(logits);
    Ok((0..k)
        .map(|b| {
            let row = &values[(b * t + t - 1) * v..(b * t + t) * v];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            row.iter()
                .enumerate()
                .map(|(i, x)| {
                    if i == special::PAD || i == special::BOS {
                        f64::NEG_INFINITY
                    } else {
                        x - lse
                    }
                })
                .collect()
        })
        .collect())
}

fn search(params: &ParamSet, config: &ModelConfig, enc: &Encoded, dc: &DecodeConfig) -> Result<Hypothesis> {
    let k = dc.beam_size;
    let mut live = vec![Beam {
        tokens: Vec::new(),
        log_prob: 0.0,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..dc.max_length {
        let prefixes: Vec<Vec<usize>> = live
            .iter()
            .map(|b| std::iter::once(special::BOS).chain(b.tokens.iter().copied()).collect())
            .collect();
        let lps = step_log_probs(params, config, enc, &prefixes)?;
        // (log prob, beam, token); ties resolved by beam then token
        let mut cand: Vec<(f64, usize, usize)> = Vec::new();
        for (b, lp) in lps.iter().enumerate() {
            let mut order: Vec<usize> = (0..lp.len()).filter(|&i| lp[i].is_finite()).collect();
            order.sort_by(|&x, &y| lp[y].total_cmp(&lp[x]).then(x.cmp(&y)));
            for &tok in order.iter().take(2 * k) {
                cand.push((live[b].log_prob + lp[tok], b, tok));
            }
        }
        cand.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut next = Vec::with_capacity(k);
        for (rank, &(lp, b, tok)) in cand.iter().enumerate() {
            if tok == special::EOS {
                if rank < k {
                    let len = live[b].tokens.len() + 1;
                    finished.push(Hypothesis {
                        tokens: live[b].tokens.clone(),
                        log_prob: lp,
                        score: normalized(lp, len, dc.length_penalty),
                    });
                }
            } else if next.len() < k {
                let mut tokens = live[b].tokens.clone();
                tokens.push(tok);
                next.push(Beam { tokens, log_prob: lp });
            }
        }
        if finished.len() >= k || next.is_empty() {
            break;
        }
        live = next;
    }
    if finished.is_empty() {
        finished = live
            .into_iter()
            .map(|b| Hypothesis {
                score: normalized(b.log_prob, b.tokens.len(), dc.length_penalty),
                tokens: b.tokens,
                log_prob: b.log_prob,
            })
            .collect();
    }
    finished
        .into_iter()
        .reduce(|best, h| if h.score > best.score { h } else { best })
        .ok_or_else(|| Error::State("beam search produced no hypothesis".into()))
}

/// Length-normalized beam search for every source, in parallel across
/// sentences. `clips[i]` is the clip index of `sources[i]`. Beam size 1 is
/// greedy decoding.
pub fn beam_decode(
    params: &ParamSet,
    config: &ModelConfig,
    sources: &[Vec<usize>],
    store: &ClipStore,
    clips: &[usize],
    dc: &DecodeConfig,
) -> Result<Vec<Hypothesis>> {
    if dc.beam_size == 0 {
        return Err(Error::Config("beam_size must be at least 1".into()));
    }
    if sources.len() != clips.len() {
        return Err(Error::Input(format!("{} sources for {} clips", sources.len(), clips.len())));
    }
    sources
        .par_iter()
        .zip(clips.par_iter())
        .map(|(src, &c)| {
            if src.is_empty() {
                return Err(Error::Input("cannot decode an empty source".into()));
            }
            let enc = encode_one(params, config, src, store.clip(c), store.frames, store.dim)?;
            search(params, config, &enc, dc)
        })
        .collect()
}
