use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::write_text;
use crate::error::{Error, Result};
use crate::model::{forward_full, ModelConfig, TextBatch, VideoFeatureBatch};
use crate::numerics::{Graph, ParamSet};

/// Frame attention of one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionDump {
    pub id: String,
    pub source_tokens: Vec<String>,
    pub frames: usize,
    /// `S x M`, row-major, one row per source token.
    pub attention: Vec<f64>,
    /// Token-averaged attention per frame.
    pub frame_weights: Vec<f64>,
}

impl AttentionDump {
    pub fn argmax_frame(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.frame_weights.iter().enumerate() {
            if *w > self.frame_weights[best] {
                best = i;
            }
        }
        best
    }
}

/// Run the model in eval mode and collect the selective-attention rows of
/// the real (unpadded) source tokens.
pub fn attention_dumps(
    params: &ParamSet,
    config: &ModelConfig,
    batch: &TextBatch,
    features: &VideoFeatureBatch,
    ids: &[String],
    source_tokens: &[Vec<String>],
) -> Result<Vec<AttentionDump>> {
    if ids.len() != batch.batch_size || source_tokens.len() != batch.batch_size {
        return Err(Error::Input("ids and tokens must match the batch".into()));
    }
    let mut g = Graph::new();
    let f = forward_full(&mut g, params, config, batch, features)?;
    let att = g.value(f.output.frame_attention);
    let (s, m) = (batch.src_len, features.frames);
    let mut out = Vec::with_capacity(batch.batch_size);
    for i in 0..batch.batch_size {
        let n = batch.source_tokens(i);
        let attention = att[i * s * m..(i * s + n) * m].to_vec();
        let frame_weights = (0..m)
            .map(|k| (0..n).map(|t| attention[t * m + k]).sum::<f64>() / n as f64)
            .collect();
        out.push(AttentionDump {
            id: ids[i].clone(),
            source_tokens: source_tokens[i].clone(),
            frames: m,
            attention,
            frame_weights,
        });
    }
    Ok(out)
}

pub fn dumps_to_string(dumps: &[AttentionDump]) -> String {
    let mut s = String::new();
    for d in dumps {
        s.push_str(&serde_json::to_string(d).expect("dump serializes"));
        s.push('\n');
    }
    s
}

pub fn export_attention(dumps: &[AttentionDump], path: &Path) -> Result<()> {
    write_text(path, &dumps_to_string(dumps))
}
