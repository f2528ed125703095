use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::Result;
use crate::numerics::{ParamSet, Tensor};

/// Parameter names for one attention block rooted at `prefix`.
pub(crate) fn attention_names(prefix: &str) -> [String; 8] {
    ["wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"].map(|s| format!("{prefix}.{s}"))
}

/// Build and initialize every trainable tensor of the model.
///
/// Weight matrices are Glorot-uniform, biases zero, layer-norm gains one.
/// Initialization consumes a single ChaCha8 stream in insertion order, so the
/// result depends only on `config` and `seed`.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ParamSet> {
    config.validate()?;
    let mut init = Init {
        rng: ChaCha8Rng::seed_from_u64(seed),
        ps: ParamSet::new(),
        d: config.d_model,
        f: config.d_ffn,
    };
    init.glorot("src_embed", config.src_vocab_size, config.d_model);
    init.glorot("tgt_embed", config.tgt_vocab_size, config.d_model);
    for l in 0..config.encoder_layers {
        init.attention(&format!("enc.{l}.attn"));
        init.norm(&format!("enc.{l}.ln1"));
        init.ffn(&format!("enc.{l}.ffn"));
        init.norm(&format!("enc.{l}.ln2"));
    }
    for l in 0..config.decoder_layers {
        init.attention(&format!("dec.{l}.self_attn"));
        init.norm(&format!("dec.{l}.ln1"));
        init.attention(&format!("dec.{l}.cross_attn"));
        init.norm(&format!("dec.{l}.ln2"));
        init.ffn(&format!("dec.{l}.ffn"));
        init.norm(&format!("dec.{l}.ln3"));
    }
    init.glorot("video_proj", config.video_feature_dim, config.d_model);
    init.glorot("gate_u", config.d_model, config.d_model);
    init.glorot("gate_v", config.d_model, config.d_model);
    init.glorot("out_proj", config.d_model, config.tgt_vocab_size);
    Ok(init.ps)
}

struct Init {
    rng: ChaCha8Rng,
    ps: ParamSet,
    d: usize,
    f: usize,
}

impl Init {
    fn glorot(&mut self, name: &str, rows: usize, cols: usize) {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.random_range(-a..a)).collect();
        self.ps
            .insert(name, Tensor::new(vec![rows, cols], data).unwrap().with_grad());
    }

    fn fill(&mut self, name: &str, n: usize, value: f64) {
        self.ps
            .insert(name, Tensor::new(vec![n], vec![value; n]).unwrap().with_grad());
    }

    fn attention(&mut self, prefix: &str) {
        let names = attention_names(prefix);
        for pair in names.chunks(2) {
            self.glorot(&pair[0], self.d, self.d);
            self.fill(&pair[1], self.d, 0.0);
        }
    }

    fn ffn(&mut self, prefix: &str) {
        let (d, f) = (self.d, self.f);
        self.glorot(&format!("{prefix}.w1"), d, f);
        self.fill(&format!("{prefix}.b1"), f, 0.0);
        self.glorot(&format!("{prefix}.w2"), f, d);
        self.fill(&format!("{prefix}.b2"), d, 0.0);
    }

    fn norm(&mut self, prefix: &str) {
        self.fill(&format!("{prefix}.gain"), self.d, 1.0);
        self.fill(&format!("{prefix}.bias"), self.d, 0.0);
    }
}

/// Check that `params` has every tensor `config` needs, with matching shapes.
pub fn check_params(config: &ModelConfig, params: &ParamSet) -> Result<()> {
    let expected = init_params(config, 0)?;
    for (name, t) in expected.iter() {
        match params.get(name) {
            Some(p) if p.shape() == t.shape() => {}
            Some(p) => {
                return Err(crate::Error::Config(format!(
                    "parameter `{name}` has shape {:?}, config implies {:?}",
                    p.shape(),
                    t.shape()
                )))
            }
            None => return Err(crate::Error::Config(format!("checkpoint lacks `{name}`"))),
        }
    }
    Ok(())
}

/// Sinusoidal position encodings, `[len, d]` row-major.
pub fn position_encodings(len: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d as f64);
            pe[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}
