use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Architecture and loss hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub d_model: usize,
    pub d_ffn: usize,
    pub heads: usize,
    pub dropout: f64,
    pub label_smoothing: f64,
    pub video_feature_dim: usize,
    pub frames_per_clip: usize,
    /// Half-width `a` of the interval the Gaussian is sampled on.
    pub gaussian_halfwidth: f64,
    pub gaussian_mu: f64,
    pub gaussian_sigma: f64,
    /// Softmax temperature applied to the Gaussian density values.
    pub temperature: f64,
    /// Weight of the frame-attention KL term.
    pub frame_loss_weight: f64,
    /// Multiplier on the mean loss of possibly-ambiguous samples.
    pub ambiguity_weight: f64,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_layers: 4,
            decoder_layers: 4,
            d_model: 128,
            d_ffn: 256,
            heads: 4,
            dropout: 0.3,
            label_smoothing: 0.1,
            video_feature_dim: 512,
            frames_per_clip: 12,
            gaussian_halfwidth: 3.0,
            gaussian_mu: 1.0,
            gaussian_sigma: 1.0,
            temperature: 1.0,
            frame_loss_weight: 0.5,
            ambiguity_weight: 2.0,
            src_vocab_size: 4,
            tgt_vocab_size: 4,
        }
    }
}

const KEYS: &[&str] = &[
    "encoder_layers",
    "decoder_layers",
    "d_model",
    "d_ffn",
    "heads",
    "dropout",
    "label_smoothing",
    "video_feature_dim",
    "frames_per_clip",
    "gaussian_halfwidth",
    "gaussian_mu",
    "gaussian_sigma",
    "temperature",
    "frame_loss_weight",
    "ambiguity_weight",
    "src_vocab_size",
    "tgt_vocab_size",
];

impl ModelConfig {
    /// A small configuration for tests and desk-scale experiments.
    pub fn tiny(d_model: usize, frames: usize, video_dim: usize, src_vocab: usize, tgt_vocab: usize) -> Self {
        ModelConfig {
            encoder_layers: 1,
            decoder_layers: 1,
            d_model,
            d_ffn: 2 * d_model,
            heads: if d_model.is_multiple_of(2) { 2 } else { 1 },
            dropout: 0.0,
            video_feature_dim: video_dim,
            frames_per_clip: frames,
            src_vocab_size: src_vocab,
            tgt_vocab_size: tgt_vocab,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return fail(format!("d_model {} not divisible by heads {}", self.d_model, self.heads));
        }
        if self.d_ffn == 0 || self.video_feature_dim == 0 {
            return fail("d_ffn and video_feature_dim must be positive".into());
        }
        if self.frames_per_clip == 0 {
            return fail("frames_per_clip must be at least 1".into());
        }
        if !(self.temperature > 0.0) {
            return fail(format!("temperature must be > 0, got {}", self.temperature));
        }
        if !(self.gaussian_sigma > 0.0) {
            return fail(format!("gaussian_sigma must be > 0, got {}", self.gaussian_sigma));
        }
        if !(self.frame_loss_weight >= 0.0) {
            return fail(format!("frame_loss_weight must be >= 0, got {}", self.frame_loss_weight));
        }
        if !(self.ambiguity_weight >= 1.0) {
            return fail(format!("ambiguity_weight must be >= 1, got {}", self.ambiguity_weight));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.label_smoothing) {
            return fail("dropout and label_smoothing must lie in [0, 1)".into());
        }
        if self.src_vocab_size < 4 || self.tgt_vocab_size < 4 {
            return fail("vocabularies must hold at least the 4 reserved tokens".into());
        }
        Ok(())
    }

    /// Set one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
        let int = || value.parse::<usize>().map_err(|_| bad());
        let real = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "encoder_layers" => self.encoder_layers = int()?,
            "decoder_layers" => self.decoder_layers = int()?,
            "d_model" => self.d_model = int()?,
            "d_ffn" => self.d_ffn = int()?,
            "heads" => self.heads = int()?,
            "dropout" => self.dropout = real()?,
            "label_smoothing" => self.label_smoothing = real()?,
            "video_feature_dim" => self.video_feature_dim = int()?,
            "frames_per_clip" => self.frames_per_clip = int()?,
            "gaussian_halfwidth" => self.gaussian_halfwidth = real()?,
            "gaussian_mu" => self.gaussian_mu = real()?,
            "gaussian_sigma" => self.gaussian_sigma = real()?,
            "temperature" => self.temperature = real()?,
            "frame_loss_weight" => self.frame_loss_weight = real()?,
            "ambiguity_weight" => self.ambiguity_weight = real()?,
            "src_vocab_size" => self.src_vocab_size = int()?,
            "tgt_vocab_size" => self.tgt_vocab_size = int()?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "encoder_layers" => self.encoder_layers.to_string(),
            "decoder_layers" => self.decoder_layers.to_string(),
            "d_model" => self.d_model.to_string(),
            "d_ffn" => self.d_ffn.to_string(),
            "heads" => self.heads.to_string(),
            "dropout" => self.dropout.to_string(),
            "label_smoothing" => self.label_smoothing.to_string(),
            "video_feature_dim" => self.video_feature_dim.to_string(),
            "frames_per_clip" => self.frames_per_clip.to_string(),
            "gaussian_halfwidth" => self.gaussian_halfwidth.to_string(),
            "gaussian_mu" => self.gaussian_mu.to_string(),
            "gaussian_sigma" => self.gaussian_sigma.to_string(),
            "temperature" => self.temperature.to_string(),
            "frame_loss_weight" => self.frame_loss_weight.to_string(),
            "ambiguity_weight" => self.ambiguity_weight.to_string(),
            "src_vocab_size" => self.src_vocab_size.to_string(),
            "tgt_vocab_size" => self.tgt_vocab_size.to_string(),
            _ => return None,
        })
    }

    /// `key = value` lines, one per field, in a fixed order.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap());
        }
        out
    }

    /// Parse `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn keys() -> &'static [&'static str] {
        KEYS
    }
}
