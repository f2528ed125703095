//! The video-guided translation model: a Transformer encoder-decoder whose
//! encoder output is fused with attended video frames through an elementwise
//! gate, trained with label-smoothed cross entropy, a Gaussian
//! frame-attention KL term and ambiguity-weighted group means.

mod batch;
mod check;
mod config;
pub mod loss;
mod params;
mod safa;

pub use batch::{special, TextBatch, VideoFeatureBatch};
pub use check::gradient_check;
pub use config::ModelConfig;
pub use loss::{
    frame_attention_loss, frame_positions, gaussian_target, group_weights, label_smoothed_loss, total_loss,
    BatchLossBreakdown,
};
pub use params::{check_params, init_params, position_encodings};
pub use safa::{
    decode, encode_fused, encode_text, forward_full, gated_fusion, project_video, selective_attention, Forward,
    ModelOutput,
};
