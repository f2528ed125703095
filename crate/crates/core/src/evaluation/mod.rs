//! Beam search, corpus BLEU, ablation runs, frame-attention export and the
//! synthetic disambiguation task.

mod ablation;
mod attention;
mod bleu;
mod decode;
mod synthetic;

pub use ablation::{results_csv, results_report, run_ablation_suite, AblationData, AblationRow, Variant};
pub use attention::{attention_dumps, dumps_to_string, export_attention, AttentionDump};
pub use bleu::{corpus_bleu, Bleu};
pub use decode::{beam_decode, DecodeConfig, Hypothesis};
pub use synthetic::SyntheticTask;
