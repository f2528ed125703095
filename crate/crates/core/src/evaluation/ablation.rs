use std::fmt::Write as _;

use rayon::prelude::*;

use super::bleu::corpus_bleu;
use super::decode::{beam_decode, DecodeConfig};
use crate::corpus::{ClipStore, Vocabulary};
use crate::error::Result;
use crate::model::{init_params, ModelConfig};
use crate::training::{train, Example, TrainConfig};

/// Model variants compared in the ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// Frame-attention loss off (`gamma = 0`).
    NoFrameAttn,
    /// Ambiguity weighting off (`w = 1`).
    NoAmbiAug,
    /// Both off: plain selective attention.
    NoBoth,
    /// Full objective with every video feature set to zero.
    TextOnly,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoFrameAttn,
        Variant::NoAmbiAug,
        Variant::NoBoth,
        Variant::TextOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoFrameAttn => "w/o Frame Attn",
            Variant::NoAmbiAug => "w/o Ambi Aug",
            Variant::NoBoth => "w/o Both",
            Variant::TextOnly => "text-only",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s || v.slug() == s)
    }

    /// Name without spaces or slashes, for command lines and file names.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoFrameAttn => "no-frame-attn",
            Variant::NoAmbiAug => "no-ambi-aug",
            Variant::NoBoth => "no-both",
            Variant::TextOnly => "text-only",
        }
    }

    pub fn configure(self, base: &ModelConfig) -> ModelConfig {
        let mut c = base.clone();
        match self {
            Variant::NoFrameAttn => c.frame_loss_weight = 0.0,
            Variant::NoAmbiAug => c.ambiguity_weight = 1.0,
            Variant::NoBoth => {
                c.frame_loss_weight = 0.0;
                c.ambiguity_weight = 1.0;
            }
            Variant::Full | Variant::TextOnly => {}
        }
        c
    }

    pub fn zero_video(self) -> bool {
        self == Variant::TextOnly
    }
}

/// Everything one ablation run needs; clip indices in the examples refer to
/// `clips`.
pub struct AblationData<'a> {
    pub train: &'a [Example],
    pub valid: &'a [Example],
    pub test: &'a [Example],
    pub test_references: &'a [String],
    pub clips: &'a ClipStore,
    pub tgt_vocab: &'a Vocabulary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub bleu: f64,
    /// Fraction of test hypotheses equal to their reference.
    pub synthetic_accuracy: f64,
    pub steps: usize,
    pub best_val_loss: f64,
}

/// Train and evaluate each variant from the same initial parameters
/// (`init_seed`) and training seed. Variants run in parallel.
pub fn run_ablation_suite(
    data: &AblationData<'_>,
    base: &ModelConfig,
    tc: &TrainConfig,
    dc: &DecodeConfig,
    variants: &[Variant],
    init_seed: u64,
) -> Result<Vec<AblationRow>> {
    let init = init_params(base, init_seed)?;
    let zeros = ClipStore::zeros_like(data.clips);
    variants
        .par_iter()
        .map(|&v| {
            let config = v.configure(base);
            let clips = if v.zero_video() { &zeros } else { data.clips };
            let out = train(&config, init.clone(), data.train, data.valid, clips, tc, &mut ())?;
            let sources: Vec<Vec<usize>> = data.test.iter().map(|e| e.src.clone()).collect();
            let clip_idx: Vec<usize> = data.test.iter().map(|e| e.clip).collect();
            let hyps = beam_decode(&out.params, &config, &sources, clips, &clip_idx, dc)?;
            let texts: Vec<String> = hyps.iter().map(|h| data.tgt_vocab.decode(&h.tokens)).collect();
            let bleu = corpus_bleu(&texts, data.test_references)?;
            let correct = texts.iter().zip(data.test_references).filter(|(h, r)| h.trim() == r.trim()).count();
            Ok(AblationRow {
                variant: v,
                bleu: bleu.score,
                synthetic_accuracy: correct as f64 / texts.len().max(1) as f64,
                steps: out.steps,
                best_val_loss: out.best_val_loss,
            })
        })
        .collect()
}

/// `variant,bleu,synthetic_accuracy` table.
pub fn results_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("variant,bleu,synthetic_accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.2},{:.4}", r.variant.name(), r.bleu, r.synthetic_accuracy);
    }
    s
}

/// Human-readable table. METEOR is listed but not computed.
pub fn results_report(rows: &[AblationRow]) -> String {
    let mut s = format!("{:<16} {:>7} {:>8} {:>9}\n", "variant", "BLEU", "METEOR", "accuracy");
    for r in rows {
        let _ = writeln!(s, "{:<16} {:>7.2} {:>8} {:>9.4}", r.variant.name(), r.bleu, "n/a", r.synthetic_accuracy);
    }
    s.push_str("METEOR needs external linguistic resources and is not computed.\n");
    s
}
