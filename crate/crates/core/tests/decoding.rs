//! Beam search and attention export against full teacher-forced forward
//! passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgmt::corpus::ClipStore;
use vgmt::evaluation::{attention_dumps, beam_decode, export_attention, AttentionDump, DecodeConfig};
use vgmt::model::{forward_full, init_params, special, ModelConfig, TextBatch, VideoFeatureBatch};
use vgmt::numerics::{Graph, ParamSet};

struct Setup {
    config: ModelConfig,
    params: ParamSet,
    sources: Vec<Vec<usize>>,
    clips: ClipStore,
}

fn setup(seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig::tiny(8, 4, 5, 12, 10);
    let mut params = init_params(&config, seed).unwrap();
    // widen the weights so the output distribution is far from uniform
    for (_, t) in params.iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v *= 2.5);
    }
    let mut clips = ClipStore::new(4, 5);
    let sources = (0..4)
        .map(|_| {
            let clip: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            clips.push(&clip).unwrap();
            (0..rng.random_range(1..6)).map(|_| rng.random_range(4..12)).collect()
        })
        .collect();
    Setup { config, params, sources, clips }
}

/// Log-probabilities of the next token after `prefix`, from a full forward
/// pass of the model on (source, prefix).
fn next_log_probs(s: &Setup, i: usize, prefix: &[usize]) -> Vec<f64> {
    let batch = TextBatch::from_pairs(&[s.sources[i].clone()], &[prefix.to_vec()], &[false]).unwrap();
    let feats = VideoFeatureBatch::new(1, 4, 5, s.clips.clip(i).to_vec()).unwrap();
    let mut g = Graph::new();
    let f = forward_full(&mut g, &s.params, &s.config, &batch, &feats).unwrap();
    let v = s.config.tgt_vocab_size;
    let row = &g.value(f.output.logits)[prefix.len() * v..(prefix.len() + 1) * v];
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

fn greedy(s: &Setup, i: usize, max_len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for _ in 0..max_len {
        let lp = next_log_probs(s, i, &out);
        let best = (0..lp.len())
            .filter(|&t| t != special::PAD && t != special::BOS)
            .fold(None, |acc: Option<usize>, t| match acc {
                Some(b) if lp[b] >= lp[t] => Some(b),
                _ => Some(t),
            })
            .unwrap();
        if best == special::EOS {
            break;
        }
        out.push(best);
    }
    out
}

#[test]
fn beam_one_is_greedy() {
    for seed in 0..5 {
        let s = setup(seed);
        let dc = DecodeConfig { beam_size: 1, max_length: 8, length_penalty: 1.0 };
        let clips: Vec<usize> = (0..4).collect();
        let hyps = beam_decode(&s.params, &s.config, &s.sources, &s.clips, &clips, &dc).unwrap();
        for (i, h) in hyps.iter().enumerate() {
            assert_eq!(h.tokens, greedy(&s, i, 8), "seed {seed} sentence {i}");
        }
    }
}

#[test]
fn hypothesis_scores_match_teacher_forcing() {
    for seed in 0..5 {
        let s = setup(seed);
        let dc = DecodeConfig { beam_size: 4, max_length: 8, length_penalty: 1.0 };
        let clips: Vec<usize> = (0..4).collect();
        let hyps = beam_decode(&s.params, &s.config, &s.sources, &s.clips, &clips, &dc).unwrap();
        for (i, h) in hyps.iter().enumerate() {
            let mut total = 0.0;
            for p in 0..h.tokens.len() {
                total += next_log_probs(&s, i, &h.tokens[..p])[h.tokens[p]];
            }
            let ended = h.tokens.len() < 8;
            if ended {
                total += next_log_probs(&s, i, &h.tokens)[special::EOS];
            }
            assert!((h.log_prob - total).abs() < 1e-10, "seed {seed} sentence {i}: {} vs {total}", h.log_prob);
            let len = (h.tokens.len() + ended as usize).max(1) as f64;
            assert!((h.score - h.log_prob / len).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_export_round_trips_bit_for_bit() {
    let s = setup(2);
    let tgt = vec![vec![4, 5]; 4];
    let batch = TextBatch::from_pairs(&s.sources, &tgt, &[false; 4]).unwrap();
    let all: Vec<&[f64]> = (0..4).map(|i| s.clips.clip(i)).collect();
    let feats = VideoFeatureBatch::stack(&all, 4, 5).unwrap();
    let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
    let tokens: Vec<Vec<String>> = s.sources.iter().map(|x| x.iter().map(|t| t.to_string()).collect()).collect();
    let dumps = attention_dumps(&s.params, &s.config, &batch, &feats, &ids, &tokens).unwrap();
    for (d, src) in dumps.iter().zip(&s.sources) {
        assert_eq!(d.attention.len(), src.len() * 4);
        for row in d.attention.chunks(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("attention.jsonl");
    export_attention(&dumps, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back: Vec<AttentionDump> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back.len(), dumps.len());
    for (a, b) in back.iter().zip(&dumps) {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.attention), bits(&b.attention));
        assert_eq!(bits(&a.frame_weights), bits(&b.frame_weights));
        assert_eq!(a.argmax_frame(), b.argmax_frame());
    }
}
