//! Model components against hand computations and a loop-based reimplementation.

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgmt::model::{
    decode, encode_text, forward_full, gated_fusion, init_params, position_encodings, project_video,
    selective_attention, ModelConfig, TextBatch, VideoFeatureBatch,
};
use vgmt::numerics::{Graph, ParamSet, Tensor};

fn set(ps: &mut ParamSet, name: &str, shape: Vec<usize>, data: Vec<f64>) {
    *ps.get_mut(name).unwrap() = Tensor::new(shape, data).unwrap().with_grad();
}

#[test]
fn project_video_hand_product() {
    let config = ModelConfig::tiny(4, 2, 3, 6, 6);
    let mut ps = init_params(&config, 0).unwrap();
    let w = vec![1.0, 0.0, 2.0, -1.0, 0.5, 1.0, 0.0, 3.0, -2.0, 0.0, 1.0, 1.0];
    set(&mut ps, "video_proj", vec![3, 4], w);
    let feats = VideoFeatureBatch::new(1, 2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 0.5]).unwrap();
    let mut g = Graph::new();
    let v = project_video(&mut g, &ps, &feats).unwrap();
    assert_eq!(g.shape(v), &[1, 2, 4]);
    // rows: [1,2,3]·W and [-1,0,0.5]·W
    let expect = [-4.0, 2.0, 5.0, 8.0, -2.0, 0.0, -1.5, 1.5];
    for (a, b) in g.value(v).iter().zip(expect) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
}

#[test]
fn project_video_identity_and_zero() {
    let config = ModelConfig::tiny(3, 2, 3, 6, 6);
    let mut ps = init_params(&config, 0).unwrap();
    set(&mut ps, "video_proj", vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let data = vec![0.3, -1.0, 2.0, 4.0, 5.0, 6.0];
    let mut g = Graph::new();
    let v = project_video(&mut g, &ps, &VideoFeatureBatch::new(1, 2, 3, data.clone()).unwrap()).unwrap();
    assert_eq!(g.value(v), &data[..]);
    let z = project_video(&mut g, &ps, &VideoFeatureBatch::zeros(1, 2, 3)).unwrap();
    assert!(g.value(z).iter().all(|&x| x == 0.0));
    assert!(project_video(&mut g, &ps, &VideoFeatureBatch::zeros(1, 2, 4)).is_err());
}

#[test]
fn selective_attention_hand_values() {
    let mut g = Graph::new();
    let text = g.constant_from(vec![1, 1, 2], vec![1.0, 2.0]).unwrap();
    let video = g.constant_from(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let (attended, attn) = selective_attention(&mut g, text, video).unwrap();
    // scores [1, 2] / sqrt(2)
    let s = 1.0 / 2f64.sqrt();
    let e0 = (s).exp();
    let e1 = (2.0 * s).exp();
    let (p0, p1) = (e0 / (e0 + e1), e1 / (e0 + e1));
    assert_abs_diff_eq!(g.value(attn)[0], p0, epsilon = 1e-15);
    assert_abs_diff_eq!(g.value(attn)[1], p1, epsilon = 1e-15);
    assert_abs_diff_eq!(g.value(attended)[0], p0, epsilon = 1e-15);
    assert_abs_diff_eq!(g.value(attended)[1], p1, epsilon = 1e-15);
}

#[test]
fn selective_attention_degenerate_cases() {
    let mut g = Graph::new();
    let text = g.constant_from(vec![1, 3, 2], vec![1.0, -2.0, 0.5, 0.1, 3.0, 3.0]).unwrap();
    let one = g.constant_from(vec![1, 1, 2], vec![0.7, -0.2]).unwrap();
    let (att, a) = selective_attention(&mut g, text, one).unwrap();
    assert!(g.value(a).iter().all(|&x| x == 1.0));
    assert_eq!(g.value(att), &[0.7, -0.2, 0.7, -0.2, 0.7, -0.2]);
    let same = g.constant_from(vec![1, 3, 2], vec![0.4, 0.9, 0.4, 0.9, 0.4, 0.9]).unwrap();
    let (att, _) = selective_attention(&mut g, text, same).unwrap();
    for v in g.value(att).chunks(2) {
        assert_abs_diff_eq!(v[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.9, epsilon = 1e-15);
    }
}

#[test]
fn gated_fusion_hand_values() {
    let config = ModelConfig::tiny(2, 2, 2, 6, 6);
    let mut ps = init_params(&config, 0).unwrap();
    set(&mut ps, "gate_u", vec![2, 2], vec![1.0, 0.0, 0.5, -1.0]);
    set(&mut ps, "gate_v", vec![2, 2], vec![0.0, 2.0, 1.0, 0.0]);
    let mut g = Graph::new();
    let text = g.constant_from(vec![1, 1, 2], vec![1.0, 2.0]).unwrap();
    let attended = g.constant_from(vec![1, 1, 2], vec![-1.0, 0.5]).unwrap();
    let (out, lambda) = gated_fusion(&mut g, &ps, text, attended).unwrap();
    // text·U = [2, -2]; attended·V = [0.5, -2]
    let l0 = 1.0 / (1.0 + (-2.5f64).exp());
    let l1 = 1.0 / (1.0 + 4f64.exp());
    assert_abs_diff_eq!(g.value(lambda)[0], l0, epsilon = 1e-15);
    assert_abs_diff_eq!(g.value(lambda)[1], l1, epsilon = 1e-15);
    assert_abs_diff_eq!(g.value(out)[0], (1.0 - l0) * 1.0 + l0 * -1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(g.value(out)[1], (1.0 - l1) * 2.0 + l1 * 0.5, epsilon = 1e-15);
}

#[test]
fn gated_fusion_zero_gates_average_and_closed_gate_is_text() {
    let config = ModelConfig::tiny(2, 2, 2, 6, 6);
    let mut ps = init_params(&config, 0).unwrap();
    set(&mut ps, "gate_u", vec![2, 2], vec![0.0; 4]);
    set(&mut ps, "gate_v", vec![2, 2], vec![0.0; 4]);
    let mut g = Graph::new();
    let text = g.constant_from(vec![1, 1, 2], vec![1.0, 3.0]).unwrap();
    let attended = g.constant_from(vec![1, 1, 2], vec![-1.0, 1.0]).unwrap();
    let (out, lambda) = gated_fusion(&mut g, &ps, text, attended).unwrap();
    assert_eq!(g.value(lambda), &[0.5, 0.5]);
    assert_eq!(g.value(out), &[0.0, 2.0]);

    set(&mut ps, "gate_u", vec![2, 2], vec![-100.0, 0.0, 0.0, -100.0]);
    let (out, lambda) = gated_fusion(&mut g, &ps, text, attended).unwrap();
    assert!(g.value(lambda).iter().all(|&l| l > 0.0 && l < 1e-40));
    for (a, b) in g.value(out).iter().zip([1.0, 3.0]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-40);
    }
}

// ---------------------------------------------------------------------------
// Straight-line reimplementation with nested loops and no graph.

type Mat = Vec<Vec<f64>>;

fn p2(ps: &ParamSet, name: &str) -> Mat {
    let t = ps.get(name).unwrap();
    let cols = t.shape()[1];
    t.data().chunks(cols).map(<[f64]>::to_vec).collect()
}

fn p1(ps: &ParamSet, name: &str) -> Vec<f64> {
    ps.get(name).unwrap().data().to_vec()
}

fn mm(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

fn affine(x: &Mat, ps: &ParamSet, w: &str, b: &str) -> Mat {
    let bias = p1(ps, b);
    mm(x, &p2(ps, w))
        .into_iter()
        .map(|r| r.iter().zip(&bias).map(|(a, c)| a + c).collect())
        .collect()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn norm(x: &Mat, ps: &ParamSet, prefix: &str) -> Mat {
    let gain = p1(ps, &format!("{prefix}.gain"));
    let bias = p1(ps, &format!("{prefix}.bias"));
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            r.iter()
                .enumerate()
                .map(|(i, v)| (v - mean) / (var + 1e-5).sqrt() * gain[i] + bias[i])
                .collect()
        })
        .collect()
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

fn attention(ps: &ParamSet, prefix: &str, q_in: &Mat, kv: &Mat, heads: usize, causal: bool) -> Mat {
    let q = affine(q_in, ps, &format!("{prefix}.wq"), &format!("{prefix}.bq"));
    let k = affine(kv, ps, &format!("{prefix}.wk"), &format!("{prefix}.bk"));
    let v = affine(kv, ps, &format!("{prefix}.wv"), &format!("{prefix}.bv"));
    let d = q[0].len();
    let dh = d / heads;
    let mut out = vec![vec![0.0; d]; q.len()];
    for h in 0..heads {
        let r = h * dh..(h + 1) * dh;
        for (i, qi) in q.iter().enumerate() {
            let scores: Vec<f64> = k
                .iter()
                .enumerate()
                .filter(|(j, _)| !causal || *j <= i)
                .map(|(_, kj)| r.clone().map(|c| qi[c] * kj[c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let w = softmax(&scores);
            for c in r.clone() {
                out[i][c] = w.iter().enumerate().map(|(j, wj)| wj * v[j][c]).sum();
            }
        }
    }
    affine(&out, ps, &format!("{prefix}.wo"), &format!("{prefix}.bo"))
}

fn ffn(ps: &ParamSet, prefix: &str, x: &Mat) -> Mat {
    let h: Mat = affine(x, ps, &format!("{prefix}.w1"), &format!("{prefix}.b1"))
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    affine(&h, ps, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
}

fn embed(ps: &ParamSet, table: &str, ids: &[usize], d: usize) -> Mat {
    let t = p2(ps, table);
    let pe = position_encodings(ids.len(), d);
    ids.iter()
        .enumerate()
        .map(|(i, &id)| (0..d).map(|c| t[id][c] * (d as f64).sqrt() + pe[i * d + c]).collect())
        .collect()
}

/// One unpadded sample through the whole model: logits `[T][V]`.
fn reference_forward(ps: &ParamSet, c: &ModelConfig, src: &[usize], tgt_in: &[usize], frames: &Mat) -> Mat {
    let d = c.d_model;
    let mut x = embed(ps, "src_embed", src, d);
    let a = attention(ps, "enc.0.attn", &x, &x, c.heads, false);
    x = norm(&add(&x, &a), ps, "enc.0.ln1");
    let f = ffn(ps, "enc.0.ffn", &x);
    x = norm(&add(&x, &f), ps, "enc.0.ln2");

    let video = mm(frames, &p2(ps, "video_proj"));
    let u = p2(ps, "gate_u");
    let v = p2(ps, "gate_v");
    let mut fused = Vec::new();
    for t in &x {
        let scores: Vec<f64> = video
            .iter()
            .map(|fr| fr.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / (d as f64).sqrt())
            .collect();
        let w = softmax(&scores);
        let att: Vec<f64> = (0..d).map(|k| w.iter().zip(&video).map(|(wi, fr)| wi * fr[k]).sum()).collect();
        let tu = mm(&vec![t.clone()], &u);
        let av = mm(&vec![att.clone()], &v);
        fused.push(
            (0..d)
                .map(|k| {
                    let lam = 1.0 / (1.0 + (-(tu[0][k] + av[0][k])).exp());
                    (1.0 - lam) * t[k] + lam * att[k]
                })
                .collect(),
        );
    }

    let mut y = embed(ps, "tgt_embed", tgt_in, d);
    let a = attention(ps, "dec.0.self_attn", &y, &y, c.heads, true);
    y = norm(&add(&y, &a), ps, "dec.0.ln1");
    let a = attention(ps, "dec.0.cross_attn", &y, &fused, c.heads, false);
    y = norm(&add(&y, &a), ps, "dec.0.ln2");
    let f = ffn(ps, "dec.0.ffn", &y);
    y = norm(&add(&y, &f), ps, "dec.0.ln3");
    mm(&y, &p2(ps, "out_proj"))
}

fn randomize(ps: &mut ParamSet, rng: &mut ChaCha8Rng) {
    for (_, t) in ps.iter_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
}

#[test]
fn matches_straight_line_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let config = ModelConfig::tiny(2, 3, 3, 7, 6);
        let mut ps = init_params(&config, case).unwrap();
        randomize(&mut ps, &mut rng);
        let src: Vec<Vec<usize>> = vec![
            (0..rng.random_range(1..5)).map(|_| rng.random_range(0..7)).collect(),
            (0..rng.random_range(1..5)).map(|_| rng.random_range(0..7)).collect(),
        ];
        let tgt: Vec<Vec<usize>> = vec![
            (0..rng.random_range(0..4)).map(|_| rng.random_range(4..6)).collect(),
            (0..rng.random_range(0..4)).map(|_| rng.random_range(4..6)).collect(),
        ];
        let batch = TextBatch::from_pairs(&src, &tgt, &[false, true]).unwrap();
        let feats: Vec<f64> = (0..2 * 3 * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let feats = VideoFeatureBatch::new(2, 3, 3, feats).unwrap();
        let mut g = Graph::new();
        let out = forward_full(&mut g, &ps, &config, &batch, &feats).unwrap();
        let logits = g.value(out.output.logits);
        for i in 0..2 {
            let t = tgt[i].len() + 1;
            let tgt_in = &batch.tgt_in[i * batch.tgt_len..i * batch.tgt_len + t];
            let frames: Mat = feats.clip(i).chunks(3).map(<[f64]>::to_vec).collect();
            let expect = reference_forward(&ps, &config, &src[i], tgt_in, &frames);
            for (j, row) in expect.iter().enumerate() {
                for (k, e) in row.iter().enumerate() {
                    let got = logits[(i * batch.tgt_len + j) * 6 + k];
                    assert!((got - e).abs() < 1e-10, "case {case} sample {i} pos {j} vocab {k}: {got} vs {e}");
                }
            }
        }
    }
}

#[test]
fn single_token_encoder_matches_reference() {
    let config = ModelConfig::tiny(2, 1, 2, 5, 5);
    let mut ps = init_params(&config, 3).unwrap();
    randomize(&mut ps, &mut ChaCha8Rng::seed_from_u64(8));
    let batch = TextBatch::from_pairs(&[vec![4]], &[vec![]], &[false]).unwrap();
    let mut g = Graph::new();
    let h = encode_text(&mut g, &ps, &config, &batch).unwrap();
    let mut x = embed(&ps, "src_embed", &[4], 2);
    let a = attention(&ps, "enc.0.attn", &x, &x, config.heads, false);
    x = norm(&add(&x, &a), &ps, "enc.0.ln1");
    let f = ffn(&ps, "enc.0.ffn", &x);
    x = norm(&add(&x, &f), &ps, "enc.0.ln2");
    for (a, b) in g.value(h).iter().zip(&x[0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

// ---------------------------------------------------------------------------

fn sample_problem() -> (ModelConfig, ParamSet, TextBatch, VideoFeatureBatch) {
    let config = ModelConfig::tiny(8, 4, 5, 10, 9);
    let ps = init_params(&config, 1).unwrap();
    let batch = TextBatch::from_pairs(
        &[vec![4, 5, 6], vec![4, 5, 6], vec![7]],
        &[vec![4, 5, 6], vec![4, 5, 6], vec![8, 7]],
        &[true, true, false],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let clip: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let other: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let feats = VideoFeatureBatch::stack(&[&clip, &clip, &other], 4, 5).unwrap();
    (config, ps, batch, feats)
}

#[test]
fn shapes_and_duplicate_rows() {
    let (config, ps, batch, feats) = sample_problem();
    let mut g = Graph::new();
    let out = forward_full(&mut g, &ps, &config, &batch, &feats).unwrap();
    assert_eq!(g.shape(out.output.logits), &[3, 4, 9]);
    assert_eq!(g.shape(out.output.frame_attention), &[3, 3, 4]);
    assert_eq!(g.shape(out.output.gate), &[3, 3, 8]);
    let logits = g.value(out.output.logits);
    assert_eq!(logits[..36], logits[36..72]);
    let h = encode_text(&mut g, &ps, &config, &batch).unwrap();
    let h = g.value(h);
    assert_eq!(h[..24], h[24..48]);
}

#[test]
fn attention_rows_are_distributions_and_gates_open() {
    let (config, ps, batch, feats) = sample_problem();
    let mut g = Graph::new();
    let out = forward_full(&mut g, &ps, &config, &batch, &feats).unwrap();
    for row in g.value(out.output.frame_attention).chunks(4) {
        assert!(row.iter().all(|&p| p >= 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(g.value(out.output.gate).iter().all(|&l| l > 0.0 && l < 1.0));
}

#[test]
fn decoder_is_causal() {
    let (config, ps, batch, feats) = sample_problem();
    let mut g = Graph::new();
    let (fused, _, _) = vgmt::model::encode_fused(&mut g, &ps, &config, &batch, &feats).unwrap();
    let a = decode(&mut g, &ps, &config, fused, &batch.src_mask, &batch.tgt_in, &batch.tgt_mask, 4).unwrap();
    let mut changed = batch.tgt_in.clone();
    changed[2] = 9 - 1; // position 2 of sample 0
    let b = decode(&mut g, &ps, &config, fused, &batch.src_mask, &changed, &batch.tgt_mask, 4).unwrap();
    let (a, b) = (g.value(a).to_vec(), g.value(b).to_vec());
    assert_eq!(a[..2 * 9], b[..2 * 9]);
    assert_ne!(a[2 * 9..3 * 9], b[2 * 9..3 * 9]);
}

#[test]
fn eval_mode_is_deterministic() {
    let (mut config, ps, batch, feats) = sample_problem();
    config.dropout = 0.3;
    let run = || {
        let mut g = Graph::new();
        let f = forward_full(&mut g, &ps, &config, &batch, &feats).unwrap();
        (g.value(f.output.logits).to_vec(), g.scalar(f.total))
    };
    assert_eq!(run(), run());
}

#[test]
fn ablation_identity_matches_plain_loss() {
    let (mut config, ps, batch, feats) = sample_problem();
    config.frame_loss_weight = 0.0;
    config.ambiguity_weight = 1.0;
    let mut g = Graph::new();
    let f = forward_full(&mut g, &ps, &config, &batch, &feats).unwrap();
    let per = g.value(f.per_sample).to_vec();
    // group means with w=1: (mean of ambiguous) + (mean of unambiguous)
    let expect = (per[0] + per[1]) / 2.0 + per[2];
    assert!((g.scalar(f.total) - expect).abs() < 1e-12);
    assert_eq!(f.losses.ambiguous + f.losses.unambiguous, 3);
}

#[test]
fn out_of_range_ids_are_rejected() {
    let (config, ps, _, feats) = sample_problem();
    let batch = TextBatch::from_pairs(&[vec![40], vec![4], vec![4]], &[vec![4], vec![4], vec![4]], &[false; 3]).unwrap();
    let mut g = Graph::new();
    let err = forward_full(&mut g, &ps, &config, &batch, &feats).unwrap_err();
    assert!(matches!(err, vgmt::Error::Vocabulary { .. }), "{err:?}");
}
