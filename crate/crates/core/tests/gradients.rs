//! Analytic gradients against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgmt::model::{
    frame_attention_loss, forward_full, gaussian_target, init_params, ModelConfig, TextBatch, VideoFeatureBatch,
};
use vgmt::numerics::{check_gradients, Graph, ParamSet, Primitive, Tensor, Var};
use vgmt::Result;

fn random_problem(seed: u64, d_model: usize, frames: usize) -> (ModelConfig, ParamSet, TextBatch, VideoFeatureBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = ModelConfig::tiny(d_model, frames, 5, 9, 8);
    config.label_smoothing = 0.1;
    config.frame_loss_weight = 0.5;
    config.ambiguity_weight = 2.0;
    let params = init_params(&config, seed).unwrap();
    let src = vec![vec![4, 5, 6], vec![7, 8]];
    let tgt = vec![vec![4, 5], vec![6, 7, 4]];
    let batch = TextBatch::from_pairs(&src, &tgt, &[true, false]).unwrap();
    let data = (0..2 * frames * 5).map(|_| rng.random_range(-1.5..1.5)).collect();
    let feats = VideoFeatureBatch::new(2, frames, 5, data).unwrap();
    (config, params, batch, feats)
}

#[test]
fn full_loss_matches_finite_differences() {
    for seed in 0..3 {
        let (config, mut params, batch, feats) = random_problem(seed, 8, 4);
        let report = check_gradients(
            |g, p| Ok(forward_full(g, p, &config, &batch, &feats)?.total),
            &mut params,
            1e-4,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-3, "seed {seed}: {report:?}");
    }
}

fn sample(rng: &mut ChaCha8Rng, n: usize, positive: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = rng.random_range(0.05..2.0);
            if positive || rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// `sum(primitive(inputs) * w)` for a fixed random `w`.
fn check_primitive(name: &str, prim: Primitive, shapes: &[Vec<usize>], positive: bool, trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 977);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut ps = ParamSet::new();
        for (i, s) in shapes.iter().enumerate() {
            let n = s.iter().product();
            ps.insert(format!("x{i}"), Tensor::new(s.clone(), sample(&mut rng, n, positive)).unwrap().with_grad());
        }
        let weights_seed: u64 = rng.random();
        let prim = prim.clone();
        let f = |g: &mut Graph, p: &ParamSet| -> Result<Var> {
            let xs: Vec<Var> = (0..shapes.len()).map(|i| g.param(p, i)).collect::<Result<_>>()?;
            let y = g.apply(prim.clone(), &xs)?;
            let mut wr = ChaCha8Rng::seed_from_u64(weights_seed);
            let shape = g.shape(y).to_vec();
            let n = g.value(y).len();
            let w = g.constant_from(shape, (0..n).map(|_| wr.random_range(-1.0..1.0)).collect())?;
            let t = g.mul(y, w)?;
            g.sum(t)
        };
        let r = check_gradients(f, &mut ps, 1e-5).unwrap();
        worst = worst.max(r.max_relative_error);
    }
    assert!(worst < 1e-4, "{name}: max relative error {worst}");
}

#[test]
fn every_primitive_matches_finite_differences() {
    let n = 100;
    check_primitive("matmul", Primitive::MatMul, &[vec![2, 3, 4], vec![4, 2]], false, n);
    check_primitive("bmm", Primitive::MatMul, &[vec![2, 3, 4], vec![2, 4, 2]], false, n);
    check_primitive("add", Primitive::Add, &[vec![3, 4], vec![4]], false, n);
    check_primitive("sub", Primitive::Sub, &[vec![2, 4], vec![2, 4]], false, n);
    check_primitive("mul", Primitive::Mul, &[vec![3, 2], vec![2]], false, n);
    check_primitive("scale", Primitive::Scale(-1.7), &[vec![5]], false, n);
    check_primitive("softmax", Primitive::Softmax, &[vec![3, 5]], false, n);
    check_primitive("log_softmax", Primitive::LogSoftmax, &[vec![3, 5]], false, n);
    check_primitive("sigmoid", Primitive::Sigmoid, &[vec![6]], false, n);
    check_primitive("relu", Primitive::Relu, &[vec![6]], false, n);
    check_primitive("log", Primitive::Log, &[vec![6]], true, n);
    check_primitive("clamp_min", Primitive::ClampMin(0.0), &[vec![6]], false, n);
    check_primitive("layer_norm", Primitive::LayerNorm, &[vec![3, 6]], false, n);
    check_primitive("embedding", Primitive::Embedding(vec![2, 0, 2, 3]), &[vec![4, 3]], false, n);
    check_primitive("concat", Primitive::Concat, &[vec![2, 3], vec![2, 2]], false, n);
    check_primitive("narrow", Primitive::Narrow { start: 1, len: 2 }, &[vec![3, 4]], false, n);
    check_primitive("transpose", Primitive::Transpose, &[vec![2, 3, 4]], false, n);
    check_primitive("sum_last", Primitive::SumLast, &[vec![3, 4]], false, n);
    check_primitive("mean_last", Primitive::MeanLast, &[vec![3, 4]], false, n);
    check_primitive("sum", Primitive::Sum, &[vec![3, 4]], false, n);
    check_primitive("mean", Primitive::Mean, &[vec![3, 4]], false, n);
    check_primitive("reshape", Primitive::Reshape(vec![4, 3]), &[vec![3, 4]], false, n);
}

#[test]
fn masked_softmax_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let mut ps = ParamSet::new();
        ps.insert("x", Tensor::new(vec![2, 4], sample(&mut rng, 8, false)).unwrap().with_grad());
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = check_gradients(
            |g, p| {
                let x = g.param_named(p, "x")?;
                let m = g.apply(Primitive::MaskedFill(vec![true, false, false, true, false, true, false, false]), &[x])?;
                let a = g.softmax(m)?;
                let w = g.constant_from(vec![2, 4], w.clone())?;
                let t = g.mul(a, w)?;
                g.sum(t)
            },
            &mut ps,
            1e-5,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }
}

#[test]
fn frame_attention_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ps = ParamSet::new();
    ps.insert("logits", Tensor::new(vec![2, 3, 6], sample(&mut rng, 36, false)).unwrap().with_grad());
    let target = gaussian_target(6, 3.0, 1.0, 1.0, 0.5);
    let mask = [true, true, false, true, true, true];
    let r = check_gradients(
        |g, p| {
            let l = g.param_named(p, "logits")?;
            let a = g.softmax(l)?;
            frame_attention_loss(g, a, &target, &mask)
        },
        &mut ps,
        1e-4,
    )
    .unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");
}

#[test]
fn training_mode_is_reproducible_with_dropout() {
    let (mut config, params, batch, feats) = random_problem(9, 8, 4);
    config.dropout = 0.3;
    let run = || {
        let mut g = Graph::training(77);
        let f = forward_full(&mut g, &params, &config, &batch, &feats).unwrap();
        g.value(f.output.logits).to_vec()
    };
    let a = run();
    let b = run();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let mut g = Graph::new();
    let f = forward_full(&mut g, &params, &config, &batch, &feats).unwrap();
    assert_ne!(g.value(f.output.logits), &a[..]);
}
