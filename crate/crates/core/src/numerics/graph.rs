//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every primitive application in execution order, so the
//! node list is already topologically sorted. Values are computed eagerly;
//! [`Graph::backward`] walks the tape in reverse and accumulates gradients
//! into the [`ParamSet`] the parameters were read from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{ParamSet, Tensor};
use crate::error::{Error, Result};

/// Fill value used by masked attention logits. Finite so that every node stays
/// finite; `exp` of it underflows to exactly zero after max subtraction.
pub const MASK_VALUE: f64 = -1e30;

const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A primitive together with its non-tensor attributes.
#[derive(Clone, Debug)]
pub enum Primitive {
    MatMul,
    Add,
    Sub,
    Mul,
    Scale(f64),
    Softmax,
    LogSoftmax,
    Sigmoid,
    Relu,
    Log,
    ClampMin(f64),
    LayerNorm,
    Embedding(Vec<usize>),
    Dropout(f64),
    Concat,
    Narrow { start: usize, len: usize },
    Transpose,
    MaskedFill(Vec<bool>),
    SumLast,
    MeanLast,
    Sum,
    Mean,
    Reshape(Vec<usize>),
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Softmax(Var),
    LogSoftmax(Var),
    Sigmoid(Var),
    Relu(Var),
    Log(Var),
    ClampMin(Var, f64),
    LayerNorm { x: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Embedding { table: Var, ids: Vec<usize> },
    Dropout { x: Var, mask: Vec<f64> },
    Concat(Vec<Var>),
    Narrow { x: Var, start: usize },
    Transpose(Var),
    MaskedFill { x: Var, mask: Vec<bool> },
    SumLast(Var),
    MeanLast(Var),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::Log(_) => "log",
            Op::ClampMin(..) => "clamp_min",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Embedding { .. } => "embedding",
            Op::Dropout { .. } => "dropout",
            Op::Concat(_) => "concat",
            Op::Narrow { .. } => "narrow",
            Op::Transpose(_) => "transpose",
            Op::MaskedFill { .. } => "masked_fill",
            Op::SumLast(_) => "sum_last",
            Op::MeanLast(_) => "mean_last",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::Reshape(_) => "reshape",
        }
    }
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// The computation record for one forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    dropout_seed: Option<u64>,
    dropout_calls: u64,
    backward_done: bool,
}

fn last_dim(shape: &[usize]) -> usize {
    shape.last().copied().unwrap_or(1)
}

fn check_finite(op: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize, f: impl FnOnce(&mut [f64])) {
    let buf = slot.get_or_insert_with(|| vec![0.0; len]);
    f(buf);
}

impl Graph {
    /// A graph in evaluation mode: dropout is the identity.
    pub fn new() -> Self {
        Self::default()
    }

    /// A graph in training mode. Dropout masks come from a ChaCha8 stream
    /// keyed by `seed`, one stream per dropout application.
    pub fn training(seed: u64) -> Self {
        Graph {
            dropout_seed: Some(seed),
            ..Self::default()
        }
    }

    pub fn is_training(&self) -> bool {
        self.dropout_seed.is_some()
    }

    /// Discard the record so the graph can be reused for a fresh pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.dropout_calls = 0;
        self.backward_done = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Primitive names in recorded (topological) order.
    pub fn primitives(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.nodes.iter().map(|n| n.op.name())
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape is consistent")
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> Result<Var> {
        check_finite(op.name(), &value)?;
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, tensor: Tensor) -> Result<Var> {
        let shape = tensor.shape().to_vec();
        self.push(shape, tensor.into_data(), Op::Constant, false)
    }

    pub fn constant_from(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        self.constant(Tensor::new(shape, data)?)
    }

    /// Read parameter `index` of `params` into the graph.
    pub fn param(&mut self, params: &ParamSet, index: usize) -> Result<Var> {
        let t = params.by_index(index);
        self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            Op::Param(index),
            t.requires_grad,
        )
    }

    pub fn param_named(&mut self, params: &ParamSet, name: &str) -> Result<Var> {
        let index = params.require(name)?;
        self.param(params, index)
    }

    /// Apply a primitive by id. Equivalent to calling the dedicated method.
    pub fn apply(&mut self, primitive: Primitive, inputs: &[Var]) -> Result<Var> {
        let got = inputs.len();
        let arity = |n: usize| -> Result<()> {
            if got == n {
                Ok(())
            } else {
                Err(Error::shape("apply", format!("primitive takes {n} inputs, got {got}")))
            }
        };
        match primitive {
            Primitive::Concat => self.concat(inputs),
            Primitive::MatMul => arity(2).and_then(|_| self.matmul(inputs[0], inputs[1])),
            Primitive::Add => arity(2).and_then(|_| self.add(inputs[0], inputs[1])),
            Primitive::Sub => arity(2).and_then(|_| self.sub(inputs[0], inputs[1])),
            Primitive::Mul => arity(2).and_then(|_| self.mul(inputs[0], inputs[1])),
            Primitive::Embedding(ids) => arity(1).and_then(|_| self.embedding(inputs[0], &ids)),
            ref p => {
                arity(1)?;
                let x = inputs[0];
                match p {
                    Primitive::Scale(c) => self.scale(x, *c),
                    Primitive::Softmax => self.softmax(x),
                    Primitive::LogSoftmax => self.log_softmax(x),
                    Primitive::Sigmoid => self.sigmoid(x),
                    Primitive::Relu => self.relu(x),
                    Primitive::Log => self.log(x),
                    Primitive::ClampMin(f) => self.clamp_min(x, *f),
                    Primitive::LayerNorm => self.layer_norm(x),
                    Primitive::Dropout(r) => self.dropout(x, *r),
                    Primitive::Narrow { start, len } => self.narrow(x, *start, *len),
                    Primitive::Transpose => self.transpose(x),
                    Primitive::MaskedFill(m) => self.masked_fill(x, m.clone()),
                    Primitive::SumLast => self.sum_last(x),
                    Primitive::MeanLast => self.mean_last(x),
                    Primitive::Sum => self.sum(x),
                    Primitive::Mean => self.mean(x),
                    Primitive::Reshape(s) => self.reshape(x, s.clone()),
                    _ => unreachable!(),
                }
            }
        }
    }

    /// Batched matrix product over the last two axes. `b` is either a plain
    /// `[k, n]` matrix shared across the batch or has the same leading axes
    /// as `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 || sb.len() < 2 {
            return Err(Error::shape("matmul", format!("rank < 2: {sa:?} x {sb:?}")));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != kb {
            return Err(Error::shape(
                "matmul",
                format!("contraction axis {k} vs {kb} ({sa:?} x {sb:?})"),
            ));
        }
        let shared = sb.len() == 2;
        if !shared && sb[..sb.len() - 2] != sa[..sa.len() - 2] {
            return Err(Error::shape("matmul", format!("batch axes {sa:?} vs {sb:?}")));
        }
        let batch: usize = sa[..sa.len() - 2].iter().product();
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; batch * m * n];
        for bi in 0..batch {
            let ao = &av[bi * m * k..(bi + 1) * m * k];
            let bo = if shared { bv } else { &bv[bi * k * n..(bi + 1) * k * n] };
            let co = &mut out[bi * m * n..(bi + 1) * m * n];
            matmul_into(ao, bo, co, m, k, n);
        }
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(n);
        let ng = self.ng(a) || self.ng(b);
        self.push(shape, out, Op::MatMul(a, b), ng)
    }

    fn broadcast_check(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sb.len() <= sa.len() && sa[sa.len() - sb.len()..] == *sb {
            Ok(())
        } else {
            Err(Error::shape(op, format!("{sa:?} vs {sb:?} (rhs must be a suffix of lhs)")))
        }
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        mk: fn(Var, Var) -> Op,
    ) -> Result<Var> {
        self.broadcast_check(op, a, b)?;
        let av = self.value(a);
        let bv = self.value(b);
        let nb = bv.len();
        let out: Vec<f64> = if nb == av.len() {
            av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect()
        } else {
            av.iter().enumerate().map(|(i, &x)| f(x, bv[i % nb])).collect()
        };
        let shape = self.shape(a).to_vec();
        let ng = self.ng(a) || self.ng(b);
        self.push(shape, out, mk(a, b), ng)
    }

    /// Elementwise sum; `b` broadcasts over the leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x).iter().map(|v| v * c).collect();
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, out, Op::Scale(x, c), ng)
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let out = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, out, op, ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::ln, Op::Log(x))
    }

    /// `max(x, floor)` elementwise; gradient flows only where `x > floor`.
    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Result<Var> {
        self.unary(x, |v| v.max(floor), Op::ClampMin(x, floor))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let d = last_dim(self.shape(x));
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(d) {
            softmax_in_place(row);
        }
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, out, Op::Softmax(x), ng)
    }

    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let d = last_dim(self.shape(x));
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(d) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, out, Op::LogSoftmax(x), ng)
    }

    /// Normalize the last axis to zero mean and unit variance (no affine).
    pub fn layer_norm(&mut self, x: Var) -> Result<Var> {
        let d = last_dim(self.shape(x));
        let xv = self.value(x);
        let rows = xv.len() / d.max(1);
        let mut xhat = Vec::with_capacity(xv.len());
        let mut inv_std = Vec::with_capacity(rows);
        for row in xv.chunks(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            xhat.extend(row.iter().map(|v| (v - mean) * is));
        }
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        let out = xhat.clone();
        self.push(shape, out, Op::LayerNorm { x, xhat, inv_std }, ng)
    }

    /// Row lookup: `table` is `[vocab, d]`, output is `[ids.len(), d]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let st = self.shape(table);
        if st.len() != 2 {
            return Err(Error::shape("embedding", format!("table must be rank 2, got {st:?}")));
        }
        let (vocab, d) = (st[0], st[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(Error::Vocabulary { id: bad, size: vocab });
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        let ng = self.ng(table);
        self.push(
            vec![ids.len(), d],
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            ng,
        )
    }

    /// Inverted dropout. Identity in evaluation mode or when `rate == 0`.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        let Some(seed) = self.dropout_seed else {
            return Ok(x);
        };
        if rate == 0.0 {
            return Ok(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.dropout_calls);
        self.dropout_calls += 1;
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let out = self.value(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, out, Op::Dropout { x, mask }, ng)
    }

    /// Concatenate along the last axis.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(Error::shape("concat", "no inputs"));
        };
        let lead = self.shape(first)[..self.shape(first).len() - 1].to_vec();
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let s = self.shape(x);
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(Error::shape("concat", format!("leading axes {lead:?} vs {s:?}")));
            }
            widths.push(last_dim(s));
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&x, &w) in xs.iter().zip(&widths) {
                out.extend_from_slice(&self.value(x)[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(shape, out, Op::Concat(xs.to_vec()), ng)
    }

    /// Slice `[start, start + len)` of the last axis.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let d = last_dim(&s);
        if s.is_empty() || start + len > d {
            return Err(Error::shape("narrow", format!("[{start}, {}) of axis {d}", start + len)));
        }
        let out: Vec<f64> = self
            .value(x)
            .chunks(d)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let mut shape = s;
        *shape.last_mut().unwrap() = len;
        let ng = self.ng(x);
        self.push(shape, out, Op::Narrow { x, start }, ng)
    }

    /// Swap the last two axes.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 2 {
            return Err(Error::shape("transpose", format!("rank < 2: {s:?}")));
        }
        let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
        let xv = self.value(x);
        let mut out = vec![0.0; xv.len()];
        for (b, (src, dst)) in xv.chunks(r * c).zip(out.chunks_mut(r * c)).enumerate() {
            let _ = b;
            for i in 0..r {
                for j in 0..c {
                    dst[j * r + i] = src[i * c + j];
                }
            }
        }
        let mut shape = s;
        let n = shape.len();
        shape.swap(n - 2, n - 1);
        let ng = self.ng(x);
        self.push(shape, out, Op::Transpose(x), ng)
    }

    /// Replace entries where `mask` is true by [`MASK_VALUE`].
    pub fn masked_fill(&mut self, x: Var, mask: Vec<bool>) -> Result<Var> {
        if mask.len() != self.value(x).len() {
            return Err(Error::shape(
                "masked_fill",
                format!("mask of {} entries for tensor {:?}", mask.len(), self.shape(x)),
            ));
        }
        let out = self
            .value(x)
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { MASK_VALUE } else { v })
            .collect();
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, out, Op::MaskedFill { x, mask }, ng)
    }

    pub fn sum_last(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.is_empty() {
            return Err(Error::shape("sum_last", "scalar input"));
        }
        let d = last_dim(&s);
        let out = self.value(x).chunks(d).map(|r| r.iter().sum()).collect();
        let ng = self.ng(x);
        self.push(s[..s.len() - 1].to_vec(), out, Op::SumLast(x), ng)
    }

    pub fn mean_last(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.is_empty() {
            return Err(Error::shape("mean_last", "scalar input"));
        }
        let d = last_dim(&s);
        let out = self
            .value(x)
            .chunks(d)
            .map(|r| r.iter().sum::<f64>() / d as f64)
            .collect();
        let ng = self.ng(x);
        self.push(s[..s.len() - 1].to_vec(), out, Op::MeanLast(x), ng)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).iter().sum();
        let ng = self.ng(x);
        self.push(vec![], vec![v], Op::Sum(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let v = self.value(x).iter().sum::<f64>() / n as f64;
        let ng = self.ng(x);
        self.push(vec![], vec![v], Op::Mean(x), ng)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(x)),
            ));
        }
        let out = self.value(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, out, Op::Reshape(x), ng)
    }

    /// Reverse pass from a scalar `loss`. Gradients are accumulated into the
    /// `grad` buffer of every `requires_grad` tensor in `params`; tensors not
    /// reachable from `loss` end up with a zero buffer.
    pub fn backward(&mut self, loss: Var, params: &mut ParamSet) -> Result<()> {
        if self.backward_done {
            return Err(Error::State(
                "backward already ran on this record; call reset() first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.shape(loss)),
            ));
        }
        self.backward_done = true;
        for (_, t) in params.iter_mut() {
            if t.requires_grad && t.grad.is_none() {
                t.grad = Some(vec![0.0; t.len()]);
            }
        }

        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads, params)?;
        }
        for (name, t) in params.iter() {
            if let Some(g) = &t.grad {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteGradient(name.to_string()));
                }
            }
        }
        Ok(())
    }

    fn propagate(
        &self,
        i: usize,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        params: &mut ParamSet,
    ) -> Result<()> {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let want = |v: Var| nodes[v.0].needs_grad;
        let len = |v: Var| nodes[v.0].value.len();
        match &node.op {
            Op::Constant => {}
            Op::Param(idx) => {
                let t = params.by_index_mut(*idx);
                if let Some(buf) = t.grad.as_mut() {
                    buf.iter_mut().zip(g).for_each(|(b, d)| *b += d);
                }
            }
            Op::MatMul(a, b) => {
                let sa = &nodes[a.0].shape;
                let sb = &nodes[b.0].shape;
                let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
                let n = sb[sb.len() - 1];
                let shared = sb.len() == 2;
                let batch = len(*a) / (m * k);
                let av = &nodes[a.0].value;
                let bv = &nodes[b.0].value;
                if want(*a) {
                    accumulate(&mut grads[a.0], len(*a), |ga| {
                        for bi in 0..batch {
                            let bo = if shared { &bv[..] } else { &bv[bi * k * n..(bi + 1) * k * n] };
                            let go = &g[bi * m * n..(bi + 1) * m * n];
                            let gao = &mut ga[bi * m * k..(bi + 1) * m * k];
                            for r in 0..m {
                                let grow = &go[r * n..(r + 1) * n];
                                for p in 0..k {
                                    let brow = &bo[p * n..(p + 1) * n];
                                    gao[r * k + p] += dot(grow, brow);
                                }
                            }
                        }
                    });
                }
                if want(*b) {
                    accumulate(&mut grads[b.0], len(*b), |gb| {
                        for bi in 0..batch {
                            let ao = &av[bi * m * k..(bi + 1) * m * k];
                            let go = &g[bi * m * n..(bi + 1) * m * n];
                            let gbo = if shared {
                                &mut gb[..]
                            } else {
                                &mut gb[bi * k * n..(bi + 1) * k * n]
                            };
                            for r in 0..m {
                                let grow = &go[r * n..(r + 1) * n];
                                for p in 0..k {
                                    let s = ao[r * k + p];
                                    if s != 0.0 {
                                        axpy(s, grow, &mut gbo[p * n..(p + 1) * n]);
                                    }
                                }
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if want(*a) {
                    accumulate(&mut grads[a.0], len(*a), |ga| {
                        ga.iter_mut().zip(g).for_each(|(x, d)| *x += d)
                    });
                }
                if want(*b) {
                    let nb = len(*b);
                    accumulate(&mut grads[b.0], nb, |gb| {
                        for (j, d) in g.iter().enumerate() {
                            gb[j % nb] += sign * d;
                        }
                    });
                }
            }
            Op::Mul(a, b) => {
                let av = &nodes[a.0].value;
                let bv = &nodes[b.0].value;
                let nb = bv.len();
                if want(*a) {
                    accumulate(&mut grads[a.0], len(*a), |ga| {
                        for (j, d) in g.iter().enumerate() {
                            ga[j] += d * bv[j % nb];
                        }
                    });
                }
                if want(*b) {
                    accumulate(&mut grads[b.0], nb, |gb| {
                        for (j, d) in g.iter().enumerate() {
                            gb[j % nb] += d * av[j];
                        }
                    });
                }
            }
            Op::Scale(x, c) => {
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    gx.iter_mut().zip(g).for_each(|(v, d)| *v += c * d)
                });
            }
            Op::Softmax(x) => {
                let d = last_dim(&node.shape);
                let y = &node.value;
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for ((gr, yr), gxr) in g.chunks(d).zip(y.chunks(d)).zip(gx.chunks_mut(d)) {
                        let s = dot(gr, yr);
                        for j in 0..d {
                            gxr[j] += yr[j] * (gr[j] - s);
                        }
                    }
                });
            }
            Op::LogSoftmax(x) => {
                let d = last_dim(&node.shape);
                let y = &node.value;
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for ((gr, yr), gxr) in g.chunks(d).zip(y.chunks(d)).zip(gx.chunks_mut(d)) {
                        let s: f64 = gr.iter().sum();
                        for j in 0..d {
                            gxr[j] += gr[j] - yr[j].exp() * s;
                        }
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = &node.value;
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for j in 0..g.len() {
                        gx[j] += g[j] * y[j] * (1.0 - y[j]);
                    }
                });
            }
            Op::Relu(x) => {
                let xv = &nodes[x.0].value;
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for j in 0..g.len() {
                        if xv[j] > 0.0 {
                            gx[j] += g[j];
                        }
                    }
                });
            }
            Op::Log(x) => {
                let xv = &nodes[x.0].value;
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for j in 0..g.len() {
                        gx[j] += g[j] / xv[j];
                    }
                });
            }
            Op::ClampMin(x, floor) => {
                let xv = &nodes[x.0].value;
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for j in 0..g.len() {
                        if xv[j] > *floor {
                            gx[j] += g[j];
                        }
                    }
                });
            }
            Op::LayerNorm { x, xhat, inv_std } => {
                let d = last_dim(&node.shape);
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for (r, ((gr, hr), gxr)) in
                        g.chunks(d).zip(xhat.chunks(d)).zip(gx.chunks_mut(d)).enumerate()
                    {
                        let mg = gr.iter().sum::<f64>() / d as f64;
                        let mgh = dot(gr, hr) / d as f64;
                        for j in 0..d {
                            gxr[j] += inv_std[r] * (gr[j] - mg - hr[j] * mgh);
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let d = last_dim(&node.shape);
                accumulate(&mut grads[table.0], len(*table), |gt| {
                    for (row, &id) in g.chunks(d).zip(ids) {
                        axpy(1.0, row, &mut gt[id * d..(id + 1) * d]);
                    }
                });
            }
            Op::Dropout { x, mask } => {
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for j in 0..g.len() {
                        gx[j] += g[j] * mask[j];
                    }
                });
            }
            Op::Concat(xs) => {
                let total = last_dim(&node.shape);
                let rows = g.len() / total.max(1);
                let mut offset = 0;
                for x in xs {
                    let w = last_dim(&nodes[x.0].shape);
                    if want(*x) {
                        accumulate(&mut grads[x.0], len(*x), |gx| {
                            for r in 0..rows {
                                axpy(
                                    1.0,
                                    &g[r * total + offset..r * total + offset + w],
                                    &mut gx[r * w..(r + 1) * w],
                                );
                            }
                        });
                    }
                    offset += w;
                }
            }
            Op::Narrow { x, start } => {
                let w = last_dim(&node.shape);
                let d = last_dim(&nodes[x.0].shape);
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for (r, gr) in g.chunks(w).enumerate() {
                        axpy(1.0, gr, &mut gx[r * d + start..r * d + start + w]);
                    }
                });
            }
            Op::Transpose(x) => {
                // output is [.., c, r]; input is [.., r, c]
                let s = &node.shape;
                let (c, r) = (s[s.len() - 2], s[s.len() - 1]);
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for (gb, gxb) in g.chunks(r * c).zip(gx.chunks_mut(r * c)) {
                        for i in 0..r {
                            for j in 0..c {
                                gxb[i * c + j] += gb[j * r + i];
                            }
                        }
                    }
                });
            }
            Op::MaskedFill { x, mask } => {
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for j in 0..g.len() {
                        if !mask[j] {
                            gx[j] += g[j];
                        }
                    }
                });
            }
            Op::SumLast(x) | Op::MeanLast(x) => {
                let d = last_dim(&nodes[x.0].shape);
                let c = if matches!(node.op, Op::MeanLast(_)) { 1.0 / d as f64 } else { 1.0 };
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    for (j, v) in gx.iter_mut().enumerate() {
                        *v += c * g[j / d];
                    }
                });
            }
            Op::Sum(x) | Op::Mean(x) => {
                let n = len(*x);
                let c = if matches!(node.op, Op::Mean(_)) { 1.0 / n as f64 } else { 1.0 };
                accumulate(&mut grads[x.0], n, |gx| {
                    gx.iter_mut().for_each(|v| *v += c * g[0])
                });
            }
            Op::Reshape(x) => {
                accumulate(&mut grads[x.0], len(*x), |gx| {
                    gx.iter_mut().zip(g).for_each(|(v, d)| *v += d)
                });
            }
        }
        Ok(())
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s != 0.0 {
                axpy(s, &b[p * n..(p + 1) * n], crow);
            }
        }
    }
}
