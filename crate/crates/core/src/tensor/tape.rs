use std::collections::HashMap;

use super::{matmul_nt_raw, matmul_raw, matmul_tn_raw, Tensor};
use crate::error::{Error, Result};

pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

/// How the right operand of a binary op is broadcast against the left.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Broadcast {
    Same,
    Scalar,
    Row,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Affine(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows { table: Var, index: Vec<usize> },
    Softmax(Var),
    LayerNorm { x: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Vec<f64>, count: usize },
    GaussianKl { mu: Var, log_var: Var },
    WeightedBce { logits: Var, targets: Tensor, pos_weight: f64, norm: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients of the loss with respect to every `requires_grad` leaf.
#[derive(Debug, Default)]
pub struct Gradients {
    grads: HashMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(&v)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.remove(&v)
    }
}

/// Records executed ops in execution order. Each op validates shapes and
/// rejects non-finite results with the op's name.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn broadcast_kind(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        return Ok(Broadcast::Same);
    }
    if b.numel() == 1 {
        return Ok(Broadcast::Scalar);
    }
    let (_, ac) = a.dims2()?;
    let (br, bc) = b.dims2()?;
    if br == 1 && bc == ac && a.shape().len() == 2 {
        return Ok(Broadcast::Row);
    }
    Err(shape_err(op, a, b))
}

fn broadcast_get(b: &[f64], kind: Broadcast, cols: usize, i: usize) -> f64 {
    match kind {
        Broadcast::Same => b[i],
        Broadcast::Scalar => b[0],
        Broadcast::Row => b[i % cols],
    }
}

/// Sum a full-size gradient down to the broadcast operand's shape.
fn reduce_to(g: &[f64], kind: Broadcast, cols: usize, target: &Tensor) -> Tensor {
    let data = match kind {
        Broadcast::Same => g.to_vec(),
        Broadcast::Scalar => vec![g.iter().sum()],
        Broadcast::Row => {
            let mut acc = vec![0.0; cols];
            for row in g.chunks(cols) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            acc
        }
    };
    Tensor::new(target.shape().to_vec(), data).expect("reduced gradient matches operand")
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t, true)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|&v| self.needs(v));
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = av.dims2()?;
        let (k2, n) = bv.dims2()?;
        if k != k2 {
            return Err(shape_err("matmul", av, bv));
        }
        let out = Tensor::matrix(m, n, matmul_raw(av.data(), bv.data(), m, k, n))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    /// `a * b^T` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = av.dims2()?;
        let (n, k2) = bv.dims2()?;
        if k != k2 {
            return Err(shape_err("matmul_nt", av, bv));
        }
        let out = Tensor::matrix(m, n, matmul_nt_raw(av.data(), bv.data(), m, k, n))?;
        self.push("matmul_nt", out, Op::MatMulNt(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(Var, Var, Broadcast) -> Op,
    ) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let kind = broadcast_kind(name, av, bv)?;
        let cols = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, broadcast_get(bv.data(), kind, cols, i)))
            .collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push(name, out, make(a, b, kind), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// `a * scale + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * scale + shift);
        self.push("affine", out, Op::Affine(a, scale), &[a])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.affine(a, s, 0.0)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push("relu", out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::exp);
        self.push("exp", out, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if let Some(bad) = av.data().iter().find(|&&x| x <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                message: format!("non-positive input {bad}"),
            });
        }
        let out = av.map(f64::ln);
        self.push("log", out, Op::Log(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.push("sum", out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.numel() == 0 {
            return Err(Error::Argument("mean of an empty tensor".into()));
        }
        let out = Tensor::scalar(av.data().iter().sum::<f64>() / av.numel() as f64);
        self.push("mean", out, Op::Mean(a), &[a])
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let (r, c) = xv.dims2()?;
        if start + len > c {
            return Err(Error::Argument(format!(
                "column slice {start}..{} out of {c}",
                start + len
            )));
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&xv.data()[i * c + start..i * c + start + len]);
        }
        let out = Tensor::matrix(r, len, data)?;
        self.push("slice_cols", out, Op::SliceCols { x, start }, &[x])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Argument("concat of nothing".into()))?;
        let r = self.value(first).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pr, pc) = self.value(p).dims2()?;
            if pr != r {
                return Err(shape_err("concat_cols", self.value(first), self.value(p)));
            }
            widths.push(pc);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let out = Tensor::matrix(r, total, data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Argument("concat of nothing".into()))?;
        let c = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (pr, pc) = self.value(p).dims2()?;
            if pc != c {
                return Err(shape_err("concat_rows", self.value(first), self.value(p)));
            }
            data.extend_from_slice(self.value(p).data());
            rows += pr;
        }
        let out = Tensor::matrix(rows, c, data)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Embedding lookup: row `index[i]` of `table` becomes output row `i`.
    pub fn gather_rows(&mut self, table: Var, index: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        let (r, c) = tv.dims2()?;
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            if i >= r {
                return Err(Error::Argument(format!("row index {i} out of {r}")));
            }
            data.extend_from_slice(tv.row(i));
        }
        let out = Tensor::matrix(index.len(), c, data)?;
        self.push(
            "gather_rows",
            out,
            Op::GatherRows {
                table,
                index: index.to_vec(),
            },
            &[table],
        )
    }

    /// Row-wise softmax. With `causal`, entry `(i, j)` is masked out for `j > i`.
    pub fn softmax_rows(&mut self, x: Var, causal: bool) -> Result<Var> {
        let xv = self.value(x);
        let (r, c) = xv.dims2()?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let limit = if causal { (i + 1).min(c) } else { c };
            let row = &xv.data()[i * c..i * c + limit];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                out[i * c + j] = e;
                z += e;
            }
            for o in &mut out[i * c..i * c + limit] {
                *o /= z;
            }
        }
        let out = Tensor::matrix(r, c, out)?;
        self.push("softmax", out, Op::Softmax(x), &[x])
    }

    /// Row-wise standardization (no affine part).
    pub fn layer_norm(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let (r, c) = xv.dims2()?;
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        for i in 0..r {
            let row = &xv.data()[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[i] = s;
            for (o, v) in xhat[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o = (v - mean) * s;
            }
        }
        let out = Tensor::matrix(r, c, xhat.clone())?;
        self.push("layer_norm", out, Op::LayerNorm { x, xhat, inv_std }, &[x])
    }

    /// Mean categorical cross-entropy of `logits [T, V]` against `targets`,
    /// skipping positions equal to `ignore_index`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize], ignore_index: usize) -> Result<Var> {
        let lv = self.value(logits);
        let (t, v) = lv.dims2()?;
        if targets.len() != t {
            return Err(Error::Shape {
                op: "softmax_cross_entropy",
                lhs: lv.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let mut probs = vec![0.0; t * v];
        let mut kept = Vec::with_capacity(t);
        let mut total = 0.0;
        let mut count = 0;
        for (i, &target) in targets.iter().enumerate() {
            let row = &lv.data()[i * v..(i + 1) * v];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
            let log_z = z.ln() + max;
            for (p, x) in probs[i * v..(i + 1) * v].iter_mut().zip(row) {
                *p = (x - log_z).exp();
            }
            if target == ignore_index {
                kept.push(None);
                continue;
            }
            if target >= v {
                return Err(Error::Argument(format!("target {target} outside vocabulary {v}")));
            }
            total += log_z - row[target];
            count += 1;
            kept.push(Some(target));
        }
        if count == 0 {
            return Err(Error::DegenerateBatch);
        }
        let out = Tensor::scalar(total / count as f64);
        self.push(
            "softmax_cross_entropy",
            out,
            Op::CrossEntropy {
                logits,
                targets: kept,
                probs,
                count,
            },
            &[logits],
        )
    }

    /// `KL[N(mu, exp(log_var)) || N(0, I)]`, summed over entries and divided
    /// by the number of rows.
    pub fn gaussian_kl(&mut self, mu: Var, log_var: Var) -> Result<Var> {
        let (mv, lv) = (self.value(mu), self.value(log_var));
        if mv.shape() != lv.shape() {
            return Err(shape_err("gaussian_kl", mv, lv));
        }
        let rows = mv.rows().max(1) as f64;
        let total: f64 = mv
            .data()
            .iter()
            .zip(lv.data())
            .map(|(m, l)| m * m + l.exp() - 1.0 - l)
            .sum();
        let out = Tensor::scalar(0.5 * total / rows);
        self.push("gaussian_kl", out, Op::GaussianKl { mu, log_var }, &[mu, log_var])
    }

    /// `norm * sum_ij [ pos_weight * t * -log sigmoid(x) + (1 - t) * -log(1 - sigmoid(x)) ]`
    /// evaluated stably from logits.
    pub fn weighted_bce_with_logits(
        &mut self,
        logits: Var,
        targets: &Tensor,
        pos_weight: f64,
        norm: f64,
    ) -> Result<Var> {
        let lv = self.value(logits);
        if lv.shape() != targets.shape() {
            return Err(shape_err("weighted_bce", lv, targets));
        }
        let total: f64 = lv
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&x, &t)| pos_weight * t * softplus(-x) + (1.0 - t) * softplus(x))
            .sum();
        let out = Tensor::scalar(norm * total);
        self.push(
            "weighted_bce",
            out,
            Op::WeightedBce {
                logits,
                targets: targets.clone(),
                pos_weight,
                norm,
            },
            &[logits],
        )
    }

    /// Reverse sweep from a scalar `loss`. Returns the gradient of every
    /// trainable leaf and clears the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let nodes = std::mem::take(&mut self.nodes);
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(nodes[loss.0].value.shape(), 1.0));
        let mut result = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let mut send = |v: Var, contrib: Tensor| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => {
                        for (a, c) in acc.data_mut().iter_mut().zip(contrib.data()) {
                            *a += c;
                        }
                    }
                    slot @ None => *slot = Some(contrib),
                }
            };
            let val = |v: Var| &nodes[v.0].value;
            let like = |v: Var, data: Vec<f64>| {
                Tensor::new(nodes[v.0].value.shape().to_vec(), data).expect("gradient shape")
            };
            let gd = g.data();

            match &node.op {
                Op::Leaf => {
                    result.grads.insert(Var(idx), g);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = val(*a).dims2()?;
                    let n = val(*b).cols();
                    send(*a, like(*a, matmul_nt_raw(gd, val(*b).data(), m, n, k)));
                    send(*b, like(*b, matmul_tn_raw(val(*a).data(), gd, m, k, n)));
                }
                Op::MatMulNt(a, b) => {
                    // out = a b^T ; da = g b ; db = g^T a
                    let (m, k) = val(*a).dims2()?;
                    let n = val(*b).rows();
                    send(*a, like(*a, matmul_raw(gd, val(*b).data(), m, n, k)));
                    send(*b, like(*b, matmul_tn_raw(gd, val(*a).data(), m, n, k)));
                }
                Op::Transpose(a) => {
                    send(*a, like(*a, g.transpose()?.into_data()));
                }
                Op::Add(a, b, kind) => {
                    let cols = val(*a).cols();
                    send(*a, like(*a, gd.to_vec()));
                    send(*b, reduce_to(gd, *kind, cols, val(*b)));
                }
                Op::Sub(a, b, kind) => {
                    let cols = val(*a).cols();
                    send(*a, like(*a, gd.to_vec()));
                    let neg: Vec<f64> = gd.iter().map(|v| -v).collect();
                    send(*b, reduce_to(&neg, *kind, cols, val(*b)));
                }
                Op::Mul(a, b, kind) => {
                    let (av, bv) = (val(*a), val(*b));
                    let cols = av.cols();
                    let ga = gd
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| gi * broadcast_get(bv.data(), *kind, cols, i))
                        .collect();
                    let gb: Vec<f64> = gd.iter().zip(av.data()).map(|(gi, x)| gi * x).collect();
                    send(*a, like(*a, ga));
                    send(*b, reduce_to(&gb, *kind, cols, bv));
                }
                Op::Affine(a, s) => send(*a, like(*a, gd.iter().map(|v| v * s).collect())),
                Op::Relu(a) => {
                    let d = gd
                        .iter()
                        .zip(val(*a).data())
                        .map(|(gi, x)| if *x > 0.0 { *gi } else { 0.0 })
                        .collect();
                    send(*a, like(*a, d));
                }
                Op::Sigmoid(a) => {
                    let d = gd
                        .iter()
                        .zip(node.value.data())
                        .map(|(gi, y)| gi * y * (1.0 - y))
                        .collect();
                    send(*a, like(*a, d));
                }
                Op::Exp(a) => {
                    let d = gd.iter().zip(node.value.data()).map(|(gi, y)| gi * y).collect();
                    send(*a, like(*a, d));
                }
                Op::Log(a) => {
                    let d = gd.iter().zip(val(*a).data()).map(|(gi, x)| gi / x).collect();
                    send(*a, like(*a, d));
                }
                Op::Sum(a) => send(*a, like(*a, vec![gd[0]; val(*a).numel()])),
                Op::Mean(a) => {
                    let n = val(*a).numel();
                    send(*a, like(*a, vec![gd[0] / n as f64; n]));
                }
                Op::SliceCols { x, start } => {
                    let (r, c) = val(*x).dims2()?;
                    let w = node.value.cols();
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        d[i * c + start..i * c + start + w].copy_from_slice(&gd[i * w..(i + 1) * w]);
                    }
                    send(*x, like(*x, d));
                }
                Op::ConcatCols(parts) => {
                    let (r, total) = node.value.dims2()?;
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        let mut d = Vec::with_capacity(r * w);
                        for i in 0..r {
                            d.extend_from_slice(&gd[i * total + offset..i * total + offset + w]);
                        }
                        send(p, like(p, d));
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = val(p).numel();
                        send(p, like(p, gd[offset..offset + n].to_vec()));
                        offset += n;
                    }
                }
                Op::GatherRows { table, index } => {
                    let (r, c) = val(*table).dims2()?;
                    let mut d = vec![0.0; r * c];
                    for (i, &src) in index.iter().enumerate() {
                        for (o, v) in d[src * c..(src + 1) * c].iter_mut().zip(&gd[i * c..(i + 1) * c]) {
                            *o += v;
                        }
                    }
                    send(*table, like(*table, d));
                }
                Op::Softmax(x) => {
                    let (r, c) = node.value.dims2()?;
                    let y = node.value.data();
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let (yr, gr) = (&y[i * c..(i + 1) * c], &gd[i * c..(i + 1) * c]);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            d[i * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    send(*x, like(*x, d));
                }
                Op::LayerNorm { x, xhat, inv_std } => {
                    let (r, c) = node.value.dims2()?;
                    let n = c as f64;
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let (xr, gr) = (&xhat[i * c..(i + 1) * c], &gd[i * c..(i + 1) * c]);
                        let sum_g: f64 = gr.iter().sum();
                        let sum_gx: f64 = gr.iter().zip(xr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            d[i * c + j] = inv_std[i] / n * (n * gr[j] - sum_g - xr[j] * sum_gx);
                        }
                    }
                    send(*x, like(*x, d));
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                    count,
                } => {
                    let v = val(*logits).cols();
                    let scale = gd[0] / *count as f64;
                    let mut d = vec![0.0; probs.len()];
                    for (i, t) in targets.iter().enumerate() {
                        let Some(t) = t else { continue };
                        for j in 0..v {
                            d[i * v + j] = probs[i * v + j] * scale;
                        }
                        d[i * v + t] -= scale;
                    }
                    send(*logits, like(*logits, d));
                }
                Op::GaussianKl { mu, log_var } => {
                    let rows = val(*mu).rows().max(1) as f64;
                    let s = gd[0] / rows;
                    send(*mu, like(*mu, val(*mu).data().iter().map(|m| s * m).collect()));
                    send(
                        *log_var,
                        like(
                            *log_var,
                            val(*log_var).data().iter().map(|l| 0.5 * s * (l.exp() - 1.0)).collect(),
                        ),
                    );
                }
                Op::WeightedBce {
                    logits,
                    targets,
                    pos_weight,
                    norm,
                } => {
                    let s = gd[0] * norm;
                    let d = val(*logits)
                        .data()
                        .iter()
                        .zip(targets.data())
                        .map(|(&x, &t)| {
                            let p = sigmoid(x);
                            s * (pos_weight * t * (p - 1.0) + (1.0 - t) * p)
                        })
                        .collect();
                    send(*logits, like(*logits, d));
                }
            }
        }
        Ok(result)
    }
}
