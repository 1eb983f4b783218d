//! Autoregressive transformer over flattened coordinate sequences.
//!
//! Each input token embeds as the sum of a value row (one of 259 tokens), a
//! position row (the vertex the token belongs to) and, for coordinate tokens,
//! a coordinate-type row (x or y). Blocks are pre-norm with causal
//! multi-head attention. The hidden states double as per-node features.

mod sample;
mod train;

pub use sample::{sample_nodes, GREEDY_TEMPERATURE};
pub use train::{train_node_model, NodeEpoch, NodeTrainConfig, NodeTrainReport};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::graph::{TokenSeq, PAD, START, STOP, VOCAB};
use crate::tensor::{Checkpoint, ParamSet, Tape, Tensor, Var};

/// Feature width handed to the graph autoencoder.
pub const FEATURE_DIM: usize = 128;

/// How the two coordinate-token states of a node become its feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFeatureMode {
    /// Mean of the x-token and y-token states.
    #[default]
    Mean,
    /// The y-token state alone (it has attended to the whole pair).
    YToken,
    /// First half of the x-token state followed by the first half of the y-token state.
    ConcatHalves,
}

impl std::str::FromStr for NodeFeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "y_token" => Ok(Self::YToken),
            "concat_halves" => Ok(Self::ConcatHalves),
            _ => Err(Error::Usage(format!(
                "unknown node feature mode `{s}` (mean, y_token, concat_halves)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeModelConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub max_nodes: usize,
    pub dropout: f64,
    pub feature_mode: NodeFeatureMode,
}

impl Default for NodeModelConfig {
    fn default() -> Self {
        Self {
            d_model: FEATURE_DIM,
            layers: 4,
            heads: 8,
            d_ff: 512,
            max_nodes: 512,
            dropout: 0.0,
            feature_mode: NodeFeatureMode::Mean,
        }
    }
}

impl NodeModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.layers == 0 || self.heads == 0 || self.d_ff == 0 || self.max_nodes == 0 {
            return Err(Error::Argument("node model sizes must be positive".into()));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::Argument(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.feature_mode == NodeFeatureMode::ConcatHalves && self.d_model % 2 != 0 {
            return Err(Error::Argument("concat_halves needs an even d_model".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Argument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// `START` + two tokens per node + `STOP`.
    pub fn max_seq_len(&self) -> usize {
        2 * self.max_nodes + 2
    }

    pub fn vocab(&self) -> usize {
        VOCAB
    }
}

/// The vertex a token belongs to. `START` shares vertex 0 with the first
/// pair; `STOP` after `N` pairs sits at vertex `N`, hence `max_nodes + 1` rows.
fn position_of(t: usize) -> usize {
    if t == 0 {
        0
    } else {
        (t - 1) / 2
    }
}

fn is_value(token: u16) -> bool {
    token < STOP
}

/// Parameters plus architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub config: NodeModelConfig,
    pub params: ParamSet,
}

/// Resolves parameter names to tape variables bound in slot order.
struct Bound<'a> {
    params: &'a ParamSet,
    vars: &'a [Var],
}

impl Bound<'_> {
    fn get(&self, name: &str) -> Var {
        self.vars[self.params.slot(name).unwrap_or_else(|| panic!("parameter `{name}` is registered"))]
    }
}

fn normal_tensor(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let dist = Normal::new(0.0, std).expect("positive std");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::matrix(rows, cols, data).expect("rows*cols values")
}

impl NodeModel {
    /// Random initialization. The output head starts at zero, so an
    /// untrained model predicts the uniform distribution.
    pub fn new(config: NodeModelConfig, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let ff = config.d_ff;
        let residual_std = 1.0 / ((d as f64).sqrt() * (2.0 * config.layers as f64).sqrt());
        let mut p = ParamSet::new();
        p.insert("emb.value", normal_tensor(VOCAB, d, 0.02, &mut rng))?;
        p.insert("emb.position", normal_tensor(config.max_nodes + 1, d, 0.02, &mut rng))?;
        p.insert("emb.coord", normal_tensor(2, d, 0.02, &mut rng))?;
        for l in 0..config.layers {
            let name = |s: &str| format!("layer{l}.{s}");
            p.insert(name("ln1.gain"), Tensor::full(&[1, d], 1.0))?;
            p.insert(name("ln1.bias"), Tensor::zeros(&[1, d]))?;
            for w in ["wq", "wk", "wv"] {
                p.insert(name(&format!("attn.{w}")), normal_tensor(d, d, 1.0 / (d as f64).sqrt(), &mut rng))?;
                p.insert(name(&format!("attn.b{}", &w[1..])), Tensor::zeros(&[1, d]))?;
            }
            p.insert(name("attn.wo"), normal_tensor(d, d, residual_std, &mut rng))?;
            p.insert(name("attn.bo"), Tensor::zeros(&[1, d]))?;
            p.insert(name("ln2.gain"), Tensor::full(&[1, d], 1.0))?;
            p.insert(name("ln2.bias"), Tensor::zeros(&[1, d]))?;
            p.insert(name("ffn.w1"), normal_tensor(d, ff, 1.0 / (d as f64).sqrt(), &mut rng))?;
            p.insert(name("ffn.b1"), Tensor::zeros(&[1, ff]))?;
            p.insert(
                name("ffn.w2"),
                normal_tensor(ff, d, 1.0 / ((ff as f64).sqrt() * (2.0 * config.layers as f64).sqrt()), &mut rng),
            )?;
            p.insert(name("ffn.b2"), Tensor::zeros(&[1, d]))?;
        }
        p.insert("ln_f.gain", Tensor::full(&[1, d], 1.0))?;
        p.insert("ln_f.bias", Tensor::zeros(&[1, d]))?;
        p.insert("head.w", Tensor::zeros(&[d, VOCAB]))?;
        p.insert("head.b", Tensor::zeros(&[1, VOCAB]))?;
        Ok(Self { config, params: p })
    }

    pub fn to_checkpoint(&self, mut meta: Map<String, Value>) -> Checkpoint {
        meta.insert("kind".into(), Value::from("nodes"));
        meta.insert("config".into(), serde_json::to_value(self.config).expect("config serializes"));
        Checkpoint {
            meta,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta.get("kind").and_then(Value::as_str) != Some("nodes") {
            return Err(Error::Checkpoint("not a node-model checkpoint".into()));
        }
        let config: NodeModelConfig = serde_json::from_value(
            ckpt.meta
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("node checkpoint without config".into()))?,
        )
        .map_err(|e| Error::Checkpoint(format!("bad node config: {e}")))?;
        config.validate()?;
        let reference = NodeModel::new(config, 0)?;
        for (name, t) in reference.params.iter() {
            match ckpt.params.get(name) {
                Some(c) if c.shape() == t.shape() => {}
                _ => return Err(Error::Checkpoint(format!("tensor `{name}` missing or misshapen"))),
            }
        }
        Ok(Self {
            config,
            params: ckpt.params.clone(),
        })
    }

    fn check_tokens(&self, tokens: &[u16]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::Input("empty token sequence".into()));
        }
        if tokens.len() > self.config.max_seq_len() {
            return Err(Error::Input(format!(
                "sequence of {} tokens exceeds the maximum {}",
                tokens.len(),
                self.config.max_seq_len()
            )));
        }
        if let Some(bad) = tokens.iter().find(|&&t| usize::from(t) >= VOCAB) {
            return Err(Error::Input(format!("token {bad} outside the vocabulary")));
        }
        Ok(())
    }

    fn layer_norm(&self, tape: &mut Tape, b: &Bound, x: Var, prefix: &str) -> Result<Var> {
        let h = tape.layer_norm(x)?;
        let h = tape.mul(h, b.get(&format!("{prefix}.gain")))?;
        tape.add(h, b.get(&format!("{prefix}.bias")))
    }

    fn linear(&self, tape: &mut Tape, b: &Bound, x: Var, w: &str, bias: &str) -> Result<Var> {
        let y = tape.matmul(x, b.get(w))?;
        tape.add(y, b.get(bias))
    }

    fn dropout(&self, tape: &mut Tape, x: Var, rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let p = self.config.dropout;
        let Some(rng) = rng.filter(|_| p > 0.0) else {
            return Ok(x);
        };
        let shape = tape.value(x).shape().to_vec();
        let n: usize = shape.iter().product();
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let mask = tape.constant(Tensor::new(shape, mask)?);
        tape.mul(x, mask)
    }

    /// Records the forward pass. `vars` are this model's parameters bound in
    /// slot order. Returns `(logits [T, 259], hidden [T, d_model])`.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        tokens: &[u16],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, Var)> {
        self.check_tokens(tokens)?;
        let b = Bound {
            params: &self.params,
            vars,
        };
        let t_len = tokens.len();
        let d = self.config.d_model;
        let heads = self.config.heads;
        let dh = d / heads;

        let ids: Vec<usize> = tokens.iter().map(|&t| usize::from(t)).collect();
        let positions: Vec<usize> = (0..t_len).map(position_of).collect();
        let mut selector = vec![0.0; t_len * 2];
        for (t, &tok) in tokens.iter().enumerate() {
            if t > 0 && is_value(tok) {
                selector[t * 2 + (t - 1) % 2] = 1.0;
            }
        }
        let value = tape.gather_rows(b.get("emb.value"), &ids)?;
        let pos = tape.gather_rows(b.get("emb.position"), &positions)?;
        let selector = tape.constant(Tensor::matrix(t_len, 2, selector)?);
        let coord = tape.matmul(selector, b.get("emb.coord"))?;
        let x = tape.add(value, pos)?;
        let mut x = tape.add(x, coord)?;

        let scale = 1.0 / (dh as f64).sqrt();
        for l in 0..self.config.layers {
            let pre = format!("layer{l}");
            let h = self.layer_norm(tape, &b, x, &format!("{pre}.ln1"))?;
            let q = self.linear(tape, &b, h, &format!("{pre}.attn.wq"), &format!("{pre}.attn.bq"))?;
            let k = self.linear(tape, &b, h, &format!("{pre}.attn.wk"), &format!("{pre}.attn.bk"))?;
            let v = self.linear(tape, &b, h, &format!("{pre}.attn.wv"), &format!("{pre}.attn.bv"))?;
            let mut outs = Vec::with_capacity(heads);
            for hd in 0..heads {
                let qh = tape.slice_cols(q, hd * dh, dh)?;
                let kh = tape.slice_cols(k, hd * dh, dh)?;
                let vh = tape.slice_cols(v, hd * dh, dh)?;
                let scores = tape.matmul_nt(qh, kh)?;
                let scores = tape.scale(scores, scale)?;
                let attn = tape.softmax_rows(scores, true)?;
                outs.push(tape.matmul(attn, vh)?);
            }
            let cat = if heads == 1 { outs[0] } else { tape.concat_cols(&outs)? };
            let o = self.linear(tape, &b, cat, &format!("{pre}.attn.wo"), &format!("{pre}.attn.bo"))?;
            let o = self.dropout(tape, o, dropout_rng.as_deref_mut())?;
            x = tape.add(x, o)?;

            let h = self.layer_norm(tape, &b, x, &format!("{pre}.ln2"))?;
            let f = self.linear(tape, &b, h, &format!("{pre}.ffn.w1"), &format!("{pre}.ffn.b1"))?;
            let f = tape.relu(f)?;
            let f = self.linear(tape, &b, f, &format!("{pre}.ffn.w2"), &format!("{pre}.ffn.b2"))?;
            let f = self.dropout(tape, f, dropout_rng.as_deref_mut())?;
            x = tape.add(x, f)?;
        }
        let hidden = self.layer_norm(tape, &b, x, "ln_f")?;
        let logits = self.linear(tape, &b, hidden, "head.w", "head.b")?;
        Ok((logits, hidden))
    }

    /// Inference forward pass: `(logits [T, 259], hidden [T, d_model])`.
    pub fn forward_logits(&self, tokens: &[u16]) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let (logits, hidden) = self.forward_on_tape(&mut tape, &vars, tokens, None)?;
        Ok((tape.value(logits).clone(), tape.value(hidden).clone()))
    }

    /// Checks the sequence grammar and returns `(inputs, targets)` for
    /// next-token prediction; trailing `PAD`s after `STOP` are allowed.
    pub fn split_targets(tokens: &[u16]) -> Result<(&[u16], Vec<usize>)> {
        let end = tokens.iter().rposition(|&t| t != PAD).map_or(0, |i| i + 1);
        if end < 2 || tokens[0] != START || tokens[end - 1] != STOP {
            return Err(Error::Input("sequence must start with START and end with STOP".into()));
        }
        if tokens[1..end - 1].iter().any(|&t| !is_value(t)) {
            return Err(Error::Input("special token inside the coordinate run".into()));
        }
        let targets = tokens[1..].iter().map(|&t| usize::from(t)).collect();
        Ok((&tokens[..tokens.len() - 1], targets))
    }

    /// Mean token NLL of a batch recorded on `tape`: each sequence's summed
    /// loss over its non-`PAD` targets, divided by the batch's target count.
    pub fn batch_loss_on_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &[&[u16]],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let mut parts = Vec::with_capacity(batch.len());
        let mut total = 0usize;
        for seq in batch {
            let (inputs, targets) = Self::split_targets(seq)?;
            let count = targets.iter().filter(|&&t| t != usize::from(PAD)).count();
            let (logits, _) = self.forward_on_tape(tape, vars, inputs, dropout_rng.as_deref_mut())?;
            let loss = tape.softmax_cross_entropy(logits, &targets, usize::from(PAD))?;
            parts.push((loss, count));
            total += count;
        }
        if total == 0 {
            return Err(Error::DegenerateBatch);
        }
        let mut acc: Option<Var> = None;
        for (loss, count) in parts {
            let w = tape.scale(loss, count as f64 / total as f64)?;
            acc = Some(match acc {
                None => w,
                Some(a) => tape.add(a, w)?,
            });
        }
        Ok(acc.expect("non-empty batch"))
    }

    /// Mean negative log-likelihood per target token (nats).
    pub fn nll_loss(&self, tokens: &[u16]) -> Result<f64> {
        self.mean_nll(&[tokens])
    }

    /// Token-weighted mean NLL over several sequences.
    pub fn mean_nll(&self, seqs: &[&[u16]]) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let loss = self.batch_loss_on_tape(&mut tape, &vars, seqs, None)?;
        Ok(tape.value(loss).item().expect("scalar loss"))
    }

    /// One feature row per node, in sequence order, from the final hidden
    /// states at the node's two coordinate tokens.
    pub fn node_embeddings(&self, tokens: &TokenSeq) -> Result<Tensor> {
        let t = tokens.tokens();
        Self::split_targets(t)?;
        let n = (t.iter().rposition(|&x| x == STOP).unwrap_or(0)).saturating_sub(1) / 2;
        let (_, hidden) = self.forward_logits(t)?;
        let d = self.config.d_model;
        let mut out = Vec::with_capacity(n * d);
        for i in 0..n {
            let hx = hidden.row(1 + 2 * i);
            let hy = hidden.row(2 + 2 * i);
            match self.config.feature_mode {
                NodeFeatureMode::Mean => out.extend(hx.iter().zip(hy).map(|(a, b)| 0.5 * (a + b))),
                NodeFeatureMode::YToken => out.extend_from_slice(hy),
                NodeFeatureMode::ConcatHalves => {
                    out.extend_from_slice(&hx[..d / 2]);
                    out.extend_from_slice(&hy[..d / 2]);
                }
            }
        }
        Tensor::matrix(n, d, out)
    }
}
