//! Ancestral sampling with an incremental (key/value cached) decoder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_value, position_of, NodeModel};
use crate::error::{Error, Result};
use crate::geom::QuantizedPoint;
use crate::graph::{PAD, START, STOP, VOCAB};
use crate::tensor::{matmul_raw, LAYER_NORM_EPS};

/// At or below this temperature sampling becomes an argmax.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

/// Allowed probability mass below this is treated as a degenerate model.
const MIN_ALLOWED_MASS: f64 = 1e-12;

struct LayerCache {
    keys: Vec<f64>,
    values: Vec<f64>,
}

/// Decodes one token at a time, keeping per-layer keys and values so each
/// step costs O(t) rather than a full forward pass.
pub(crate) struct Decoder<'a> {
    model: &'a NodeModel,
    caches: Vec<LayerCache>,
    len: usize,
}

fn param<'a>(model: &'a NodeModel, name: &str) -> &'a [f64] {
    model
        .params
        .get(name)
        .unwrap_or_else(|| panic!("parameter `{name}` is registered"))
        .data()
}

fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let c = x.len() as f64;
    let mean = x.iter().sum::<f64>() / c;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c;
    let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    x.iter()
        .zip(gain.iter().zip(bias))
        .map(|(v, (g, b))| (v - mean) * s * g + b)
        .collect()
}

fn linear(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = matmul_raw(x, w, 1, x.len(), b.len());
    for (o, bv) in y.iter_mut().zip(b) {
        *o += bv;
    }
    y
}

impl<'a> Decoder<'a> {
    pub(crate) fn new(model: &'a NodeModel) -> Self {
        let caches = (0..model.config.layers)
            .map(|_| LayerCache {
                keys: Vec::new(),
                values: Vec::new(),
            })
            .collect();
        Self { model, caches, len: 0 }
    }

    /// Feeds the next token and returns the logits predicting the one after.
    pub(crate) fn step(&mut self, token: u16) -> Result<Vec<f64>> {
        let m = self.model;
        let cfg = &m.config;
        let t = self.len;
        if t >= cfg.max_seq_len() {
            return Err(Error::Generation(format!("decoder is full at {t} tokens")));
        }
        if usize::from(token) >= VOCAB {
            return Err(Error::Input(format!("token {token} outside the vocabulary")));
        }
        let d = cfg.d_model;
        let heads = cfg.heads;
        let dh = d / heads;
        let row = |name: &str, r: usize| param(m, name)[r * d..(r + 1) * d].to_vec();

        let mut x = row("emb.value", usize::from(token));
        for (a, b) in x.iter_mut().zip(row("emb.position", position_of(t))) {
            *a += b;
        }
        if t > 0 && is_value(token) {
            for (a, b) in x.iter_mut().zip(row("emb.coord", (t - 1) % 2)) {
                *a += b;
            }
        }

        let scale = 1.0 / (dh as f64).sqrt();
        for l in 0..cfg.layers {
            let p = |s: &str| param(m, &format!("layer{l}.{s}"));
            let h = layer_norm(&x, p("ln1.gain"), p("ln1.bias"));
            let q = linear(&h, p("attn.wq"), p("attn.bq"));
            let k = linear(&h, p("attn.wk"), p("attn.bk"));
            let v = linear(&h, p("attn.wv"), p("attn.bv"));
            let cache = &mut self.caches[l];
            cache.keys.extend_from_slice(&k);
            cache.values.extend_from_slice(&v);
            let n = t + 1;
            let mut cat = vec![0.0; d];
            for hd in 0..heads {
                let off = hd * dh;
                let qh = &q[off..off + dh];
                let scores: Vec<f64> = (0..n)
                    .map(|j| {
                        let kj = &cache.keys[j * d + off..j * d + off + dh];
                        qh.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale
                    })
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let z: f64 = w.iter().sum();
                for (j, wj) in w.iter().enumerate() {
                    let vj = &cache.values[j * d + off..j * d + off + dh];
                    for (o, vv) in cat[off..off + dh].iter_mut().zip(vj) {
                        *o += wj / z * vv;
                    }
                }
            }
            let o = linear(&cat, p("attn.wo"), p("attn.bo"));
            for (a, b) in x.iter_mut().zip(&o) {
                *a += b;
            }
            let h = layer_norm(&x, p("ln2.gain"), p("ln2.bias"));
            let mut f = linear(&h, p("ffn.w1"), p("ffn.b1"));
            for v in &mut f {
                *v = v.max(0.0);
            }
            let f = linear(&f, p("ffn.w2"), p("ffn.b2"));
            for (a, b) in x.iter_mut().zip(&f) {
                *a += b;
            }
        }
        let h = layer_norm(&x, param(m, "ln_f.gain"), param(m, "ln_f.bias"));
        self.len += 1;
        Ok(linear(&h, param(m, "head.w"), param(m, "head.b")))
    }
}

/// Picks the next token from `logits` with `START` and `PAD` masked out.
fn draw(logits: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> Result<u16> {
    let allowed = |i: usize| i != usize::from(START) && i != usize::from(PAD);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Sampling("non-finite logits".into()));
    }
    let candidates = logits.iter().enumerate().filter(|&(i, _)| allowed(i));
    if temperature <= GREEDY_TEMPERATURE {
        let (best, _) = candidates
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        return Ok(best as u16);
    }
    // Renormalizing a vanishing remainder would only amplify noise.
    let max_all = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z_all: f64 = logits.iter().map(|v| (v - max_all).exp()).sum();
    let mass: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| allowed(i))
        .map(|(_, v)| (v - max_all).exp())
        .sum::<f64>()
        / z_all;
    if !(mass > MIN_ALLOWED_MASS) {
        return Err(Error::Sampling(format!(
            "only {mass:e} probability left after masking START and PAD"
        )));
    }
    let max = candidates.clone().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<(usize, f64)> = candidates.map(|(i, v)| (i, ((v - max) / temperature).exp())).collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(i, w) in &weights {
        if u < w {
            return Ok(i as u16);
        }
        u -= w;
    }
    Ok(weights.last().expect("allowed tokens exist").0 as u16)
}

/// Samples one vertex set. Generation stops at `STOP` or after `max_nodes`
/// pairs; a dangling x-coordinate before `STOP` is dropped.
pub fn sample_nodes(model: &NodeModel, max_nodes: usize, temperature: f64, seed: u64) -> Result<Vec<QuantizedPoint>> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::Argument(format!("temperature {temperature} must be finite and non-negative")));
    }
    let cap = max_nodes.min(model.config.max_nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut decoder = Decoder::new(model);
    let mut values: Vec<u8> = Vec::with_capacity(2 * cap);
    let mut logits = decoder.step(START)?;
    while values.len() < 2 * cap {
        let tok = draw(&logits, temperature, &mut rng)?;
        if tok == STOP {
            break;
        }
        values.push(tok as u8);
        logits = decoder.step(tok)?;
    }
    Ok(values
        .chunks_exact(2)
        .map(|c| QuantizedPoint { qx: c[0], qy: c[1] })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_skips_masked_tokens() {
        let mut logits = vec![0.0; VOCAB];
        logits[usize::from(START)] = 50.0;
        logits[usize::from(PAD)] = 40.0;
        logits[17] = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(draw(&logits, 0.0, &mut rng).unwrap(), 17);
    }

    #[test]
    fn all_mass_on_pad_is_an_error() {
        let mut logits = vec![-1e4; VOCAB];
        logits[usize::from(PAD)] = 1e4;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(draw(&logits, 1.0, &mut rng), Err(Error::Sampling(_))));
    }

    #[test]
    fn sampling_follows_the_distribution() {
        let mut logits = vec![f64::NEG_INFINITY.max(-1e3); VOCAB];
        logits[3] = 0.0;
        logits[4] = 2f64.ln();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30_000;
        let fours = (0..n).filter(|_| draw(&logits, 1.0, &mut rng).unwrap() == 4).count();
        let frac = fours as f64 / n as f64;
        assert!((frac - 2.0 / 3.0).abs() < 0.015, "{frac}");
    }
}
