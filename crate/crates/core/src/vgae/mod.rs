//! Variational graph autoencoder: a two-layer GCN encoder with mean and
//! log-variance heads, the reparameterized latent, and an inner-product
//! edge decoder.

mod generate;
mod train;

pub use generate::{generate_network, GenerateConfig};
pub use train::{edge_auc, evaluate_auc, train_vgae, GraphSample, VgaeEpoch, VgaeTrainConfig, VgaeTrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::nodemodel::FEATURE_DIM;
use crate::tensor::{Checkpoint, ParamSet, Tape, Tensor, Var};

const W0: &str = "gcn0.weight";
const W_MU: &str = "gcn_mu.weight";
const W_LOGVAR: &str = "gcn_logvar.weight";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgaeConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub latent: usize,
}

impl Default for VgaeConfig {
    fn default() -> Self {
        Self {
            in_dim: FEATURE_DIM,
            hidden: 64,
            latent: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vgae {
    pub config: VgaeConfig,
    pub params: ParamSet,
}

/// A reparameterized draw; keeping `epsilon` makes it replayable.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub mu: Tensor,
    pub log_var: Tensor,
    pub epsilon: Tensor,
    pub z: Tensor,
}

impl LatentSample {
    /// `z = mu + exp(log_var / 2) * epsilon`.
    pub fn replay(mu: Tensor, log_var: Tensor, epsilon: Tensor) -> Result<Self> {
        if mu.shape() != log_var.shape() || mu.shape() != epsilon.shape() {
            return Err(Error::Shape {
                op: "reparameterize",
                lhs: mu.shape().to_vec(),
                rhs: log_var.shape().to_vec(),
            });
        }
        let data = mu
            .data()
            .iter()
            .zip(log_var.data().iter().zip(epsilon.data()))
            .map(|(m, (l, e))| m + (0.5 * l).exp() * e)
            .collect();
        let z = Tensor::new(mu.shape().to_vec(), data)?;
        Ok(Self { mu, log_var, epsilon, z })
    }
}

/// Standard-normal noise of the given shape.
pub fn standard_normal(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.sample(StandardNormal)).collect()).expect("sized data")
}

/// Draws `epsilon` from a seeded standard normal and forms `Z`.
pub fn reparameterize(mu: &Tensor, log_var: &Tensor, seed: u64) -> Result<LatentSample> {
    let eps = standard_normal(mu.shape(), &mut ChaCha8Rng::seed_from_u64(seed));
    LatentSample::replay(mu.clone(), log_var.clone(), eps)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Edge logits `Z Zᵀ`.
pub fn decode_logits(z: &Tensor) -> Result<Tensor> {
    if !z.is_finite() {
        return Err(Error::NonFinite { op: "decode" });
    }
    z.matmul(&z.transpose()?)
}

/// `A' = sigmoid(Z Zᵀ)`, symmetric by construction.
pub fn decode(z: &Tensor) -> Result<Tensor> {
    Ok(decode_logits(z)?.map(sigmoid))
}

/// Positive-class reweighting for a self-looped adjacency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub pos_weight: f64,
    pub norm: f64,
}

impl LossWeights {
    pub fn for_adjacency(a: &Tensor) -> Result<Self> {
        let n2 = a.numel() as f64;
        let s: f64 = a.data().iter().sum();
        if !(s > 0.0) || s >= n2 {
            return Err(Error::DegenerateGraph(format!(
                "adjacency sum {s} must lie strictly between 0 and N^2 = {n2}"
            )));
        }
        Ok(Self {
            pos_weight: (n2 - s) / s,
            norm: n2 / (2.0 * (n2 - s)),
        })
    }
}

/// Reconstruction term from probabilities (logs clamped away from zero):
/// `norm * sum_ij [ -pos_weight * A_ij ln A'_ij - (1 - A_ij) ln(1 - A'_ij) ]`.
pub fn reconstruction_loss(a: &Tensor, a_prime: &Tensor) -> Result<f64> {
    if a.shape() != a_prime.shape() {
        return Err(Error::Shape {
            op: "reconstruction_loss",
            lhs: a.shape().to_vec(),
            rhs: a_prime.shape().to_vec(),
        });
    }
    let w = LossWeights::for_adjacency(a)?;
    let tiny = f64::MIN_POSITIVE;
    let total: f64 = a
        .data()
        .iter()
        .zip(a_prime.data())
        .map(|(&t, &p)| -w.pos_weight * t * p.max(tiny).ln() - (1.0 - t) * (1.0 - p).max(tiny).ln())
        .sum();
    Ok(w.norm * total)
}

/// Terms of the negative ELBO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElboParts {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-r..r)).collect();
    Tensor::matrix(rows, cols, data).expect("sized data")
}

impl Vgae {
    pub fn new(config: VgaeConfig, seed: u64) -> Result<Self> {
        if config.in_dim == 0 || config.hidden == 0 || config.latent == 0 {
            return Err(Error::Argument("VGAE widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        params.insert(W0, glorot(config.in_dim, config.hidden, &mut rng))?;
        params.insert(W_MU, glorot(config.hidden, config.latent, &mut rng))?;
        params.insert(W_LOGVAR, glorot(config.hidden, config.latent, &mut rng))?;
        Ok(Self { config, params })
    }

    pub fn to_checkpoint(&self, mut meta: Map<String, Value>) -> Checkpoint {
        meta.insert("kind".into(), Value::from("vgae"));
        meta.insert("config".into(), serde_json::to_value(self.config).expect("config serializes"));
        Checkpoint {
            meta,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta.get("kind").and_then(Value::as_str) != Some("vgae") {
            return Err(Error::Checkpoint("not a VGAE checkpoint".into()));
        }
        let config: VgaeConfig = serde_json::from_value(
            ckpt.meta
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("VGAE checkpoint without config".into()))?,
        )
        .map_err(|e| Error::Checkpoint(format!("bad VGAE config: {e}")))?;
        let shapes = [
            (W0, [config.in_dim, config.hidden]),
            (W_MU, [config.hidden, config.latent]),
            (W_LOGVAR, [config.hidden, config.latent]),
        ];
        for (name, shape) in shapes {
            if ckpt.params.get(name).map(Tensor::shape) != Some(&shape[..]) {
                return Err(Error::Checkpoint(format!("tensor `{name}` missing or misshapen")));
            }
        }
        Ok(Self {
            config,
            params: ckpt.params.clone(),
        })
    }

    fn check_inputs(&self, adj: &AdjacencyMatrix, x: &Tensor) -> Result<()> {
        let (rows, cols) = x.dims2()?;
        if cols != self.config.in_dim || rows != adj.n() {
            return Err(Error::Shape {
                op: "encode",
                lhs: adj.a_tilde.shape().to_vec(),
                rhs: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Records `H = relu(Ã X W0)`, `mu = Ã H W_mu`, `log_var = Ã H W_sigma`.
    /// `ax` is the precomputed product `Ã X`.
    pub fn encode_on_tape(&self, tape: &mut Tape, vars: &[Var], a_tilde: Var, ax: Var) -> Result<(Var, Var)> {
        let w = |name: &str| vars[self.params.slot(name).expect("registered")];
        let h = tape.matmul(ax, w(W0))?;
        let h = tape.relu(h)?;
        let ah = tape.matmul(a_tilde, h)?;
        let mu = tape.matmul(ah, w(W_MU))?;
        let log_var = tape.matmul(ah, w(W_LOGVAR))?;
        Ok((mu, log_var))
    }

    pub fn encode(&self, adj: &AdjacencyMatrix, x: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_inputs(adj, x)?;
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let a = tape.constant(adj.a_tilde.clone());
        let ax = tape.constant(adj.a_tilde.matmul(x)?);
        let (mu, lv) = self.encode_on_tape(&mut tape, &vars, a, ax)?;
        Ok((tape.value(mu).clone(), tape.value(lv).clone()))
    }

    /// Negative ELBO on the tape: `norm * weighted BCE(Z Zᵀ, A) + KL / N`,
    /// with `Z` formed from the supplied `epsilon`. Returns `(total, recon, kl)`.
    pub fn elbo_on_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        adj: &AdjacencyMatrix,
        ax: &Tensor,
        epsilon: &Tensor,
    ) -> Result<(Var, Var, Var)> {
        let w = LossWeights::for_adjacency(&adj.a)?;
        let a = tape.constant(adj.a_tilde.clone());
        let ax = tape.constant(ax.clone());
        let (mu, log_var) = self.encode_on_tape(tape, vars, a, ax)?;
        let std = tape.affine(log_var, 0.5, 0.0)?;
        let std = tape.exp(std)?;
        let eps = tape.constant(epsilon.clone());
        let noise = tape.mul(std, eps)?;
        let z = tape.add(mu, noise)?;
        let logits = tape.matmul_nt(z, z)?;
        let recon = tape.weighted_bce_with_logits(logits, &adj.a, w.pos_weight, w.norm)?;
        let kl = tape.gaussian_kl(mu, log_var)?;
        let total = tape.add(recon, kl)?;
        Ok((total, recon, kl))
    }

    pub fn elbo_loss(&self, adj: &AdjacencyMatrix, x: &Tensor, epsilon: &Tensor) -> Result<ElboParts> {
        self.check_inputs(adj, x)?;
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let ax = adj.a_tilde.matmul(x)?;
        let (t, r, k) = self.elbo_on_tape(&mut tape, &vars, adj, &ax, epsilon)?;
        let item = |v: Var| tape.value(v).item().expect("scalar");
        Ok(ElboParts {
            reconstruction: item(r),
            kl: item(k),
            total: item(t),
        })
    }
}
