//! Minibatch Adam training for the node model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::NodeModel;
use crate::error::{Error, Result};
use crate::graph::TokenSeq;
use crate::tensor::{Adam, AdamConfig, Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stop once this many optimizer steps have run.
    pub max_steps: Option<usize>,
    /// Stop as soon as a batch loss falls below this value.
    pub stop_below: Option<f64>,
}

impl Default for NodeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            max_steps: None,
            stop_below: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeEpoch {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeTrainReport {
    pub epochs: Vec<NodeEpoch>,
    pub steps: usize,
    pub last_batch_loss: f64,
    pub stopped_early: bool,
}

/// Trains in place. `on_epoch` runs after every epoch with the stats and
/// the current model (checkpointing hooks in here).
pub fn train_node_model(
    model: &mut NodeModel,
    train: &[TokenSeq],
    val: &[TokenSeq],
    cfg: &NodeTrainConfig,
    mut on_epoch: impl FnMut(&NodeEpoch, &NodeModel) -> Result<()>,
) -> Result<NodeTrainReport> {
    if train.is_empty() {
        return Err(Error::Usage("no training sequences".into()));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Argument("batch size and learning rate must be positive".into()));
    }
    for s in train.iter().chain(val) {
        NodeModel::split_targets(s.tokens())?;
        model.check_tokens(s.tokens())?;
    }
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = NodeTrainReport {
        epochs: Vec::new(),
        steps: 0,
        last_batch_loss: f64::NAN,
        stopped_early: false,
    };
    let val_refs: Vec<&[u16]> = val.iter().map(TokenSeq::tokens).collect();

    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        let mut tokens = 0usize;
        let mut halt = false;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[u16]> = chunk.iter().map(|&i| train[i].tokens()).collect();
            let count: usize = batch.iter().map(|s| s.len() - 1).sum();
            let mut tape = Tape::new();
            let vars = model.params.bind(&mut tape);
            let context = || format!("epoch {epoch}, step {}", report.steps);
            let loss = model
                .batch_loss_on_tape(&mut tape, &vars, &batch, Some(&mut rng))
                .map_err(|e| diverged(e, context()))?;
            let value = tape.value(loss).item().expect("scalar loss");
            if !value.is_finite() {
                return Err(Error::Diverged { context: context() });
            }
            let mut grads = tape.backward(loss).map_err(|e| diverged(e, context()))?;
            let grads: Vec<Tensor> = vars
                .iter()
                .enumerate()
                .map(|(slot, &v)| grads.take(v).unwrap_or_else(|| Tensor::zeros(model.params.tensor(slot).shape())))
                .collect();
            adam.step(&mut model.params, &grads).map_err(|e| diverged(e, context()))?;
            report.steps += 1;
            report.last_batch_loss = value;
            weighted += value * count as f64;
            tokens += count;
            if cfg.stop_below.is_some_and(|t| value < t) || cfg.max_steps.is_some_and(|m| report.steps >= m) {
                halt = true;
                break;
            }
        }
        let stats = NodeEpoch {
            epoch,
            train_nll: weighted / tokens as f64,
            val_nll: if val_refs.is_empty() { None } else { Some(model.mean_nll(&val_refs)?) },
            steps: report.steps,
        };
        log::debug!(
            "epoch {epoch}: train nll {:.4}, val nll {:?}",
            stats.train_nll,
            stats.val_nll
        );
        on_epoch(&stats, model)?;
        report.epochs.push(stats);
        if halt {
            report.stopped_early = true;
            break 'epochs;
        }
    }
    Ok(report)
}

fn diverged(e: Error, context: String) -> Error {
    match e {
        Error::NonFinite { .. } | Error::Optimizer { .. } => Error::Diverged {
            context: format!("{context}: {e}"),
        },
        other => other,
    }
}
