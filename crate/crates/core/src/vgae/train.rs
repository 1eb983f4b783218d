//! Full-batch-per-graph ELBO training and held-out edge AUC.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{decode_logits, standard_normal, Vgae};
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::tensor::{Adam, AdamConfig, Tape, Tensor};

/// One graph with its node features.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub adjacency: AdjacencyMatrix,
    pub features: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VgaeTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stop after the first epoch whose held-out AUC reaches this value.
    pub stop_at_auc: Option<f64>,
    /// Probability of encoding a training graph with `Ã = I` (as at
    /// generation time) while still reconstructing its true adjacency.
    pub identity_adjacency_prob: f64,
}

impl Default for VgaeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            seed: 0,
            stop_at_auc: None,
            identity_adjacency_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VgaeEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VgaeTrainReport {
    pub epochs: Vec<VgaeEpoch>,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Area under the ROC curve of `scores` for separating edges from
/// non-edges over unordered pairs `i < j` (Mann-Whitney, ties count half).
/// `None` when either class is empty.
pub fn edge_auc(adjacency: &Tensor, scores: &Tensor) -> Option<f64> {
    let n = adjacency.rows();
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((scores.get(i, j), adjacency.get(i, j) > 0.5));
        }
    }
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * pairs[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos as f64 * neg as f64))
}

/// Mean per-graph edge AUC with latent means as embeddings; graphs where
/// AUC is undefined are skipped.
pub fn evaluate_auc(model: &Vgae, samples: &[GraphSample]) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in samples {
        let (mu, _) = model.encode(&s.adjacency, &s.features)?;
        if let Some(auc) = edge_auc(&s.adjacency.a, &decode_logits(&mu)?) {
            total += auc;
            count += 1;
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

/// One Adam step per training graph per epoch, graphs visited in a seeded
/// shuffled order. `on_epoch` sees the stats and the current model.
pub fn train_vgae(
    model: &mut Vgae,
    train: &[GraphSample],
    val: &[GraphSample],
    cfg: &VgaeTrainConfig,
    mut on_epoch: impl FnMut(&VgaeEpoch, &Vgae) -> Result<()>,
) -> Result<VgaeTrainReport> {
    if train.is_empty() {
        return Err(Error::Usage("no training graphs".into()));
    }
    if !(cfg.learning_rate > 0.0) || !(0.0..=1.0).contains(&cfg.identity_adjacency_prob) {
        return Err(Error::Argument("bad VGAE training configuration".into()));
    }
    for s in train.iter().chain(val) {
        model.check_inputs(&s.adjacency, &s.features)?;
    }
    // Ã X never changes, so it is computed once per graph.
    let ax: Vec<Tensor> = train
        .iter()
        .map(|s| s.adjacency.a_tilde.matmul(&s.features))
        .collect::<Result<_>>()?;
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = VgaeTrainReport {
        epochs: Vec::new(),
        steps: 0,
        stopped_early: false,
    };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &g in &order {
            let sample = &train[g];
            let n = sample.adjacency.n();
            let eps = standard_normal(&[n, model.config.latent], &mut rng);
            let identity = cfg.identity_adjacency_prob > 0.0 && rng.random::<f64>() < cfg.identity_adjacency_prob;
            let identity_adj;
            let (adj, ax_g) = if identity {
                identity_adj = AdjacencyMatrix {
                    a: sample.adjacency.a.clone(),
                    degree: sample.adjacency.degree.clone(),
                    a_tilde: Tensor::identity(n),
                };
                (&identity_adj, &sample.features)
            } else {
                (&sample.adjacency, &ax[g])
            };
            let diverged = |e: Error| match e {
                Error::NonFinite { .. } | Error::Optimizer { .. } => Error::Diverged {
                    context: format!("graph {g}, epoch {epoch}: {e}"),
                },
                other => other,
            };
            let mut tape = Tape::new();
            let vars = model.params.bind(&mut tape);
            let (loss, _, _) = model.elbo_on_tape(&mut tape, &vars, adj, ax_g, &eps).map_err(diverged)?;
            let value = tape.value(loss).item().expect("scalar");
            if !value.is_finite() {
                return Err(Error::Diverged {
                    context: format!("graph {g}, epoch {epoch}: loss {value}"),
                });
            }
            let mut grads = tape.backward(loss).map_err(diverged)?;
            let grads: Vec<Tensor> = vars
                .iter()
                .enumerate()
                .map(|(slot, &v)| grads.take(v).unwrap_or_else(|| Tensor::zeros(model.params.tensor(slot).shape())))
                .collect();
            adam.step(&mut model.params, &grads).map_err(diverged)?;
            report.steps += 1;
            loss_sum += value;
        }
        let stats = VgaeEpoch {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_auc: evaluate_auc(model, val)?,
        };
        log::debug!("epoch {epoch}: loss {:.5}, val auc {:?}", stats.train_loss, stats.val_auc);
        on_epoch(&stats, model)?;
        let reached = matches!((cfg.stop_at_auc, stats.val_auc), (Some(t), Some(a)) if a >= t);
        report.epochs.push(stats);
        if reached {
            report.stopped_early = true;
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(n: usize, v: &[f64]) -> Tensor {
        Tensor::matrix(n, n, v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_and_inverted_rankings() {
        let a = m(3, &[1., 1., 0., 1., 1., 1., 0., 1., 1.]);
        let good = m(3, &[0., 5., -5., 5., 0., 4., -5., 4., 0.]);
        assert_eq!(edge_auc(&a, &good), Some(1.0));
        let bad = good.map(|v| -v);
        assert_eq!(edge_auc(&a, &bad), Some(0.0));
    }

    #[test]
    fn ties_count_half() {
        let a = m(3, &[1., 1., 0., 1., 1., 1., 0., 1., 1.]);
        assert_eq!(edge_auc(&a, &Tensor::zeros(&[3, 3])), Some(0.5));
    }

    #[test]
    fn undefined_without_both_classes() {
        let full = Tensor::full(&[3, 3], 1.0);
        assert_eq!(edge_auc(&full, &Tensor::zeros(&[3, 3])), None);
    }
}
