use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streetvae::graph::{normalize_adjacency, AdjacencyMatrix, StreetGraph};
use streetvae::nodemodel::{NodeFeatureMode, NodeModel, NodeModelConfig};
use streetvae::synth::{coordinate_features, grid, perturbed_grid};
use streetvae::tensor::gradcheck::check_gradients;
use streetvae::tensor::{read_checkpoint, write_checkpoint, Tape, Tensor};
use streetvae::vgae::{
    decode, generate_network, reconstruction_loss, reparameterize, train_vgae, GenerateConfig, GraphSample,
    LatentSample, LossWeights, Vgae, VgaeConfig, VgaeTrainConfig,
};
use streetvae::Error;

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn path3() -> StreetGraph {
    let nodes = vec![
        streetvae::geom::PointXY::new(0.0, 0.0),
        streetvae::geom::PointXY::new(1.0, 0.0),
        streetvae::geom::PointXY::new(2.0, 0.0),
    ];
    StreetGraph::from_edges(nodes, &[(0, 1), (1, 2)]).unwrap()
}

fn sample_of(g: &StreetGraph, dim: usize) -> GraphSample {
    let mut fitted = g.clone();
    fitted.fit_normalization().unwrap();
    GraphSample {
        adjacency: normalize_adjacency(g),
        features: coordinate_features(&fitted.normalized_nodes(), dim),
    }
}

fn small_vgae(seed: u64) -> Vgae {
    Vgae::new(
        VgaeConfig {
            in_dim: 16,
            hidden: 16,
            latent: 8,
        },
        seed,
    )
    .unwrap()
}

#[test]
fn encoder_shapes_and_zero_weights() {
    let g = grid(3, 4, 100.0);
    let s = sample_of(&g, 128);
    let mut m = Vgae::new(VgaeConfig::default(), 1).unwrap();
    let (mu, lv) = m.encode(&s.adjacency, &s.features).unwrap();
    assert_eq!(mu.shape(), &[12, 16]);
    assert_eq!(lv.shape(), &[12, 16]);
    for slot in 0..m.params.len() {
        m.params.tensor_mut(slot).data_mut().fill(0.0);
    }
    let (mu, lv) = m.encode(&s.adjacency, &s.features).unwrap();
    assert!(mu.data().iter().chain(lv.data()).all(|&v| v == 0.0));
}

#[test]
fn wrong_feature_width_is_a_shape_error() {
    let g = grid(2, 2, 1.0);
    let s = sample_of(&g, 64);
    let m = Vgae::new(VgaeConfig::default(), 1).unwrap();
    assert!(matches!(m.encode(&s.adjacency, &s.features), Err(Error::Shape { .. })));
}

#[test]
fn encoder_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = perturbed_grid(30, 100.0, &mut rng);
    let m = small_vgae(3);
    let s = sample_of(&g, 16);
    let n = g.num_nodes();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.reverse();
    perm.swap(0, n / 2);
    let pg = g.permuted(&perm).unwrap();
    // Row i of the permuted graph is row perm[i] of the original.
    let mut px = Vec::new();
    for &p in &perm {
        px.extend_from_slice(s.features.row(p));
    }
    let px = Tensor::matrix(n, 16, px).unwrap();
    let (mu, _) = m.encode(&s.adjacency, &s.features).unwrap();
    let (pmu, _) = m.encode(&normalize_adjacency(&pg), &px).unwrap();
    for (i, &p) in perm.iter().enumerate() {
        for (a, b) in pmu.row(i).iter().zip(mu.row(p)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn reparameterization_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mu = random_matrix(5, 3, &mut rng);
    let collapsed = Tensor::full(&[5, 3], -40.0);
    let s = reparameterize(&mu, &collapsed, 7).unwrap();
    assert!(s.z.data().iter().zip(mu.data()).all(|(z, m)| (z - m).abs() < 1e-8));

    let lv = random_matrix(5, 3, &mut rng);
    let a = reparameterize(&mu, &lv, 9).unwrap();
    assert_eq!(a, reparameterize(&mu, &lv, 9).unwrap());
    let replay = LatentSample::replay(mu.clone(), lv.clone(), a.epsilon.clone()).unwrap();
    assert_eq!(replay.z, a.z);
}

#[test]
fn monte_carlo_mean_of_z_matches_mu() {
    let mu = Tensor::matrix(1, 2, vec![0.7, -1.3]).unwrap();
    let lv = Tensor::matrix(1, 2, vec![0.4, -0.6]).unwrap();
    let draws = 10_000;
    let mut sums = [0.0; 2];
    for seed in 0..draws {
        let s = reparameterize(&mu, &lv, seed).unwrap();
        sums[0] += s.z.data()[0];
        sums[1] += s.z.data()[1];
    }
    for k in 0..2 {
        let sigma = (0.5 * lv.data()[k]).exp();
        let mean = sums[k] / draws as f64;
        assert!((mean - mu.data()[k]).abs() < 3.0 * sigma / 100.0, "{mean}");
    }
}

#[test]
fn decoder_values() {
    let zero = decode(&Tensor::zeros(&[2, 2])).unwrap();
    assert!(zero.data().iter().all(|&v| v == 0.5));
    let ones = decode(&Tensor::full(&[2, 2], 1.0)).unwrap();
    assert!((ones.get(0, 1) - 0.880_797_077_977_882_3).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z = random_matrix(7, 4, &mut rng);
    let p = decode(&z).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(p.get(i, j), p.get(j, i));
            assert!(p.get(i, j) > 0.0 && p.get(i, j) < 1.0);
        }
    }
}

#[test]
fn reconstruction_matches_scalar_oracle_on_a_path() {
    // Self-looped path a-b-c: A = [[1,1,0],[1,1,1],[0,1,1]], sum 7 of 9.
    let adj = normalize_adjacency(&path3());
    let half = Tensor::full(&[3, 3], 0.5);
    let (n2, s) = (9.0, 7.0);
    let pos_weight = (n2 - s) / s;
    let norm = n2 / (2.0 * (n2 - s));
    let mut oracle = 0.0;
    for &t in adj.a.data() {
        let w = if t == 1.0 { pos_weight } else { 1.0 };
        oracle += w * -(0.5f64.ln());
    }
    oracle *= norm;
    let got = reconstruction_loss(&adj.a, &half).unwrap();
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");

    // Zero weights with zero noise decode to 0.5 everywhere and the KL vanishes.
    let mut m = Vgae::new(VgaeConfig { in_dim: 4, hidden: 3, latent: 2 }, 0).unwrap();
    for slot in 0..m.params.len() {
        m.params.tensor_mut(slot).data_mut().fill(0.0);
    }
    let x = Tensor::full(&[3, 4], 1.0);
    let parts = m.elbo_loss(&adj, &x, &Tensor::zeros(&[3, 2])).unwrap();
    assert_eq!(parts.kl, 0.0);
    assert!((parts.reconstruction - oracle).abs() < 1e-12);
    assert_eq!(parts.total, parts.reconstruction);
}

#[test]
fn two_node_graph_is_degenerate_once_self_looped() {
    let g = StreetGraph::from_edges(
        vec![streetvae::geom::PointXY::new(0.0, 0.0), streetvae::geom::PointXY::new(1.0, 0.0)],
        &[(0, 1)],
    )
    .unwrap();
    let adj = normalize_adjacency(&g);
    assert!(matches!(LossWeights::for_adjacency(&adj.a), Err(Error::DegenerateGraph(_))));
    assert!(matches!(
        LossWeights::for_adjacency(&Tensor::zeros(&[3, 3])),
        Err(Error::DegenerateGraph(_))
    ));
}

#[test]
fn reconstruction_decreases_toward_the_target() {
    let adj = normalize_adjacency(&path3());
    let mut last = f64::INFINITY;
    for k in 1..=20 {
        let t = k as f64 / 21.0;
        let p = adj.a.map(|a| 0.5 + (a - 0.5) * t);
        let l = reconstruction_loss(&adj.a, &p).unwrap();
        assert!(l < last && l > 0.0);
        last = l;
    }
}

#[test]
fn elbo_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let nodes = (0..6)
        .map(|i| streetvae::geom::PointXY::new(i as f64, (i * i) as f64 * 0.1))
        .collect();
    let g = StreetGraph::from_edges(nodes, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]).unwrap();
    let adj = normalize_adjacency(&g);
    let m = Vgae::new(VgaeConfig { in_dim: 5, hidden: 4, latent: 3 }, 7).unwrap();
    let x = random_matrix(6, 5, &mut rng);
    let eps = random_matrix(6, 3, &mut rng);
    let ax = adj.a_tilde.matmul(&x).unwrap();
    let inputs: Vec<Tensor> = m.params.iter().map(|(_, t)| t.clone()).collect();
    let report = check_gradients(&inputs, |tape: &mut Tape, vars| {
        Ok(m.elbo_on_tape(tape, vars, &adj, &ax, &eps)?.0)
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn loss_terms_are_non_negative(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = perturbed_grid(20, 100.0, &mut rng);
        let s = sample_of(&g, 16);
        let m = small_vgae(seed);
        let eps = random_matrix(g.num_nodes(), 8, &mut rng);
        let parts = m.elbo_loss(&s.adjacency, &s.features, &eps).unwrap();
        prop_assert!(parts.kl >= 0.0);
        prop_assert!(parts.reconstruction >= 0.0);
    }
}

fn corpus(count: usize, seed: u64) -> Vec<GraphSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_of(&perturbed_grid(36, 100.0, &mut rng), 16)).collect()
}

#[test]
fn training_is_deterministic_and_learns() {
    let train = corpus(30, 8);
    let val = corpus(8, 9);
    let cfg = VgaeTrainConfig {
        epochs: 15,
        seed: 3,
        ..VgaeTrainConfig::default()
    };
    let run = || {
        let mut m = small_vgae(10);
        let r = train_vgae(&mut m, &train, &val, &cfg, |_, _| Ok(())).unwrap();
        (m, r)
    };
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(r1, r2);
    assert_eq!(m1, m2);
    let first = r1.epochs[0].train_loss;
    let last = r1.epochs.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
    assert!(r1.epochs.last().unwrap().val_auc.unwrap() > 0.8, "{r1:?}");
}

#[test]
fn zero_epochs_leave_parameters_alone() {
    let train = corpus(3, 11);
    let mut m = small_vgae(12);
    let before = m.clone();
    let cfg = VgaeTrainConfig {
        epochs: 0,
        ..VgaeTrainConfig::default()
    };
    let r = train_vgae(&mut m, &train, &[], &cfg, |_, _| Ok(())).unwrap();
    assert!(r.epochs.is_empty());
    assert_eq!(m, before);
}

#[test]
fn checkpoint_round_trip() {
    let m = small_vgae(13);
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &m.to_checkpoint(Default::default())).unwrap();
    let back = Vgae::from_checkpoint(&read_checkpoint(&mut buf.as_slice()).unwrap()).unwrap();
    assert_eq!(back, m);
    let node = NodeModel::new(NodeModelConfig { d_model: 8, layers: 1, heads: 1, d_ff: 8, max_nodes: 4, dropout: 0.0, feature_mode: NodeFeatureMode::Mean }, 0).unwrap();
    assert!(matches!(Vgae::from_checkpoint(&node.to_checkpoint(Default::default())), Err(Error::Checkpoint(_))));
}

fn toy_node_model(seed: u64) -> NodeModel {
    let cfg = NodeModelConfig {
        d_model: 16,
        layers: 1,
        heads: 2,
        d_ff: 32,
        max_nodes: 24,
        dropout: 0.0,
        feature_mode: NodeFeatureMode::Mean,
    };
    let mut m = NodeModel::new(cfg, seed).unwrap();
    // A non-zero head makes sampling non-uniform.
    let slot = m.params.slot("head.w").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in m.params.tensor_mut(slot).data_mut() {
        *v = rng.random_range(-0.3..0.3);
    }
    m
}

#[test]
fn generation_thresholds_and_symmetry() {
    let node = toy_node_model(14);
    let vgae = small_vgae(15);
    let base = GenerateConfig {
        max_nodes: 12,
        ..GenerateConfig::default()
    };
    let g = generate_network(&node, &vgae, &base, 1).unwrap();
    g.validate().unwrap();
    let n = g.num_nodes();
    let a = g.adjacency_dense();
    for i in 0..n {
        assert_eq!(a[i * n + i], 0.0);
        for j in 0..n {
            assert_eq!(a[i * n + j], a[j * n + i]);
        }
    }
    assert_eq!(g, generate_network(&node, &vgae, &base, 1).unwrap());
    let none = generate_network(&node, &vgae, &GenerateConfig { tau: 1.0, ..base }, 1).unwrap();
    assert_eq!(none.num_edges(), 0);
    let all = generate_network(&node, &vgae, &GenerateConfig { tau: 0.0, ..base }, 1).unwrap();
    assert_eq!(all.num_edges(), n * (n - 1) / 2);
    let bern = generate_network(&node, &vgae, &GenerateConfig { bernoulli: true, ..base }, 1).unwrap();
    bern.validate().unwrap();
}

#[test]
fn generation_rejects_mismatched_models() {
    let node = toy_node_model(16);
    let vgae = Vgae::new(VgaeConfig::default(), 0).unwrap();
    assert!(matches!(
        generate_network(&node, &vgae, &GenerateConfig::default(), 0),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn identity_adjacency_helper_has_no_off_diagonal_mass() {
    let a = AdjacencyMatrix::identity(4);
    assert_eq!(a.a_tilde, Tensor::identity(4));
}

#[test]
fn overfit_generation_recovers_the_training_graph() {
    use streetvae::graph::{canonicalize, flatten_sequence, quantize_graph};
    use streetvae::nodemodel::{train_node_model, NodeTrainConfig};

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut g = canonicalize(&streetvae::synth::jitter_nodes(&grid(3, 4, 100.0), 12.0, &mut rng));
    g.fit_normalization().unwrap();
    let seq = flatten_sequence(&quantize_graph(&g));
    let cfg = NodeModelConfig {
        d_model: 32,
        layers: 2,
        heads: 4,
        d_ff: 64,
        max_nodes: 16,
        dropout: 0.0,
        feature_mode: NodeFeatureMode::Mean,
    };
    let mut node = NodeModel::new(cfg, 18).unwrap();
    let ncfg = NodeTrainConfig {
        epochs: 2000,
        batch_size: 1,
        learning_rate: 3e-3,
        stop_below: Some(0.01),
        ..NodeTrainConfig::default()
    };
    train_node_model(&mut node, std::slice::from_ref(&seq), &[], &ncfg, |_, _| Ok(())).unwrap();

    let sample = GraphSample {
        adjacency: normalize_adjacency(&g),
        features: node.node_embeddings(&seq).unwrap(),
    };
    let mut vgae = Vgae::new(VgaeConfig { in_dim: 32, ..VgaeConfig::default() }, 19).unwrap();
    let vcfg = VgaeTrainConfig {
        epochs: 400,
        identity_adjacency_prob: 0.5,
        ..VgaeTrainConfig::default()
    };
    train_vgae(&mut vgae, std::slice::from_ref(&sample), &[], &vcfg, |_, _| Ok(())).unwrap();

    let gen_cfg = GenerateConfig {
        max_nodes: 16,
        temperature: 0.0,
        ..GenerateConfig::default()
    };
    let out = generate_network(&node, &vgae, &gen_cfg, 20).unwrap();
    assert_eq!(out.num_nodes(), g.num_nodes());
    let kept = g
        .edges
        .iter()
        .filter(|e| out.edges.iter().any(|o| o.u == e.u && o.v == e.v))
        .count();
    let recall = kept as f64 / g.num_edges() as f64;
    assert!(recall >= 0.9, "recall {recall}, generated {} edges", out.num_edges());
}
