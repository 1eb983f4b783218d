use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use streetvae::geom::{NormalizationRecord, PointXY, QuantizedPoint};
use streetvae::graph::{
    build_graph, canonicalize, detokenize, extract_faces, face_polygon, flatten_sequence, normalize_adjacency,
    order_nodes, simplify_merge, StreetGraph, TokenSeq, START, STOP,
};
use streetvae::synth;
use streetvae::tensor::Tensor;
use streetvae::Error;

fn p(x: f64, y: f64) -> PointXY {
    PointXY::new(x, y)
}

#[test]
fn build_two_segments_sharing_endpoint() {
    let g = build_graph(&[vec![p(0.0, 0.0), p(1.0, 0.0)], vec![p(1.0, 0.0), p(1.0, 1.0)]]);
    assert_eq!((g.num_nodes(), g.num_edges()), (3, 2));
}

#[test]
fn build_plus_shape() {
    let g = build_graph(&[
        vec![p(-1.0, 0.0), p(0.0, 0.0), p(1.0, 0.0)],
        vec![p(0.0, -1.0), p(0.0, 0.0), p(0.0, 1.0)],
    ]);
    assert_eq!((g.num_nodes(), g.num_edges()), (5, 4));
    assert_eq!(g.degrees().iter().filter(|&&d| d == 4).count(), 1);
}

#[test]
fn build_closed_rectangle() {
    let g = build_graph(&[vec![p(0.0, 0.0), p(2.0, 0.0), p(2.0, 1.0), p(0.0, 1.0), p(0.0, 0.0)]]);
    assert_eq!((g.num_nodes(), g.num_edges()), (4, 4));
    g.validate().unwrap();
}

#[test]
fn build_keeps_intermediate_geometry() {
    let g = build_graph(&[vec![p(0.0, 0.0), p(5.0, 3.0), p(10.0, 0.0)]]);
    assert_eq!((g.num_nodes(), g.num_edges()), (2, 1));
    let geom = g.edges[0].geometry.as_ref().unwrap();
    assert_eq!(geom.len(), 3);
    assert!((g.edge_length(&g.edges[0]) - 2.0 * 34f64.sqrt()).abs() < 1e-12);
}

#[test]
fn build_snaps_within_tolerance_and_collapses_duplicates() {
    let g = build_graph(&[
        vec![p(0.0, 0.0), p(10.0, 0.0)],
        vec![p(10.0 + 2e-7, 0.0), p(0.0, 1e-7)],
    ]);
    assert_eq!((g.num_nodes(), g.num_edges()), (2, 1));
    assert_eq!(build_graph(&[]), StreetGraph::default());
}

#[test]
fn merge_pair_to_centroid() {
    let g = StreetGraph::from_edges(vec![p(0.0, 0.0), p(6.0, 0.0)], &[(0, 1)]).unwrap();
    let m = simplify_merge(&g, 10.0);
    assert_eq!(m.nodes, vec![p(3.0, 0.0)]);
    assert_eq!(m.num_edges(), 0);
}

#[test]
fn merge_chain_is_transitive() {
    let g = StreetGraph::from_edges(vec![p(0.0, 0.0), p(6.0, 0.0), p(12.0, 0.0)], &[(0, 1), (1, 2)]).unwrap();
    let m = simplify_merge(&g, 10.0);
    assert_eq!(m.nodes, vec![p(6.0, 0.0)]);
}

#[test]
fn merge_far_nodes_is_identity() {
    let g = synth::grid(3, 3, 100.0);
    assert_eq!(simplify_merge(&g, 10.0), g);
}

#[test]
fn merge_reattaches_edges_and_drops_duplicates() {
    // A short link 0-1 inside a triangle fan: 0 and 1 merge, 0-2 and 1-2 collapse.
    let g = StreetGraph::from_edges(
        vec![p(0.0, 0.0), p(4.0, 0.0), p(2.0, 100.0), p(200.0, 0.0)],
        &[(0, 1), (0, 2), (1, 2), (1, 3)],
    )
    .unwrap();
    let m = simplify_merge(&g, 10.0);
    assert_eq!(m.num_nodes(), 3);
    assert_eq!(m.nodes[0], p(2.0, 0.0));
    assert_eq!(m.num_edges(), 2);
    m.validate().unwrap();
}

proptest! {
    #[test]
    fn merge_is_a_fixed_point(pts in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..40), threshold in 0.0f64..20.0) {
        let nodes: Vec<_> = pts.iter().map(|&(x, y)| p(x, y)).collect();
        let pairs: Vec<_> = (1..nodes.len()).map(|i| (i - 1, i)).collect();
        let g = StreetGraph::from_edges(nodes, &pairs).unwrap();
        let once = simplify_merge(&g, threshold);
        once.validate().unwrap();
        for i in 0..once.num_nodes() {
            for j in i + 1..once.num_nodes() {
                prop_assert!(once.nodes[i].distance(once.nodes[j]) >= threshold);
            }
        }
        prop_assert_eq!(simplify_merge(&once, threshold), once);
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` built from explicit diagonal matrices.
fn oracle_a_tilde(g: &StreetGraph) -> Tensor {
    let n = g.num_nodes();
    let mut a = g.adjacency_dense();
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    let a = Tensor::matrix(n, n, a).unwrap();
    let mut d = Tensor::zeros(&[n, n]);
    for i in 0..n {
        let deg: f64 = a.row(i).iter().sum();
        d.data_mut()[i * n + i] = deg.powf(-0.5);
    }
    d.matmul(&a).unwrap().matmul(&d).unwrap()
}

#[test]
fn adjacency_examples() {
    let single = normalize_adjacency(&StreetGraph::new(vec![p(0.0, 0.0)]));
    assert_eq!(single.a_tilde.data(), &[1.0]);

    let pair = StreetGraph::from_edges(vec![p(0.0, 0.0), p(1.0, 0.0)], &[(0, 1)]).unwrap();
    let adj = normalize_adjacency(&pair);
    for v in adj.a_tilde.data() {
        assert!((v - 0.5).abs() < 1e-15);
    }

    let path = StreetGraph::from_edges(vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)], &[(0, 1), (1, 2)]).unwrap();
    let adj = normalize_adjacency(&path);
    let diag: Vec<f64> = (0..3).map(|i| adj.a_tilde.get(i, i)).collect();
    for (got, want) in diag.iter().zip([0.5, 1.0 / 3.0, 0.5]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert_eq!(adj.degree, vec![2.0, 3.0, 2.0]);
}

#[test]
fn adjacency_matches_matrix_oracle_and_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let g = synth::random_connected_planar(4, 5, &mut rng);
        let adj = normalize_adjacency(&g);
        let oracle = oracle_a_tilde(&g);
        let n = g.num_nodes();
        for i in 0..n {
            for j in 0..n {
                let v = adj.a_tilde.get(i, j);
                assert!((v - oracle.get(i, j)).abs() < 1e-12);
                assert_eq!(v, adj.a_tilde.get(j, i));
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

#[test]
fn ordering_examples() {
    let g = StreetGraph::new(vec![p(1.0, 2.0), p(0.0, 1.0), p(2.0, 1.0)]);
    assert_eq!(order_nodes(&g), vec![1, 2, 0]);

    let g = StreetGraph::new(vec![p(5.0, 3.0), p(1.0, 1.0), p(9.0, 2.0)]);
    assert_eq!(order_nodes(&g), vec![1, 2, 0]);

    let g = StreetGraph::new(vec![p(1.0, 1.0), p(0.0, 0.0), p(1.0, 1.0)]);
    assert_eq!(order_nodes(&g), vec![1, 0, 2]);
}

proptest! {
    #[test]
    fn ordering_is_a_deterministic_permutation(pts in prop::collection::vec((-5i32..5, -5i32..5), 0..30)) {
        let g = StreetGraph::new(pts.iter().map(|&(x, y)| p(x as f64, y as f64)).collect());
        let order = order_nodes(&g);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..pts.len()).collect::<Vec<_>>());
        prop_assert_eq!(order_nodes(&g), order.clone());
        for w in order.windows(2) {
            let (a, b) = (g.nodes[w[0]], g.nodes[w[1]]);
            prop_assert!(a.y < b.y || (a.y == b.y && (a.x < b.x || (a.x == b.x && w[0] < w[1]))));
        }
    }

    #[test]
    fn tokens_round_trip(qs in prop::collection::vec((0u8..=255, 0u8..=255), 0..50)) {
        let points: Vec<_> = qs.iter().map(|&(qx, qy)| QuantizedPoint { qx, qy }).collect();
        let seq = flatten_sequence(&points);
        prop_assert_eq!(seq.len(), 2 * points.len() + 2);
        prop_assert_eq!(detokenize(&seq).unwrap(), points);
    }
}

#[test]
fn flatten_single_node() {
    let seq = flatten_sequence(&[QuantizedPoint { qx: 5, qy: 7 }]);
    assert_eq!(seq, TokenSeq(vec![START, 5, 7, STOP]));
}

#[test]
fn detokenize_rejects_bad_grammar() {
    for bad in [vec![5, 7, STOP], vec![START, 5, STOP], vec![START, 5, START, STOP], vec![START]] {
        assert!(matches!(detokenize(&TokenSeq(bad)), Err(Error::Input(_))));
    }
}

#[test]
fn faces_of_square() {
    let g = StreetGraph::from_edges(
        vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)],
        &[(0, 1), (1, 2), (2, 3), (0, 3)],
    )
    .unwrap();
    let faces = extract_faces(&g).unwrap();
    assert_eq!(faces.len(), 2);
    let inner: Vec<_> = faces.iter().filter(|f| !f.is_outer).collect();
    assert_eq!(inner.len(), 1);
    assert_eq!(inner[0].ring.len(), 4);
    assert!((inner[0].signed_area - 1.0).abs() < 1e-12);
}

#[test]
fn faces_of_grid_and_tree() {
    let faces = extract_faces(&synth::grid(3, 3, 100.0)).unwrap();
    assert_eq!(faces.len(), 5);
    assert_eq!(faces.iter().filter(|f| f.is_outer).count(), 1);

    let tree = StreetGraph::from_edges(vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 1.0), p(1.0, -1.0)], &[(0, 1), (1, 2), (1, 3)]).unwrap();
    let faces = extract_faces(&tree).unwrap();
    assert_eq!(faces.len(), 1);
    assert!(faces[0].is_outer);
    assert_eq!(faces[0].ring.len(), 6);
}

#[test]
fn crossing_edges_are_named() {
    let g = StreetGraph::from_edges(
        vec![p(0.0, 0.0), p(2.0, 2.0), p(0.0, 2.0), p(2.0, 0.0)],
        &[(0, 1), (2, 3)],
    )
    .unwrap();
    match extract_faces(&g) {
        Err(Error::NonPlanar { first, second }) => assert_eq!((first, second), ((0, 1), (2, 3))),
        other => panic!("expected non-planar error, got {other:?}"),
    }
    // overlapping collinear edges from one node
    let g = StreetGraph::from_edges(vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)], &[(0, 1), (0, 2)]).unwrap();
    assert!(matches!(extract_faces(&g), Err(Error::NonPlanar { .. })));
}

#[test]
fn euler_on_random_connected_planar_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let g = synth::random_connected_planar(5, 6, &mut rng);
        assert!(g.is_connected());
        let faces = extract_faces(&g).unwrap();
        let (v, e, f) = (g.num_nodes() as i64, g.num_edges() as i64, faces.len() as i64);
        assert_eq!(v - e + f, 2);
        assert_eq!(faces.iter().map(|f| f.ring.len()).sum::<usize>(), 2 * g.num_edges());
        let mut half_edges = std::collections::HashSet::new();
        for face in &faces {
            let k = face.ring.len();
            for i in 0..k {
                assert!(half_edges.insert((face.ring[i], face.ring[(i + 1) % k])));
            }
        }
        for face in faces.iter().filter(|f| !f.is_outer) {
            assert!(face.signed_area > 0.0);
        }
    }
}

#[test]
fn face_polygon_substitutes_geometry() {
    let g = build_graph(&[
        vec![p(0.0, 0.0), p(10.0, 0.0)],
        vec![p(10.0, 0.0), p(12.0, 5.0), p(10.0, 10.0)],
        vec![p(10.0, 10.0), p(0.0, 10.0), p(0.0, 0.0)],
    ]);
    let faces = extract_faces(&g).unwrap();
    let inner = faces.iter().find(|f| !f.is_outer).unwrap();
    let ring = face_polygon(&g, inner);
    assert_eq!(ring.len(), 5);
    assert!(ring.contains(&p(12.0, 5.0)));
}

#[test]
fn json_round_trip_and_key_order() {
    let mut g = build_graph(&[vec![p(0.0, 0.0), p(5.0, 3.0), p(10.0, 0.0)], vec![p(10.0, 0.0), p(10.0, 7.5)]]);
    g.crs = "utm/31N".into();
    g.normalization = NormalizationRecord {
        center: [5.0, 3.75],
        scale: 0.08,
    };
    let g = canonicalize(&g);
    let text = g.to_json();
    let keys = ["\"crs\"", "\"normalization\"", "\"nodes\"", "\"edges\""];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(StreetGraph::from_json(&text).unwrap(), g);
    assert!(StreetGraph::from_json(r#"{"crs":"","normalization":{"center":[0,0],"scale":1},"nodes":[{"id":1,"x":0,"y":0}],"edges":[]}"#).is_err());
}
