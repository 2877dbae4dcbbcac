//! Dataset files, the leakage detector and its trained probe.

use std::fs;

use pathmlp::data::{
    detect_leakage, generate_leaked, generate_synthetic, load_manifest, save_dataset, verify_leakage, Dataset,
    LeakedConfig, ProbeConfig, SyntheticKind,
};
use pathmlp::graph::{Graph, Labels, NodeFeatures};
use pathmlp::train::{make_random_split, SplitProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn saved_dataset_loads_back_identically() {
    let data = generate_synthetic(SyntheticKind::Heterophilous, 90, 5, 3, 2).unwrap().dataset;
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&data, dir.path()).unwrap();
    assert_eq!(load_manifest(&manifest).unwrap(), data);
}

#[test]
fn two_node_fixture_loads() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("m.edges"), "# one edge\n0 1\n1 0\n").unwrap();
    fs::write(p.join("m.features"), "2 2\n1 0\n0 1\n").unwrap();
    fs::write(p.join("m.labels"), "0\n1\n").unwrap();
    fs::write(
        p.join("m.manifest"),
        "name=m\nedges=m.edges\nfeatures=m.features\nlabels=m.labels\nnodes=2\nfeature_dim=2\nclasses=2\n",
    )
    .unwrap();
    let d = load_manifest(&p.join("m.manifest")).unwrap();
    assert_eq!(d.graph.edge_count(), 1);
    assert_eq!(d.labels.values(), &[0, 1]);
}

#[test]
fn out_of_range_endpoint_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("m.edges"), "0 1\n1 7\n").unwrap();
    fs::write(p.join("m.features"), "2 1\n1\n0\n").unwrap();
    fs::write(p.join("m.labels"), "0\n1\n").unwrap();
    fs::write(
        p.join("m.manifest"),
        "name=m\nedges=m.edges\nfeatures=m.features\nlabels=m.labels\nnodes=2\nfeature_dim=1\nclasses=2\n",
    )
    .unwrap();
    let msg = load_manifest(&p.join("m.manifest")).unwrap_err().to_string();
    assert!(msg.contains("m.edges:2"), "{msg}");
}

proptest! {
    #[test]
    fn duplication_rates_ignore_label_names(
        n in 2usize..30,
        raw in prop::collection::vec((0usize..30, 0usize..30), 0..60),
        ys in prop::collection::vec(0usize..3, 30),
        shift in 1usize..3,
    ) {
        let edges: Vec<_> = raw.into_iter().map(|(a, b)| (a % n, b % n)).collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        let y = Labels::new(ys[..n].to_vec(), 3).unwrap();
        let y2 = Labels::new(ys[..n].iter().map(|c| (c + shift) % 3).collect(), 3).unwrap();
        let a = detect_leakage(&g, &y).unwrap();
        prop_assert_eq!(a, detect_leakage(&g, &y2).unwrap());
        prop_assert!(a.adjacency_label <= a.adjacency);
        prop_assert!((0.0..=1.0).contains(&a.adjacency));
    }
}

#[test]
fn probe_gains_on_leaked_rows() {
    let data = generate_leaked(&LeakedConfig::default()).unwrap();
    let split = make_random_split(data.graph.node_count(), SplitProfile::Standard, 0).unwrap();
    let r = verify_leakage(&data, &split, &ProbeConfig::default()).unwrap();
    assert!(r.gain > 0.2, "{r:?}");
}

/// Labels live in the features; the graph is random.
fn feature_only(seed: u64) -> Dataset {
    let (n, f, c) = (400, 8, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<usize> = (0..n).map(|v| v % c).collect();
    let x: Vec<f64> = y
        .iter()
        .flat_map(|&k| (0..f).map(move |j| if j == k { 2.0 } else { 0.0 }))
        .map(|v: f64| v + rng.random_range(-0.5..0.5))
        .collect();
    let edges: Vec<_> = (0..n * 4).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
    Dataset {
        name: "feature-only".into(),
        graph: Graph::from_edges(n, &edges).unwrap(),
        features: NodeFeatures::from_rows(n, f, x).unwrap(),
        labels: Labels::new(y, c).unwrap(),
        split: None,
    }
}

#[test]
fn probe_is_flat_without_leakage() {
    let data = feature_only(1);
    let split = make_random_split(400, SplitProfile::Standard, 0).unwrap();
    let r = verify_leakage(&data, &split, &ProbeConfig::default()).unwrap();
    assert_eq!(r.rates.adjacency, 0.0);
    assert!(r.gain.abs() < 0.03, "{r:?}");
}
