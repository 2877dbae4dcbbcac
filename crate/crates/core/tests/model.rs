//! Path model properties and end-to-end gradient checks.

use ndarray::Array2;
use pathmlp::autodiff::{finite_difference_check, ParamStore, Tape};
use pathmlp::graph::{Graph, NodeFeatures};
use pathmlp::model::{Mode, ModelConfig, NodeClassifier, PathMlp, Variant};
use pathmlp::sampler::{sample_all, PathTable, SamplerConfig, Strategy};
use pathmlp::train::Grid;
use pathmlp::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(n: usize, f: usize, seed: u64) -> (Graph, NodeFeatures, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<_> = (0..n * 2).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
    let x = Array2::from_shape_simple_fn((n, f), || rng.random_range(-1.0..1.0));
    let y = (0..n).map(|_| rng.random_range(0..3)).collect();
    (Graph::from_edges(n, &edges).unwrap(), NodeFeatures::new(x).unwrap(), y)
}

fn config(f: usize, d: usize, n_paths: usize, beta: f64) -> ModelConfig {
    ModelConfig {
        input_dim: f,
        f_prime: 12,
        f_h: 16,
        classes: 3,
        d,
        n_paths,
        beta,
        dropout: 0.0,
        variant: Variant::Base,
        m: 1,
    }
}

fn build(cfg: ModelConfig, g: &Graph, x: &NodeFeatures, paths: &PathTable, seed: u64) -> (PathMlp, ParamStore) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = PathMlp::new(cfg, g, x, paths, &mut store, &mut rng).unwrap();
    (model, store)
}

fn eval_probs(model: &PathMlp, store: &ParamStore) -> Array2<f64> {
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = model.forward(&mut tape, store, Mode::Eval, &mut rng).unwrap();
    tape.value(p).clone()
}

fn randomize_eps(store: &mut ParamStore, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = store.find("eps_logits").unwrap();
    store.get_mut(id).value.mapv_inplace(|_| rng.random_range(-2.0..2.0));
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let (g, x, y) = random_graph(30, 8, 7);
    let paths = sample_all(&g, &x, &SamplerConfig::new(3, 4, Strategy::Similarity, 7).unwrap()).unwrap();
    for beta in [0.0, 0.5] {
        let (model, mut store) = build(config(8, 3, 4, beta), &g, &x, &paths, 3);
        randomize_eps(&mut store, 11);
        let rows: Vec<usize> = (0..30).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let report = finite_difference_check(
            &mut store,
            |s| {
                let mut tape = Tape::new();
                let mut unused = ChaCha8Rng::seed_from_u64(0);
                let p = model.forward(&mut tape, s, Mode::Eval, &mut unused)?;
                let l = tape.cross_entropy_mean(p, &rows, &y)?;
                Ok((tape, l))
            },
            1e-5,
            40,
            &mut rng,
        )
        .unwrap();
        assert!(report.checked > 200, "{report:?}");
        assert!(report.max_rel_error < 1e-4, "beta={beta}: {report:?}");
    }
}

#[test]
fn backward_is_linear_in_the_loss() {
    let (g, x, y) = random_graph(20, 5, 2);
    let paths = sample_all(&g, &x, &SamplerConfig::new(2, 3, Strategy::Bfs, 2).unwrap()).unwrap();
    let (model, mut store) = build(config(5, 2, 3, 0.3), &g, &x, &paths, 1);
    let rows: Vec<usize> = (0..20).collect();
    let y2: Vec<usize> = y.iter().map(|&k| (k + 1) % 3).collect();
    let (a, b) = (0.7, -1.9);

    let grads = |store: &mut ParamStore, which: u8| -> Vec<Array2<f64>> {
        let mut tape = Tape::new();
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let p = model.forward(&mut tape, store, Mode::Eval, &mut unused).unwrap();
        let l1 = tape.cross_entropy_mean(p, &rows, &y).unwrap();
        let l2 = tape.cross_entropy_mean(p, &rows, &y2).unwrap();
        let loss = match which {
            1 => l1,
            2 => l2,
            _ => {
                let s1 = tape.scale(l1, a).unwrap();
                let s2 = tape.scale(l2, b).unwrap();
                tape.add(s1, s2).unwrap()
            }
        };
        tape.backward(loss, store).unwrap();
        store.iter().map(|p| p.grad.clone()).collect()
    };
    let g1 = grads(&mut store, 1);
    let g2 = grads(&mut store, 2);
    let gc = grads(&mut store, 0);
    for ((x1, x2), xc) in g1.iter().zip(&g2).zip(&gc) {
        for ((u, v), w) in x1.iter().zip(x2).zip(xc) {
            let want = a * u + b * v;
            assert!((w - want).abs() <= 1e-12 * (1.0 + want.abs()), "{w} vs {want}");
        }
    }
}

#[test]
fn beta_zero_ignores_topology_weights() {
    let (g, x, _) = random_graph(25, 6, 3);
    let paths = sample_all(&g, &x, &SamplerConfig::new(3, 5, Strategy::Similarity, 0).unwrap()).unwrap();
    let (model, mut store) = build(config(6, 3, 5, 0.0), &g, &x, &paths, 9);
    let before = eval_probs(&model, &store);
    let w4 = store.find("w4").unwrap();
    store.get_mut(w4).value.mapv_inplace(|v| v * 1e3 + 17.0);
    let b4 = store.find("b4").unwrap();
    store.get_mut(b4).value.fill(-4.0);
    let after = eval_probs(&model, &store);
    assert!(before.iter().zip(after.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn permuting_paths_with_their_logits_leaves_output_unchanged() {
    let (g, x, _) = random_graph(20, 4, 8);
    let (d, n) = (3, 5);
    let paths = sample_all(&g, &x, &SamplerConfig::new(d, n, Strategy::Dfs, 4).unwrap()).unwrap();
    let (model, mut store) = build(config(4, d, n, 0.4), &g, &x, &paths, 21);
    randomize_eps(&mut store, 2);
    let want = eval_probs(&model, &store);

    // Reverse every node's path list and its logit row.
    let per_node: Vec<Vec<Vec<usize>>> = (0..20)
        .map(|v| { let mut ps: Vec<Vec<usize>> = paths.paths_of(v).map(<[usize]>::to_vec).collect(); ps.reverse(); ps })
        .collect();
    let permuted = PathTable::from_paths(d, n, per_node).unwrap();
    let (model2, mut store2) = build(config(4, d, n, 0.4), &g, &x, &permuted, 21);
    let eps = store.get(store.find("eps_logits").unwrap()).value.clone();
    let id = store2.find("eps_logits").unwrap();
    for v in 0..20 {
        for k in 0..n {
            store2.get_mut(id).value[[v, k]] = eps[[v, n - 1 - k]];
        }
    }
    let got = eval_probs(&model2, &store2);
    assert!(want.iter().zip(got.iter()).all(|(a, b)| (a - b).abs() <= 1e-12));
}

#[test]
fn plus_on_edgeless_graph_equals_base_on_duplicated_features() {
    use pathmlp::graph::renormalized_affinity;
    use pathmlp::model::augment_features;

    let (_, x, _) = random_graph(12, 3, 5);
    let g = Graph::empty(12).unwrap();
    let paths = sample_all(&g, &x, &SamplerConfig::new(2, 3, Strategy::Similarity, 0).unwrap()).unwrap();
    let aug = augment_features(&x, &renormalized_affinity(&g), 1).unwrap();
    let dup = x.concat(&x).unwrap();

    let plus_cfg = ModelConfig { variant: Variant::Plus, ..config(6, 2, 3, 0.5) };
    let (plus, plus_store) = build(plus_cfg, &g, &aug, &paths, 4);
    let (base, base_store) = build(config(6, 2, 3, 0.5), &g, &dup, &paths, 4);
    let (a, b) = (eval_probs(&plus, &plus_store), eval_probs(&base, &base_store));
    assert!(a.iter().zip(b.iter()).all(|(u, v)| (u - v).abs() <= 1e-12));
}

#[test]
fn path_weights_are_normalized_after_forward() {
    let (g, x, _) = random_graph(15, 4, 6);
    let paths = sample_all(&g, &x, &SamplerConfig::new(2, 6, Strategy::Similarity, 0).unwrap()).unwrap();
    let (model, mut store) = build(config(4, 2, 6, 0.0), &g, &x, &paths, 0);
    randomize_eps(&mut store, 3);
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cache = model.forward_cached(&mut tape, &store, Mode::Train, &mut rng).unwrap();
    for row in tape.value(cache.path_weights).rows() {
        assert!((row.sum() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn shape_chain_holds_across_default_grid() {
    let (g, x, _) = random_graph(10, 4, 1);
    let grid = Grid::default();
    for &f_prime in &grid.f_prime {
        for &n_paths in &grid.n_paths {
            for &d in &grid.d {
                let paths = sample_all(&g, &x, &SamplerConfig::new(d, n_paths, Strategy::Similarity, 0).unwrap()).unwrap();
                let cfg = ModelConfig { f_prime, f_h: 64, ..config(4, d, n_paths, 0.3) };
                let (model, store) = build(cfg, &g, &x, &paths, 0);
                let mut tape = Tape::new();
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let c = model.forward_cached(&mut tape, &store, Mode::Eval, &mut rng).unwrap();
                assert_eq!(tape.shape(c.node_encodings), (10, f_prime));
                assert_eq!(tape.shape(c.path_concat), (10 * n_paths, (d + 1) * f_prime));
                assert_eq!(tape.shape(c.path_encodings), (10 * n_paths, 64));
                assert_eq!(tape.shape(c.path_message), (10, 64));
                assert_eq!(tape.shape(c.hidden), (10, 64));
                assert_eq!(tape.shape(c.probs), (10, 3));
            }
        }
    }
}

#[test]
fn overflowing_forward_is_an_error() {
    let (g, x, _) = random_graph(8, 3, 2);
    let paths = sample_all(&g, &x, &SamplerConfig::new(1, 2, Strategy::Bfs, 0).unwrap()).unwrap();
    let (model, mut store) = build(config(3, 1, 2, 0.0), &g, &x, &paths, 0);
    let w1 = store.find("w1").unwrap();
    store.get_mut(w1).value.fill(f64::MAX);
    let b1 = store.find("b1").unwrap();
    store.get_mut(b1).value.fill(f64::MAX);
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err = model.forward(&mut tape, &store, Mode::Eval, &mut rng).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
}
