//! Homophily measures against dense brute-force oracles.

use pathmlp::graph::{adjusted_homophily, apply_affinity, edge_homophily, renormalized_affinity, Graph, Labels, NodeFeatures};
use proptest::prelude::*;

/// Dense adjacency built straight from the edge list.
fn dense(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in edges {
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

fn oracle_edge(a: &[Vec<bool>], y: &[usize]) -> Option<f64> {
    let (mut same, mut all) = (0usize, 0usize);
    for u in 0..a.len() {
        for v in u + 1..a.len() {
            if a[u][v] {
                all += 1;
                same += usize::from(y[u] == y[v]);
            }
        }
    }
    (all > 0).then(|| same as f64 / all as f64)
}

fn oracle_adjusted(a: &[Vec<bool>], y: &[usize], classes: usize) -> Option<f64> {
    let h = oracle_edge(a, y)?;
    let m: usize = a.iter().flatten().filter(|&&e| e).count() / 2;
    let mut dc = vec![0.0; classes];
    for (u, row) in a.iter().enumerate() {
        dc[y[u]] += row.iter().filter(|&&e| e).count() as f64;
    }
    let s: f64 = dc.iter().map(|d| (d / (2.0 * m as f64)).powi(2)).sum();
    ((1.0 - s).abs() >= 1e-12).then(|| (h - s) / (1.0 - s))
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<usize>, usize)> {
    (2usize..=20, 2usize..=4).prop_flat_map(|(n, c)| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n), 1..60),
            prop::collection::vec(0..c, n),
            Just(c),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_dense_oracle((n, edges, y, c) in graph_strategy()) {
        let g = Graph::from_edges(n, &edges).unwrap();
        let labels = Labels::new(y.clone(), c).unwrap();
        let a = dense(n, &edges);
        match oracle_edge(&a, &y) {
            None => prop_assert!(edge_homophily(&g, &labels).is_err()),
            Some(want) => {
                let got = edge_homophily(&g, &labels).unwrap();
                prop_assert!((got - want).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&got));
            }
        }
        match oracle_adjusted(&a, &y, c) {
            None => prop_assert!(adjusted_homophily(&g, &labels).is_err()),
            Some(want) => {
                let got = adjusted_homophily(&g, &labels).unwrap();
                prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
                prop_assert!(got <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn invariant_under_class_relabeling((n, edges, y, c) in graph_strategy(), shift in 1usize..4) {
        let g = Graph::from_edges(n, &edges).unwrap();
        let perm: Vec<usize> = (0..c).map(|k| (k + shift) % c).collect();
        let a = Labels::new(y.clone(), c).unwrap();
        let b = Labels::new(y.iter().map(|&k| perm[k]).collect(), c).unwrap();
        if let Ok(h) = edge_homophily(&g, &a) {
            prop_assert_eq!(h, edge_homophily(&g, &b).unwrap());
        }
        if let Ok(h) = adjusted_homophily(&g, &a) {
            prop_assert!((h - adjusted_homophily(&g, &b).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn affinity_entries_follow_degree_formula(n in 2usize..15, edges in prop::collection::vec((0usize..15, 0usize..15), 0..40)) {
        let edges: Vec<_> = edges.into_iter().filter(|&(u, v)| u < n && v < n).collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        let op = renormalized_affinity(&g);
        for (u, v) in g.edges() {
            let want = 1.0 / (((g.degree(u) + 1) * (g.degree(v) + 1)) as f64).sqrt();
            prop_assert!((op.entry(u, v) - want).abs() <= 1e-15);
            prop_assert!((op.entry(v, u) - want).abs() <= 1e-15);
        }
        for u in 0..n {
            prop_assert!((op.entry(u, u) - 1.0 / (g.degree(u) + 1) as f64).abs() <= 1e-15);
        }
    }

    #[test]
    fn second_power_is_two_applications(
        n in 2usize..12,
        edges in prop::collection::vec((0usize..12, 0usize..12), 0..30),
        values in prop::collection::vec(-5.0f64..5.0, 36),
    ) {
        let edges: Vec<_> = edges.into_iter().filter(|&(u, v)| u < n && v < n).collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        let op = renormalized_affinity(&g);
        let x = NodeFeatures::from_rows(n, 3, values[..n * 3].to_vec()).unwrap();
        let twice = apply_affinity(&op, &apply_affinity(&op, &x, 1).unwrap(), 1).unwrap();
        let direct = apply_affinity(&op, &x, 2).unwrap();
        for (a, b) in twice.matrix().iter().zip(direct.matrix().iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
