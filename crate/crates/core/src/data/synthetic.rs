//! Seeded synthetic node-classification graphs.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::{order_homophily, Graph, Labels, NodeFeatures};
use crate::rng::{stream_rng, GENERATOR_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// Edges mostly join nodes of the same class.
    Homophilous,
    /// Classes come in pairs and edges only join partner classes (plus a
    /// little cross-pair noise), so same-class nodes are never adjacent but
    /// crowd each other's two-hop layer.
    Heterophilous,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::Homophilous => "homophilous",
            SyntheticKind::Heterophilous => "heterophilous",
        })
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homophilous" => Ok(SyntheticKind::Homophilous),
            "heterophilous" => Ok(SyntheticKind::Heterophilous),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic kind '{other}' (expected homophilous or heterophilous)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub kind: SyntheticKind,
    pub nodes: usize,
    pub feature_dim: usize,
    pub classes: usize,
    pub seed: u64,
    /// Edges started by each node; the mean degree is about twice this.
    pub edges_per_node: usize,
    /// Probability that an edge ignores the class wiring rule. Noise edges
    /// never join two nodes of the same class in the heterophilous kind.
    pub noise_edge_rate: f64,
    /// Standard deviation of the per-node feature noise around unit-variance
    /// class prototypes.
    pub feature_noise: f64,
    /// Share of prototype variance common to a class and its partner in the
    /// heterophilous kind, so that wired neighbors look alike.
    pub pair_similarity: f64,
}

impl SyntheticConfig {
    pub fn new(kind: SyntheticKind, nodes: usize, feature_dim: usize, classes: usize, seed: u64) -> Self {
        SyntheticConfig {
            kind,
            nodes,
            feature_dim,
            classes,
            seed,
            edges_per_node: 8,
            noise_edge_rate: 0.1,
            feature_noise: 3.0,
            pair_similarity: 0.5,
        }
    }
}

/// A generated dataset together with its measured per-order homophily
/// (`order_homophily[h - 1]` for `h = 1, 2, 3`).
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub order_homophily: Vec<f64>,
}

/// The class whose nodes a heterophilous class is wired to.
fn partner(c: usize, classes: usize) -> usize {
    if c ^ 1 < classes {
        c ^ 1
    } else {
        0
    }
}

pub fn generate_synthetic(kind: SyntheticKind, n: usize, f: usize, classes: usize, seed: u64) -> Result<SyntheticDataset> {
    generate(&SyntheticConfig::new(kind, n, f, classes, seed))
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    let (n, c) = (cfg.nodes, cfg.classes);
    if c < 2 || n < 2 * c {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes and 2 nodes per class, got {n} nodes, {c} classes"
        )));
    }
    if cfg.feature_dim == 0 || cfg.edges_per_node == 0 {
        return Err(Error::InvalidArgument("feature_dim and edges_per_node must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.noise_edge_rate)
        || !(0.0..=1.0).contains(&cfg.pair_similarity)
        || cfg.feature_noise.is_nan()
        || cfg.feature_noise < 0.0
    {
        return Err(Error::InvalidArgument("noise settings out of range".into()));
    }
    let mut rng = stream_rng(cfg.seed, GENERATOR_STREAM);

    let labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (v, &y) in labels.iter().enumerate() {
        by_class[y].push(v);
    }

    let mut edges = Vec::with_capacity(n * cfg.edges_per_node);
    for (u, &y) in labels.iter().enumerate() {
        for _ in 0..cfg.edges_per_node {
            let noise = rng.random_bool(cfg.noise_edge_rate);
            let pool_class = match (cfg.kind, noise) {
                (SyntheticKind::Homophilous, false) => y,
                (SyntheticKind::Heterophilous, false) => partner(y, c),
                (SyntheticKind::Homophilous, true) => other_class(&mut rng, c, &[y]),
                (SyntheticKind::Heterophilous, true) => {
                    if c > 2 {
                        other_class(&mut rng, c, &[y, partner(y, c)])
                    } else {
                        partner(y, c)
                    }
                }
            };
            let v = *by_class[pool_class].choose(&mut rng).expect("classes are non-empty");
            if v != u {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;

    let own: Array2<f64> = Array2::from_shape_simple_fn((c, cfg.feature_dim), || rng.sample(StandardNormal));
    let shared: Array2<f64> = Array2::from_shape_simple_fn((c, cfg.feature_dim), || rng.sample(StandardNormal));
    let rho = match cfg.kind {
        SyntheticKind::Heterophilous => cfg.pair_similarity,
        SyntheticKind::Homophilous => 0.0,
    };
    let mut prototypes = own * (1.0 - rho).sqrt();
    for k in 0..c {
        let pair = k.min(partner(k, c));
        let row = &shared.row(pair) * rho.sqrt();
        let mut target = prototypes.row_mut(k);
        target += &row;
    }
    let mut x = Array2::<f64>::zeros((n, cfg.feature_dim));
    for v in 0..n {
        for k in 0..cfg.feature_dim {
            let eps: f64 = rng.sample(StandardNormal);
            x[[v, k]] = prototypes[[labels[v], k]] + cfg.feature_noise * eps;
        }
    }

    let labels = Labels::new(labels, c)?;
    let order = (1..=3)
        .map(|h| order_homophily(&graph, &labels, h).unwrap_or(f64::NAN))
        .collect();
    Ok(SyntheticDataset {
        dataset: Dataset {
            name: format!("synthetic-{}", cfg.kind),
            graph,
            features: NodeFeatures::new(x)?,
            labels,
            split: None,
        },
        order_homophily: order,
    })
}

/// Uniform class outside `exclude`.
fn other_class(rng: &mut ChaCha8Rng, classes: usize, exclude: &[usize]) -> usize {
    let allowed: Vec<usize> = (0..classes).filter(|k| !exclude.contains(k)).collect();
    *allowed.choose(rng).expect("at least one class remains")
}
