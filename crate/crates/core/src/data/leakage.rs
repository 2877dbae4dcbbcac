//! Duplicate adjacency rows as a train/test shortcut.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::graph::{Graph, Labels, NodeFeatures};
use crate::model::Mlp;
use crate::rng::{stream_rng, DROPOUT_STREAM, GENERATOR_STREAM, INIT_STREAM};
use crate::train::{train, Split, TrainConfig};

/// Shares of nodes whose vector exactly equals some other node's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuplicationRates {
    /// Over adjacency rows.
    pub adjacency: f64,
    /// Over adjacency rows concatenated with one-hot labels.
    pub adjacency_label: f64,
}

pub fn detect_leakage(g: &Graph, labels: &Labels) -> Result<DuplicationRates> {
    let n = g.node_count();
    if labels.len() != n {
        return Err(Error::shape("detect_leakage", format!("{} labels for {n} nodes", labels.len())));
    }
    // CSR rows are sorted, so slices compare as canonical neighbor lists.
    let mut rows: HashMap<&[usize], usize> = HashMap::new();
    let mut rows_labels: HashMap<(&[usize], usize), usize> = HashMap::new();
    for v in 0..n {
        *rows.entry(g.neighbors(v)).or_default() += 1;
        *rows_labels.entry((g.neighbors(v), labels.get(v))).or_default() += 1;
    }
    let dup_a = (0..n).filter(|&v| rows[g.neighbors(v)] > 1).count();
    let dup_ay = (0..n)
        .filter(|&v| rows_labels[&(g.neighbors(v), labels.get(v))] > 1)
        .count();
    Ok(DuplicationRates {
        adjacency: dup_a as f64 / n as f64,
        adjacency_label: dup_ay as f64 / n as f64,
    })
}

/// How the adjacency-aware probe is built, stated in every report.
pub const MLP_A_DESCRIPTION: &str = "MLP+A = two-layer MLP whose first hidden layer also receives \
a learned linear embedding of the node's adjacency row (one plausible reading of the probe)";

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub rates: DuplicationRates,
    pub mlp: f64,
    pub mlp_a: f64,
    /// `(mlp_a - mlp) / mlp`.
    pub gain: f64,
}

impl LeakageReport {
    pub fn render(&self) -> String {
        format!(
            "# {MLP_A_DESCRIPTION}\nduplication_a={:.6}\nduplication_a_y={:.6}\nmlp={:.6}\nmlp_a={:.6}\ngain={:.6}\n",
            self.rates.adjacency, self.rates.adjacency_label, self.mlp, self.mlp_a, self.gain
        )
    }
}

/// Probe settings; the trainer defaults apply unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden: 64,
            dropout: 0.5,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// Trains a features-only MLP and the adjacency-aware MLP+A on the same
/// split and compares their test scores.
pub fn verify_leakage(data: &Dataset, split: &Split, cfg: &ProbeConfig) -> Result<LeakageReport> {
    let rates = detect_leakage(&data.graph, &data.labels)?;
    let fit = |graph: Option<&Graph>| -> Result<f64> {
        let mut store = ParamStore::new();
        let mut init = stream_rng(cfg.seed, INIT_STREAM);
        let model = Mlp::new(
            &data.features,
            graph,
            cfg.hidden,
            data.labels.class_count(),
            cfg.dropout,
            &mut store,
            &mut init,
        )?;
        let mut drop_rng = stream_rng(cfg.seed, DROPOUT_STREAM);
        Ok(train(&model, &mut store, &data.labels, split, &cfg.train, &mut drop_rng)?.test_score)
    };
    let mlp = fit(None)?;
    let mlp_a = fit(Some(&data.graph))?;
    let gain = if mlp > 0.0 { (mlp_a - mlp) / mlp } else { f64::NAN };
    Ok(LeakageReport { rates, mlp, mlp_a, gain })
}

/// Settings of the leaked-fixture generator.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakedConfig {
    pub nodes: usize,
    pub feature_dim: usize,
    pub classes: usize,
    /// Share of nodes placed in duplicate groups.
    pub duplicate_fraction: f64,
    pub group_size: usize,
    /// Neighbors shared by every member of a group.
    pub group_degree: usize,
    pub seed: u64,
}

impl Default for LeakedConfig {
    fn default() -> Self {
        LeakedConfig {
            nodes: 400,
            feature_dim: 16,
            classes: 4,
            duplicate_fraction: 0.25,
            group_size: 5,
            group_degree: 6,
            seed: 0,
        }
    }
}

/// A graph where a fixed share of nodes come in groups with identical
/// neighbor sets and labels, every other adjacency row is unique, labels
/// are random and features are pure noise. Only the duplicated rows carry
/// label information.
pub fn generate_leaked(cfg: &LeakedConfig) -> Result<Dataset> {
    let n = cfg.nodes;
    let grouped = ((n as f64 * cfg.duplicate_fraction) / cfg.group_size as f64).round() as usize * cfg.group_size;
    if cfg.group_size < 2 || cfg.classes < 2 || cfg.feature_dim == 0 || grouped >= n / 2 {
        return Err(Error::InvalidArgument(
            "leaked fixture needs group_size >= 2, classes >= 2 and fewer than half the nodes grouped".into(),
        ));
    }
    let mut rng = stream_rng(cfg.seed, GENERATOR_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (members, free) = order.split_at(grouped);
    let free: Vec<usize> = free.to_vec();
    let labels: Vec<usize> = {
        let mut y: Vec<usize> = (0..n).map(|_| rng.random_range(0..cfg.classes)).collect();
        for group in members.chunks(cfg.group_size) {
            let c = y[group[0]];
            for &v in group {
                y[v] = c;
            }
        }
        y
    };

    let mut edges = Vec::new();
    // A ring plus random chords keeps every free node connected.
    for (i, &u) in free.iter().enumerate() {
        edges.push((u, free[(i + 1) % free.len()]));
        edges.push((u, *free.choose(&mut rng).unwrap()));
    }
    for group in members.chunks(cfg.group_size) {
        let shared: Vec<usize> = free.choose_multiple(&mut rng, cfg.group_degree).copied().collect();
        for &v in group {
            for &s in &shared {
                edges.push((v, s));
            }
        }
    }
    let mut graph = Graph::from_edges(n, &edges)?;
    // Break accidental collisions among free nodes.
    loop {
        let mut seen: HashMap<&[usize], usize> = HashMap::new();
        let mut collision = None;
        for &v in &free {
            if let Some(&other) = seen.get(graph.neighbors(v)) {
                collision = Some((other, v));
                break;
            }
            seen.insert(graph.neighbors(v), v);
        }
        let Some((_, v)) = collision else { break };
        let w = *free.choose(&mut rng).unwrap();
        edges.push((v, w));
        graph = Graph::from_edges(n, &edges)?;
    }

    let x = ndarray::Array2::from_shape_simple_fn((n, cfg.feature_dim), || rng.sample(StandardNormal));
    Ok(Dataset {
        name: "synthetic-leaked".into(),
        graph,
        features: NodeFeatures::new(x)?,
        labels: Labels::new(labels, cfg.classes)?,
        split: None,
    })
}
