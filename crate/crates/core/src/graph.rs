//! Attributed graph storage and homophily analytics.
//!
//! [`Graph`] is an immutable, undirected, simple graph kept in compressed
//! sparse row form. Every undirected edge `{u, v}` is stored twice (once in
//! each endpoint's row), rows are sorted ascending and self-loops are never
//! stored. Node features and labels live beside the graph in
//! [`NodeFeatures`] and [`Labels`], aligned by node id.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Sentinel distance for nodes not reached by a breadth-first search.
pub const UNREACHABLE: usize = usize::MAX;

/// Undirected simple graph in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    row_offsets: Vec<usize>,
    col_targets: Vec<usize>,
}

impl Graph {
    /// Builds the canonical symmetric graph from an edge list.
    ///
    /// Each undirected edge may appear once, twice or many times and in
    /// either orientation. Self-loops are dropped.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut degree = vec![0usize; node_count];
        for &(u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::EndpointOutOfRange { u, v, node_count });
            }
            if u != v {
                degree[u] += 1;
                degree[v] += 1;
            }
        }
        let mut row_offsets = Vec::with_capacity(node_count + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let mut cursor = row_offsets[..node_count].to_vec();
        let mut raw = vec![0usize; *row_offsets.last().unwrap()];
        for &(u, v) in edges {
            if u != v {
                raw[cursor[u]] = v;
                cursor[u] += 1;
                raw[cursor[v]] = u;
                cursor[v] += 1;
            }
        }

        // Sort and deduplicate each row, then compact.
        let mut col_targets = Vec::with_capacity(raw.len());
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for u in 0..node_count {
            let row = &mut raw[row_offsets[u]..row_offsets[u + 1]];
            row.sort_unstable();
            let mut last = None;
            for &v in row.iter() {
                if last != Some(v) {
                    col_targets.push(v);
                    last = Some(v);
                }
            }
            offsets.push(col_targets.len());
        }
        Ok(Graph {
            row_offsets: offsets,
            col_targets,
        })
    }

    /// Graph with `node_count` nodes and no edges.
    pub fn empty(node_count: usize) -> Result<Self> {
        Self::from_edges(node_count, &[])
    }

    pub fn node_count(&self) -> usize {
        self.row_offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.col_targets.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_targets(&self) -> &[usize] {
        &self.col_targets
    }

    /// Sorted neighbor ids of `u`.
    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_targets[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Shortest-path hop counts from `source`, stopping after `max_depth`
    /// layers. Unvisited nodes hold [`UNREACHABLE`].
    pub fn bfs_distances(&self, source: usize, max_depth: usize) -> Vec<usize> {
        let mut dist = vec![UNREACHABLE; self.node_count()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            if du >= max_depth {
                continue;
            }
            for &v in self.neighbors(u) {
                if dist[v] == UNREACHABLE {
                    dist[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Nodes at exact hop distance `h` from `source`.
    pub fn layer(&self, source: usize, h: usize) -> Vec<usize> {
        let dist = self.bfs_distances(source, h);
        dist.iter()
            .enumerate()
            .filter(|&(_, &d)| d == h)
            .map(|(v, _)| v)
            .collect()
    }
}

/// Dense node feature matrix, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures(Array2<f64>);

impl NodeFeatures {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("node features"));
        }
        Ok(NodeFeatures(values))
    }

    pub fn from_rows(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let arr = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::shape("node features", e.to_string()))?;
        Self::new(arr)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.0.row(v)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.0
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn concat(&self, other: &NodeFeatures) -> Result<NodeFeatures> {
        if self.rows() != other.rows() {
            return Err(Error::shape(
                "feature concat",
                format!("{} rows vs {} rows", self.rows(), other.rows()),
            ));
        }
        let joined = ndarray::concatenate(ndarray::Axis(1), &[self.0.view(), other.0.view()])
            .map_err(|e| Error::shape("feature concat", e.to_string()))?;
        Ok(NodeFeatures(joined))
    }
}

/// Integer class labels in `0..class_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    values: Vec<usize>,
    class_count: usize,
}

impl Labels {
    pub fn new(values: Vec<usize>, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class count must be at least 2, got {class_count}"
            )));
        }
        if let Some(&label) = values.iter().find(|&&y| y >= class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: class_count,
            });
        }
        Ok(Labels {
            values,
            class_count,
        })
    }

    /// Labels with the class count inferred as `max + 1` (at least 2).
    pub fn infer(values: Vec<usize>) -> Result<Self> {
        let c = values.iter().copied().max().map_or(2, |m| (m + 1).max(2));
        Self::new(values, c)
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn get(&self, v: usize) -> usize {
        self.values[v]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// One-hot encoding of node `v`'s label.
    pub fn one_hot(&self, v: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.class_count];
        out[self.values[v]] = 1.0;
        out
    }
}

fn check_labels(g: &Graph, y: &Labels) -> Result<()> {
    if y.len() != g.node_count() {
        return Err(Error::shape(
            "labels",
            format!("{} labels for {} nodes", y.len(), g.node_count()),
        ));
    }
    Ok(())
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph, y: &Labels) -> Result<f64> {
    check_labels(g, y)?;
    let m = g.edge_count();
    if m == 0 {
        return Err(Error::NoEdges);
    }
    let same = g.edges().filter(|&(u, v)| y.get(u) == y.get(v)).count();
    Ok(same as f64 / m as f64)
}

/// Edge homophily corrected for class-degree imbalance.
///
/// Returns [`Error::DegenerateHomophily`] when the normalizer
/// `1 - sum_c D_c^2 / (2|E|)^2` vanishes, which happens exactly when all
/// edge endpoints belong to one class.
pub fn adjusted_homophily(g: &Graph, y: &Labels) -> Result<f64> {
    let h_edge = edge_homophily(g, y)?;
    let two_m = 2.0 * g.edge_count() as f64;
    let mut class_degree = vec![0usize; y.class_count()];
    for v in 0..g.node_count() {
        class_degree[y.get(v)] += g.degree(v);
    }
    let expected: f64 = class_degree
        .iter()
        .map(|&d| (d as f64 / two_m).powi(2))
        .sum();
    let denom = 1.0 - expected;
    if denom.abs() < 1e-12 {
        return Err(Error::DegenerateHomophily(denom));
    }
    Ok((h_edge - expected) / denom)
}

/// Mean, over nodes with at least one node at exact hop distance `h`, of the
/// share of those distance-`h` nodes carrying the same label.
pub fn order_homophily(g: &Graph, y: &Labels, h: usize) -> Result<f64> {
    check_labels(g, y)?;
    if h == 0 {
        return Err(Error::ZeroOrder);
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for v in 0..g.node_count() {
        let dist = g.bfs_distances(v, h);
        let (mut same, mut all) = (0usize, 0usize);
        for (u, &d) in dist.iter().enumerate() {
            if d == h {
                all += 1;
                if y.get(u) == y.get(v) {
                    same += 1;
                }
            }
        }
        if all > 0 {
            total += same as f64 / all as f64;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::NoNeighborsAtOrder(h));
    }
    Ok(total / counted as f64)
}

/// Symmetric re-normalized affinity `D̃^{-1/2} (A + I) D̃^{-1/2}`, stored
/// sparsely with the diagonal included.
#[derive(Debug, Clone)]
pub struct AffinityOperator {
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl AffinityOperator {
    pub fn node_count(&self) -> usize {
        self.row_offsets.len() - 1
    }

    /// Weight of entry `(u, v)`; zero when absent.
    pub fn entry(&self, u: usize, v: usize) -> f64 {
        let row = &self.cols[self.row_offsets[u]..self.row_offsets[u + 1]];
        match row.binary_search(&v) {
            Ok(i) => self.weights[self.row_offsets[u] + i],
            Err(_) => 0.0,
        }
    }

    fn apply_once(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        for u in 0..self.node_count() {
            let mut out_row = out.row_mut(u);
            for idx in self.row_offsets[u]..self.row_offsets[u + 1] {
                out_row.scaled_add(self.weights[idx], &x.row(self.cols[idx]));
            }
        }
        out
    }
}

/// Builds the self-loop-augmented, degree-normalized affinity operator.
pub fn renormalized_affinity(g: &Graph) -> AffinityOperator {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| 1.0 / ((g.degree(u) + 1) as f64).sqrt())
        .collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(g.col_targets().len() + n);
    let mut weights = Vec::with_capacity(g.col_targets().len() + n);
    row_offsets.push(0);
    for u in 0..n {
        let mut self_done = false;
        for &v in g.neighbors(u) {
            if !self_done && v > u {
                cols.push(u);
                weights.push(inv_sqrt[u] * inv_sqrt[u]);
                self_done = true;
            }
            cols.push(v);
            weights.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        if !self_done {
            cols.push(u);
            weights.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        row_offsets.push(cols.len());
    }
    AffinityOperator {
        row_offsets,
        cols,
        weights,
    }
}

/// Computes `Ã_sym^m · X` for `m ∈ {1, 2}`.
pub fn apply_affinity(op: &AffinityOperator, x: &NodeFeatures, m: usize) -> Result<NodeFeatures> {
    if x.rows() != op.node_count() {
        return Err(Error::shape(
            "apply_affinity",
            format!("{} feature rows for {} nodes", x.rows(), op.node_count()),
        ));
    }
    if !(1..=2).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "affinity power must be 1 or 2, got {m}"
        )));
    }
    let mut out = op.apply_once(x.matrix());
    for _ in 1..m {
        out = op.apply_once(&out);
    }
    NodeFeatures::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn triangle() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn single_edge_is_symmetric() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn duplicates_and_orientations_collapse() {
        let a = Graph::from_edges(2, &[(0, 1), (1, 0), (0, 1)]).unwrap();
        let b = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn triangle_degrees() {
        let g = triangle();
        assert!((0..3).all(|u| g.degree(u) == 2));
        assert_eq!(g.row_offsets(), &[0, 2, 4, 6]);
    }

    #[test]
    fn self_loops_are_not_stored() {
        let g = Graph::from_edges(2, &[(0, 0), (0, 1)]).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(Graph::from_edges(0, &[]), Err(Error::EmptyGraph)));
        assert!(matches!(
            Graph::from_edges(2, &[(0, 2)]),
            Err(Error::EndpointOutOfRange { .. })
        ));
    }

    #[test]
    fn edge_homophily_triangle() {
        let y = Labels::new(vec![0, 0, 1], 2).unwrap();
        let h = edge_homophily(&triangle(), &y).unwrap();
        assert!((h - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn edge_homophily_uniform_labels() {
        let y = Labels::new(vec![1, 1, 1], 2).unwrap();
        assert_eq!(edge_homophily(&triangle(), &y).unwrap(), 1.0);
    }

    #[test]
    fn edge_homophily_needs_edges() {
        let g = Graph::empty(3).unwrap();
        let y = Labels::new(vec![0, 1, 0], 2).unwrap();
        assert!(matches!(edge_homophily(&g, &y), Err(Error::NoEdges)));
    }

    #[test]
    fn adjusted_homophily_hand_cases() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let y = Labels::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(adjusted_homophily(&g, &y).unwrap(), 1.0);

        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let y = Labels::new(vec![0, 1], 2).unwrap();
        assert_eq!(adjusted_homophily(&g, &y).unwrap(), -1.0);
    }

    #[test]
    fn adjusted_homophily_single_class_is_an_error() {
        let y = Labels::new(vec![0, 0, 0], 2).unwrap();
        assert!(matches!(
            adjusted_homophily(&triangle(), &y),
            Err(Error::DegenerateHomophily(_))
        ));
    }

    #[test]
    fn order_homophily_hand_cases() {
        let y = Labels::new(vec![0, 0, 1], 2).unwrap();
        let h1 = order_homophily(&triangle(), &y, 1).unwrap();
        assert!((h1 - 1.0 / 3.0).abs() < 1e-15);

        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let y = Labels::new(vec![0, 1, 0], 2).unwrap();
        assert_eq!(order_homophily(&path, &y, 2).unwrap(), 1.0);

        let y = Labels::new(vec![1, 1, 1], 2).unwrap();
        assert_eq!(order_homophily(&path, &y, 1).unwrap(), 1.0);
    }

    #[test]
    fn order_homophily_errors() {
        let y = Labels::new(vec![0, 1, 0], 2).unwrap();
        assert!(matches!(
            order_homophily(&triangle(), &y, 0),
            Err(Error::ZeroOrder)
        ));
        assert!(matches!(
            order_homophily(&triangle(), &y, 2),
            Err(Error::NoNeighborsAtOrder(2))
        ));
    }

    #[test]
    fn affinity_entries() {
        let iso = renormalized_affinity(&Graph::empty(1).unwrap());
        assert_eq!(iso.entry(0, 0), 1.0);

        let pair = renormalized_affinity(&Graph::from_edges(2, &[(0, 1)]).unwrap());
        for (u, v) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((pair.entry(u, v) - 0.5).abs() < 1e-15);
        }

        let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let op = renormalized_affinity(&star);
        assert!((op.entry(0, 0) - 0.25).abs() < 1e-15);
        assert_eq!(op.entry(1, 2), 0.0);
    }

    #[test]
    fn apply_affinity_cases() {
        let pair = renormalized_affinity(&Graph::from_edges(2, &[(0, 1)]).unwrap());
        let x = NodeFeatures::new(array![[2.0], [0.0]]).unwrap();
        let y = apply_affinity(&pair, &x, 1).unwrap();
        assert!((y.matrix() - &array![[1.0], [1.0]]).iter().all(|d| d.abs() < 1e-15));

        let iso = renormalized_affinity(&Graph::empty(3).unwrap());
        let x = NodeFeatures::new(array![[1.0, -2.0], [3.0, 4.0], [0.5, 0.0]]).unwrap();
        assert_eq!(apply_affinity(&iso, &x, 2).unwrap(), x);

        assert!(apply_affinity(&iso, &x, 3).is_err());
        let wrong = NodeFeatures::new(array![[1.0]]).unwrap();
        assert!(matches!(
            apply_affinity(&iso, &wrong, 1),
            Err(Error::Shape { .. })
        ));
    }
}
