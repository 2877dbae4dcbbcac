//! Path sampling rooted at target nodes.
//!
//! The similarity sampler expands paths hop by hop, branching over the most
//! feature-similar neighbors of the current path tail: two choices at the
//! first hop, `j + 1` choices at hop `j` for `2 <= j <= 4`, and only the
//! single most similar neighbor from hop 5 on. With enough degree this yields
//! 2, 6, 24, 120, 120, ... candidate paths for path-length parameter
//! `d = 1, 2, 3, 4, 5, ...`. A fixed number `N` of candidates is then drawn at
//! random for each node.
//!
//! BFS- and DFS-biased random walks are provided for comparison.
//!
//! Conventions shared by every strategy:
//! - a path holds `d + 1` nodes and starts at its target;
//! - paths may revisit nodes (including the target);
//! - when the tail has no neighbors the last node is repeated until the path
//!   has `d + 1` nodes. In an undirected graph this only happens for
//!   isolated targets.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;
use std::str::FromStr;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeFeatures, UNREACHABLE};

/// Node sequence of length `d + 1`; `nodes[0]` is the target.
pub type Path = Vec<usize>;

/// All similarity-guided candidate paths of one target node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub target: usize,
    pub paths: Vec<Path>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Similarity,
    Bfs,
    Dfs,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Similarity => "similarity",
            Strategy::Bfs => "bfs",
            Strategy::Dfs => "dfs",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similarity" => Ok(Strategy::Similarity),
            "bfs" => Ok(Strategy::Bfs),
            "dfs" => Ok(Strategy::Dfs),
            other => Err(Error::InvalidArgument(format!(
                "unknown sampling strategy '{other}' (expected similarity, bfs or dfs)"
            ))),
        }
    }
}

/// Sampling parameters. Equal similarities are always broken toward the
/// lower node id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Path-length parameter; paths hold `d + 1` nodes.
    pub d: usize,
    /// Paths kept per node.
    pub n_paths: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(d: usize, n_paths: usize, strategy: Strategy, seed: u64) -> Result<Self> {
        let cfg = SamplerConfig {
            d,
            n_paths,
            strategy,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("path length d must be >= 1".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("paths per node N must be >= 1".into()));
        }
        Ok(())
    }
}

/// Inner product of two feature vectors.
pub fn node_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(
            "node_similarity",
            format!("{} vs {}", a.len(), b.len()),
        ));
    }
    Ok(dot(a, b))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn feature_row<'a>(x: &'a NodeFeatures, v: usize) -> std::borrow::Cow<'a, [f64]> {
    let row = x.row(v);
    match row.to_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(row.to_vec()),
    }
}

/// Neighbors of `anchor` ranked by descending similarity to it, ties toward
/// the lower id.
fn ranked_neighbors(g: &Graph, x: &NodeFeatures, anchor: usize) -> Vec<usize> {
    let a = feature_row(x, anchor);
    let mut scored: Vec<(f64, usize)> = g
        .neighbors(anchor)
        .iter()
        .map(|&v| (dot(&a, &feature_row(x, v)), v))
        .collect();
    scored.sort_by(|l, r| r.0.total_cmp(&l.0).then(l.1.cmp(&r.1)));
    scored.into_iter().map(|(_, v)| v).collect()
}

/// The `k` neighbors of `anchor` most similar to it (all of them when the
/// degree is below `k`), most similar first.
pub fn top_k_similar_neighbors(
    g: &Graph,
    x: &NodeFeatures,
    anchor: usize,
    k: usize,
) -> Vec<usize> {
    let mut ranked = ranked_neighbors(g, x, anchor);
    ranked.truncate(k);
    ranked
}

/// Every node's neighbor list pre-sorted by similarity, so that any top-k
/// query is a prefix slice.
#[derive(Debug, Clone)]
pub struct RankedNeighbors {
    offsets: Vec<usize>,
    order: Vec<usize>,
}

impl RankedNeighbors {
    pub fn new(g: &Graph, x: &NodeFeatures) -> Result<Self> {
        if x.rows() != g.node_count() {
            return Err(Error::shape(
                "ranked neighbors",
                format!("{} feature rows for {} nodes", x.rows(), g.node_count()),
            ));
        }
        let rows: Vec<Vec<usize>> = (0..g.node_count())
            .into_par_iter()
            .map(|u| ranked_neighbors(g, x, u))
            .collect();
        let mut order = Vec::with_capacity(g.col_targets().len());
        for r in rows {
            order.extend(r);
        }
        Ok(RankedNeighbors {
            offsets: g.row_offsets().to_vec(),
            order,
        })
    }

    #[inline]
    pub fn top(&self, anchor: usize, k: usize) -> &[usize] {
        let start = self.offsets[anchor];
        let end = self.offsets[anchor + 1].min(start + k);
        &self.order[start..end]
    }
}

/// Number of most-similar neighbors considered at hop `j` (1-based).
pub fn branch_width(j: usize) -> usize {
    match j {
        1 => 2,
        2..=4 => j + 1,
        _ => 1,
    }
}

/// All candidate paths for `target` under the similarity schedule.
pub fn enumerate_candidates(
    g: &Graph,
    x: &NodeFeatures,
    target: usize,
    d: usize,
) -> Result<CandidateSet> {
    let ranked = RankedNeighbors::new(g, x)?;
    Ok(enumerate_with(&ranked, target, d))
}

/// Same as [`enumerate_candidates`] but reusing a precomputed ranking.
pub fn enumerate_with(ranked: &RankedNeighbors, target: usize, d: usize) -> CandidateSet {
    let mut paths = vec![vec![target]];
    for j in 1..=d {
        let width = branch_width(j);
        let mut next = Vec::with_capacity(paths.len() * width);
        for p in paths {
            let tail = *p.last().unwrap();
            let options = ranked.top(tail, width);
            if options.is_empty() {
                let mut q = p;
                q.push(tail);
                next.push(q);
                continue;
            }
            for &v in options {
                let mut q = Vec::with_capacity(d + 1);
                q.extend_from_slice(&p);
                q.push(v);
                next.push(q);
            }
        }
        paths = next;
    }
    CandidateSet { target, paths }
}

/// Draws exactly `n` paths from `c`.
///
/// Without replacement when `|c| >= n`. Otherwise every candidate is kept
/// once and the remainder is filled uniformly with replacement; the result
/// is shuffled either way.
pub fn sample_paths<R: Rng + ?Sized>(c: &CandidateSet, n: usize, rng: &mut R) -> Result<Vec<Path>> {
    if c.is_empty() {
        return Err(Error::EmptyCandidates(c.target));
    }
    let mut out: Vec<Path>;
    if c.len() >= n {
        out = index::sample(rng, c.len(), n)
            .into_iter()
            .map(|i| c.paths[i].clone())
            .collect();
    } else {
        out = c.paths.clone();
        while out.len() < n {
            out.push(c.paths.choose(rng).unwrap().clone());
        }
        out.shuffle(rng);
    }
    Ok(out)
}

/// Random stream owned by one target node: identical whether nodes are
/// processed serially or in parallel.
pub fn node_rng(seed: u64, node: usize) -> ChaCha8Rng {
    crate::rng::stream_rng(seed, node as u64)
}

fn biased_walk<R: Rng + ?Sized>(
    g: &Graph,
    target: usize,
    d: usize,
    rng: &mut R,
    dist: Option<&[usize]>,
) -> Path {
    let mut walk = Vec::with_capacity(d + 1);
    walk.push(target);
    let mut preferred = Vec::new();
    for _ in 0..d {
        let tail = *walk.last().unwrap();
        let nbrs = g.neighbors(tail);
        if nbrs.is_empty() {
            walk.push(tail);
            continue;
        }
        preferred.clear();
        preferred.extend(nbrs.iter().copied().filter(|v| !walk.contains(v)));
        if let Some(dist) = dist {
            // BFS bias: keep only the unvisited candidates closest to the target.
            if let Some(best) = preferred.iter().map(|&v| dist[v]).min() {
                preferred.retain(|&v| dist[v] == best);
            }
        }
        let next = if preferred.is_empty() {
            *nbrs.choose(rng).unwrap()
        } else {
            *preferred.choose(rng).unwrap()
        };
        walk.push(next);
    }
    walk
}

/// `n` breadth-first-biased walks of `d` hops from `target`.
///
/// Each hop picks uniformly among the unvisited neighbors that sit at the
/// smallest hop distance from the target; if every neighbor was visited it
/// falls back to a uniform neighbor.
pub fn bfs_paths<R: Rng + ?Sized>(g: &Graph, target: usize, d: usize, n: usize, rng: &mut R) -> Vec<Path> {
    let dist = g.bfs_distances(target, d);
    (0..n)
        .map(|_| biased_walk(g, target, d, rng, Some(&dist)))
        .collect()
}

/// `n` depth-first-biased walks of `d` hops from `target`: each hop prefers
/// neighbors not yet on the walk, falling back to a uniform neighbor.
pub fn dfs_paths<R: Rng + ?Sized>(g: &Graph, target: usize, d: usize, n: usize, rng: &mut R) -> Vec<Path> {
    (0..n)
        .map(|_| biased_walk(g, target, d, rng, None))
        .collect()
}

/// Mean over paths of the mean hop distance between the target and each
/// later position on the path.
pub fn average_path_order<'a, I>(paths: I, g: &Graph) -> Result<f64>
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let mut cache: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut total = 0.0;
    let mut count = 0usize;
    for p in paths {
        if p.len() < 2 {
            return Err(Error::InvalidArgument("path must hold at least two nodes".into()));
        }
        let target = p[0];
        let dist = cache
            .entry(target)
            .or_insert_with(|| g.bfs_distances(target, usize::MAX));
        let mut sum = 0.0;
        for &v in &p[1..] {
            if dist[v] == UNREACHABLE {
                return Err(Error::InvalidArgument(format!(
                    "node {v} is not reachable from target {target}"
                )));
            }
            sum += dist[v] as f64;
        }
        total += sum / (p.len() - 1) as f64;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("no paths given".into()));
    }
    Ok(total / count as f64)
}

/// Mean inner product over all consecutive position pairs of the paths.
/// Higher means smoother paths.
pub fn path_smoothness<'a, I>(paths: I, x: &NodeFeatures) -> f64
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for p in paths {
        for w in p.windows(2) {
            total += x.row(w[0]).dot(&x.row(w[1]));
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Fixed-shape table of `N` paths per node, stored flat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathTable {
    d: usize,
    n_paths: usize,
    node_count: usize,
    nodes: Vec<usize>,
}

impl PathTable {
    pub fn from_paths(d: usize, n_paths: usize, per_node: Vec<Vec<Path>>) -> Result<Self> {
        let node_count = per_node.len();
        let mut nodes = Vec::with_capacity(node_count * n_paths * (d + 1));
        for (i, paths) in per_node.into_iter().enumerate() {
            if paths.len() != n_paths {
                return Err(Error::shape(
                    "path table",
                    format!("node {i} has {} paths, expected {n_paths}", paths.len()),
                ));
            }
            for p in paths {
                if p.len() != d + 1 || p[0] != i {
                    return Err(Error::shape(
                        "path table",
                        format!("bad path {p:?} for node {i} (d = {d})"),
                    ));
                }
                nodes.extend(p);
            }
        }
        Ok(PathTable {
            d,
            n_paths,
            node_count,
            nodes,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn path(&self, node: usize, k: usize) -> &[usize] {
        let len = self.d + 1;
        let start = (node * self.n_paths + k) * len;
        &self.nodes[start..start + len]
    }

    pub fn paths_of(&self, node: usize) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.n_paths).map(move |k| self.path(node, k))
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.nodes.chunks(self.d + 1)
    }

    /// Node ids at position `j` of every path, ordered node-major then by
    /// path index.
    pub fn position(&self, j: usize) -> Vec<usize> {
        self.iter().map(|p| p[j]).collect()
    }

    pub fn write_to(&self, w: &mut impl Write, cfg: &SamplerConfig) -> std::io::Result<()> {
        writeln!(
            w,
            "# pathmlp-paths d={} n={} strategy={} seed={}",
            cfg.d, cfg.n_paths, cfg.strategy, cfg.seed
        )?;
        for p in self.iter() {
            write!(w, "{}", p[0])?;
            for v in p {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &FsPath, cfg: &SamplerConfig) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w, cfg)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a path cache, returning the table and the config from its
    /// header line.
    pub fn load(path: &FsPath, node_count: usize) -> Result<(Self, SamplerConfig)> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let cfg = parse_path_header(&header).map_err(|m| Error::parse(path, 1, m))?;
        let mut per_node: Vec<Vec<Path>> = vec![Vec::new(); node_count];
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            if nums.len() != cfg.d + 2 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {} fields, found {}", cfg.d + 2, nums.len()),
                ));
            }
            let target = nums[0];
            if target >= node_count || nums[1..].iter().any(|&v| v >= node_count) {
                return Err(Error::parse(path, lineno, "node id out of range"));
            }
            per_node[target].push(nums[1..].to_vec());
        }
        let table = PathTable::from_paths(cfg.d, cfg.n_paths, per_node)
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok((table, cfg))
    }
}

fn parse_path_header(line: &str) -> std::result::Result<SamplerConfig, String> {
    let body = line
        .strip_prefix("# pathmlp-paths")
        .ok_or_else(|| "not a pathmlp path cache".to_string())?;
    let mut d = None;
    let mut n = None;
    let mut strategy = None;
    let mut seed = None;
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("bad field '{kv}'"))?;
        match k {
            "d" => d = v.parse().ok(),
            "n" => n = v.parse().ok(),
            "strategy" => strategy = v.parse().ok(),
            "seed" => seed = v.parse().ok(),
            _ => return Err(format!("unknown header key '{k}'")),
        }
    }
    match (d, n, strategy, seed) {
        (Some(d), Some(n_paths), Some(strategy), Some(seed)) => Ok(SamplerConfig {
            d,
            n_paths,
            strategy,
            seed,
        }),
        _ => Err("header must carry d, n, strategy and seed".into()),
    }
}

fn sample_node(
    g: &Graph,
    ranked: Option<&RankedNeighbors>,
    cfg: &SamplerConfig,
    node: usize,
) -> Result<Vec<Path>> {
    let mut rng = node_rng(cfg.seed, node);
    match cfg.strategy {
        Strategy::Similarity => {
            let ranked = ranked.expect("ranking is built for the similarity strategy");
            let c = enumerate_with(ranked, node, cfg.d);
            sample_paths(&c, cfg.n_paths, &mut rng)
        }
        Strategy::Bfs => Ok(bfs_paths(g, node, cfg.d, cfg.n_paths, &mut rng)),
        Strategy::Dfs => Ok(dfs_paths(g, node, cfg.d, cfg.n_paths, &mut rng)),
    }
}

/// Samples `N` paths for every node, one node after another.
pub fn sample_all(g: &Graph, x: &NodeFeatures, cfg: &SamplerConfig) -> Result<PathTable> {
    cfg.validate()?;
    let ranked = match cfg.strategy {
        Strategy::Similarity => Some(RankedNeighbors::new(g, x)?),
        _ => None,
    };
    let per_node = (0..g.node_count())
        .map(|v| sample_node(g, ranked.as_ref(), cfg, v))
        .collect::<Result<Vec<_>>>()?;
    PathTable::from_paths(cfg.d, cfg.n_paths, per_node)
}

/// Parallel [`sample_all`]; produces the identical table.
pub fn par_sample_all(g: &Graph, x: &NodeFeatures, cfg: &SamplerConfig) -> Result<PathTable> {
    cfg.validate()?;
    let ranked = match cfg.strategy {
        Strategy::Similarity => Some(RankedNeighbors::new(g, x)?),
        _ => None,
    };
    let per_node = (0..g.node_count())
        .into_par_iter()
        .map(|v| sample_node(g, ranked.as_ref(), cfg, v))
        .collect::<Result<Vec<_>>>()?;
    PathTable::from_paths(cfg.d, cfg.n_paths, per_node)
}
