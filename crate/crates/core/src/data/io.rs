//! Plain-text dataset interchange.
//!
//! * edges: one `u v` pair per line, 0-based; `#` starts a comment.
//! * features: a `rows cols` header, then one whitespace-separated row per
//!   node.
//! * labels: one class id per line.
//! * manifest: `key=value` lines naming the three files (relative to the
//!   manifest's directory) and the declared sizes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::kv::{render, KeyValues};
use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, Labels, NodeFeatures};
use crate::train::SplitProfile;

/// Where a dataset's files live and what sizes they must have.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub node_count: usize,
    pub feature_dim: usize,
    pub classes: usize,
    pub split: Option<SplitProfile>,
}

impl DatasetManifest {
    /// Reads a manifest; file paths are resolved against its directory.
    pub fn read(path: &Path) -> Result<Self> {
        let kv = KeyValues::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let split = match kv.get("split") {
            Some(_) => Some(kv.parsed("split")?),
            None => None,
        };
        Ok(DatasetManifest {
            name: kv.require("name")?.to_string(),
            edges: base.join(kv.require("edges")?),
            features: base.join(kv.require("features")?),
            labels: base.join(kv.require("labels")?),
            node_count: kv.parsed("nodes")?,
            feature_dim: kv.parsed("feature_dim")?,
            classes: kv.parsed("classes")?,
            split,
        })
    }

    fn render(&self, edges: &str, features: &str, labels: &str) -> String {
        let mut pairs = vec![
            ("name", self.name.clone()),
            ("edges", edges.to_string()),
            ("features", features.to_string()),
            ("labels", labels.to_string()),
            ("nodes", self.node_count.to_string()),
            ("feature_dim", self.feature_dim.to_string()),
            ("classes", self.classes.to_string()),
        ];
        if let Some(s) = self.split {
            pairs.push(("split", s.to_string()));
        }
        render(&pairs)
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Content lines with their 1-based numbers; comments and blanks dropped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub fn parse_edge_list(text: &str, path: &Path, node_count: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(path, line, format!("expected 'u v', found '{l}'")));
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| Error::parse(path, line, format!("bad node id '{t}': {e}")))
        };
        let (u, v) = (parse(fields[0])?, parse(fields[1])?);
        if u >= node_count || v >= node_count {
            return Err(Error::parse(
                path,
                line,
                format!("edge ({u}, {v}) refers to a node outside 0..{node_count}"),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn parse_features(text: &str, path: &Path) -> Result<NodeFeatures> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing 'rows cols' header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, hline, format!("bad header: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::parse(path, hline, "header must be 'rows cols'"));
    };
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (line, l) in lines {
        if seen == rows {
            return Err(Error::parse(path, line, format!("more than {rows} feature rows")));
        }
        let before = values.len();
        for t in l.split_whitespace() {
            let v: f64 = t
                .parse()
                .map_err(|e| Error::parse(path, line, format!("bad value '{t}': {e}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite value '{t}'")));
            }
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(Error::parse(
                path,
                line,
                format!("expected {cols} values, found {}", values.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::parse(path, 0, format!("header declares {rows} rows, found {seen}")));
    }
    NodeFeatures::from_rows(rows, cols, values)
}

pub fn parse_labels(text: &str, path: &Path, classes: usize) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (line, l) in content_lines(text) {
        let y: usize = l
            .parse()
            .map_err(|e| Error::parse(path, line, format!("bad label '{l}': {e}")))?;
        if y >= classes {
            return Err(Error::parse(
                path,
                line,
                format!("label {y} is outside 0..{classes}"),
            ));
        }
        labels.push(y);
    }
    Ok(labels)
}

/// Loads and cross-checks the files named by `manifest`.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    let n = manifest.node_count;
    let features = parse_features(&read_text(&manifest.features)?, &manifest.features)?;
    if features.rows() != n || features.dim() != manifest.feature_dim {
        return Err(Error::parse(
            &manifest.features,
            1,
            format!(
                "features are {}x{}, manifest declares {n}x{}",
                features.rows(),
                features.dim(),
                manifest.feature_dim
            ),
        ));
    }
    let labels = parse_labels(&read_text(&manifest.labels)?, &manifest.labels, manifest.classes)?;
    if labels.len() != n {
        return Err(Error::parse(
            &manifest.labels,
            0,
            format!("{} labels, manifest declares {n} nodes", labels.len()),
        ));
    }
    let edges = parse_edge_list(&read_text(&manifest.edges)?, &manifest.edges, n)?;
    Ok(Dataset {
        name: manifest.name.clone(),
        graph: Graph::from_edges(n, &edges)?,
        features,
        labels: Labels::new(labels, manifest.classes)?,
        split: manifest.split,
    })
}

pub fn load_manifest(path: &Path) -> Result<Dataset> {
    load_dataset(&DatasetManifest::read(path)?)
}

pub fn edges_text(g: &Graph) -> String {
    let mut s = String::new();
    for (u, v) in g.edges() {
        writeln!(s, "{u} {v}").unwrap();
    }
    s
}

/// Rows of shortest round-trip decimals.
pub fn features_text(x: &NodeFeatures) -> String {
    let mut s = format!("{} {}\n", x.rows(), x.dim());
    for row in x.matrix().rows() {
        let mut first = true;
        for v in row {
            if !first {
                s.push(' ');
            }
            write!(s, "{v}").unwrap();
            first = false;
        }
        s.push('\n');
    }
    s
}

pub fn labels_text(y: &Labels) -> String {
    let mut s = String::new();
    for v in y.values() {
        writeln!(s, "{v}").unwrap();
    }
    s
}

/// Writes `<name>.edges`, `<name>.features`, `<name>.labels` and
/// `<name>.manifest` into `dir`; returns the manifest path.
pub fn save_dataset(data: &Dataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &data.name;
    let files = [
        (format!("{name}.edges"), edges_text(&data.graph)),
        (format!("{name}.features"), features_text(&data.features)),
        (format!("{name}.labels"), labels_text(&data.labels)),
    ];
    for (file, body) in &files {
        let p = dir.join(file);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    let manifest = DatasetManifest {
        name: name.clone(),
        edges: dir.join(&files[0].0),
        features: dir.join(&files[1].0),
        labels: dir.join(&files[2].0),
        node_count: data.graph.node_count(),
        feature_dim: data.features.dim(),
        classes: data.labels.class_count(),
        split: data.split,
    };
    let path = dir.join(format!("{name}.manifest"));
    let body = manifest.render(&files[0].0, &files[1].0, &files[2].0);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// SHA-256 of the canonical text form of graph, features and labels.
pub fn dataset_hash(data: &Dataset) -> String {
    let mut h = Sha256::new();
    for part in [
        edges_text(&data.graph),
        features_text(&data.features),
        labels_text(&data.labels),
    ] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
