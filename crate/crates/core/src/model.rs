//! The path-aggregation classifier and its feature-augmented variant.
//!
//! For every node `i` with sampled paths `p_i^1 .. p_i^N`:
//!
//! 1. each node `v` on a path is encoded as `h̄_v = σ(x_v W1 + b1)`;
//! 2. a path is the concatenation of its `d + 1` node encodings, re-encoded
//!    as `h_p = σ([h̄_v0 | .. | h̄_vd] W2 + b2)`;
//! 3. the node's path message is `Σ_k ε_i^k h_p^k` with
//!    `ε_i = softmax(eps_logits[i])`;
//! 4. the state is `h_i = σ(x_i W3 + b3) + message`;
//! 5. topology is mixed in as `β σ(A_i W4 + b4) + (1 - β) h_i`;
//! 6. class probabilities are `softmax(h W5 + b5)`.
//!
//! σ is the rectifier. Dropout follows every σ during training.
//!
//! The plus variant feeds `x_v | (Ã_sym^m x)_v` in place of `x_v`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, RngCore};

use crate::autodiff::{init_uniform, ParamId, ParamStore, SparseRows, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{apply_affinity, AffinityOperator, Graph, NodeFeatures};
use crate::sampler::PathTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Base,
    Plus,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Base => "base",
            Variant::Plus => "plus",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Variant::Base),
            "plus" => Ok(Variant::Plus),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant '{other}' (expected base or plus)"
            ))),
        }
    }
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Architecture hyper-parameters. `input_dim` is the width of the features
/// actually fed to the network (twice the raw width for [`Variant::Plus`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub f_prime: usize,
    pub f_h: usize,
    pub classes: usize,
    pub d: usize,
    pub n_paths: usize,
    pub beta: f64,
    pub dropout: f64,
    pub variant: Variant,
    pub m: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.input_dim == 0 || self.f_prime == 0 || self.f_h == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.d == 0 || self.n_paths == 0 {
            return bad("d and n_paths must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(1..=2).contains(&self.m) {
            return bad(format!("augmentation power m must be 1 or 2, got {}", self.m));
        }
        Ok(())
    }
}

/// `x_v | (Ã_sym^m x)_v` for every node.
pub fn augment_features(x: &NodeFeatures, op: &AffinityOperator, m: usize) -> Result<NodeFeatures> {
    let smoothed = apply_affinity(op, x, m)?;
    x.concat(&smoothed)
}

/// Adjacency rows as a sparse 0/1 left operand.
pub fn adjacency_rows(g: &Graph) -> Arc<SparseRows> {
    Arc::new(SparseRows {
        offsets: g.row_offsets().to_vec(),
        cols: g.col_targets().to_vec(),
        ncols: g.node_count(),
    })
}

/// Anything that maps the whole node set to class probabilities.
pub trait NodeClassifier {
    /// Records a full-graph forward pass and returns the `n x C`
    /// probability matrix.
    fn forward(&self, tape: &mut Tape, store: &ParamStore, mode: Mode, rng: &mut dyn RngCore) -> Result<Var>;

    fn node_count(&self) -> usize;
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardCache {
    /// `n x f'` node encodings.
    pub node_encodings: Var,
    /// `(n * N) x (d + 1) f'` concatenated path features.
    pub path_concat: Var,
    /// `(n * N) x f_h` re-encoded paths.
    pub path_encodings: Var,
    /// `n x N` softmax-normalized path weights.
    pub path_weights: Var,
    /// `n x f_h` aggregated path messages.
    pub path_message: Var,
    pub self_state: Var,
    pub updated_state: Var,
    pub topology: Option<Var>,
    pub hidden: Var,
    pub probs: Var,
}

/// Parameter handles of one path model.
#[derive(Debug, Clone, Copy)]
pub struct PathMlpParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub w3: ParamId,
    pub b3: ParamId,
    pub w4: ParamId,
    pub b4: ParamId,
    pub w5: ParamId,
    pub b5: ParamId,
    pub eps_logits: ParamId,
}

/// A path model bound to its graph, features and sampled paths.
#[derive(Debug, Clone)]
pub struct PathMlp {
    config: ModelConfig,
    params: PathMlpParams,
    features: Array2<f64>,
    positions: Vec<Vec<usize>>,
    adjacency: Arc<SparseRows>,
}

impl PathMlp {
    /// Registers freshly initialized parameters in `store`.
    ///
    /// `features` must already be augmented for the plus variant.
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        graph: &Graph,
        features: &NodeFeatures,
        paths: &PathTable,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let n = graph.node_count();
        if features.rows() != n || features.dim() != config.input_dim {
            return Err(Error::shape(
                "path model",
                format!(
                    "features {}x{} for {n} nodes of width {}",
                    features.rows(),
                    features.dim(),
                    config.input_dim
                ),
            ));
        }
        if paths.node_count() != n || paths.d() != config.d || paths.n_paths() != config.n_paths {
            return Err(Error::shape(
                "path model",
                format!(
                    "path table (n={}, d={}, N={}) vs config (n={n}, d={}, N={})",
                    paths.node_count(),
                    paths.d(),
                    paths.n_paths(),
                    config.d,
                    config.n_paths
                ),
            ));
        }
        let (f, fp, fh, c) = (config.input_dim, config.f_prime, config.f_h, config.classes);
        let concat = (config.d + 1) * fp;
        let params = PathMlpParams {
            w1: store.add("w1", init_uniform(f, fp, rng)),
            b1: store.add("b1", Array2::zeros((1, fp))),
            w2: store.add("w2", init_uniform(concat, fh, rng)),
            b2: store.add("b2", Array2::zeros((1, fh))),
            w3: store.add("w3", init_uniform(f, fh, rng)),
            b3: store.add("b3", Array2::zeros((1, fh))),
            w4: store.add("w4", init_uniform(n, fh, rng)),
            b4: store.add("b4", Array2::zeros((1, fh))),
            w5: store.add("w5", init_uniform(fh, c, rng)),
            b5: store.add("b5", Array2::zeros((1, c))),
            eps_logits: store.add_with("eps_logits", Array2::zeros((n, config.n_paths)), true, false),
        };
        let positions = (0..=config.d).map(|j| paths.position(j)).collect();
        Ok(PathMlp {
            config,
            params,
            features: features.matrix().clone(),
            positions,
            adjacency: adjacency_rows(graph),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &PathMlpParams {
        &self.params
    }

    /// Full forward pass, keeping every intermediate.
    pub fn forward_cached(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<ForwardCache> {
        let p = &self.params;
        let cfg = &self.config;
        let training = mode == Mode::Train;
        let x = tape.input(self.features.clone());

        let node_encodings = {
            let (w, b) = (tape.param(store, p.w1), tape.param(store, p.b1));
            let h = tape.linear(x, w, Some(b))?;
            let h = tape.relu(h)?;
            tape.dropout(h, cfg.dropout, training, rng)?
        };
        let path_concat = encode_path_nodes(tape, node_encodings, &self.positions)?;
        let path_encodings = {
            let (w, b) = (tape.param(store, p.w2), tape.param(store, p.b2));
            let h = tape.linear(path_concat, w, Some(b))?;
            let h = tape.relu(h)?;
            tape.dropout(h, cfg.dropout, training, rng)?
        };
        let logits = tape.param(store, p.eps_logits);
        let path_weights = tape.softmax_rows(logits)?;
        let path_message = tape.weighted_sum(path_weights, path_encodings)?;

        let self_state = {
            let (w, b) = (tape.param(store, p.w3), tape.param(store, p.b3));
            let h = tape.linear(x, w, Some(b))?;
            let h = tape.relu(h)?;
            tape.dropout(h, cfg.dropout, training, rng)?
        };
        let updated_state = tape.add(self_state, path_message)?;

        let (topology, hidden) = if cfg.beta > 0.0 {
            let w = tape.param(store, p.w4);
            let b = tape.param(store, p.b4);
            let h = tape.sparse_matmul(self.adjacency.clone(), w)?;
            let h = tape.add_bias(h, b)?;
            let h = tape.relu(h)?;
            let h = tape.dropout(h, cfg.dropout, training, rng)?;
            (Some(h), tape.affine_mix(h, updated_state, cfg.beta)?)
        } else {
            (None, updated_state)
        };

        let probs = {
            let (w, b) = (tape.param(store, p.w5), tape.param(store, p.b5));
            let logits = tape.linear(hidden, w, Some(b))?;
            tape.softmax_rows(logits)?
        };
        Ok(ForwardCache {
            node_encodings,
            path_concat,
            path_encodings,
            path_weights,
            path_message,
            self_state,
            updated_state,
            topology,
            hidden,
            probs,
        })
    }

    /// Softmax-normalized path weights, `n x N`.
    pub fn path_weights(&self, store: &ParamStore) -> Array2<f64> {
        let mut w = store.get(self.params.eps_logits).value.clone();
        for mut row in w.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let z = row.sum();
            row /= z;
        }
        w
    }
}

impl NodeClassifier for PathMlp {
    fn forward(&self, tape: &mut Tape, store: &ParamStore, mode: Mode, rng: &mut dyn RngCore) -> Result<Var> {
        Ok(self.forward_cached(tape, store, mode, rng)?.probs)
    }

    fn node_count(&self) -> usize {
        self.features.nrows()
    }
}

/// Concatenates node encodings along each path: `positions[j]` lists the
/// node at position `j` of every path, node-major.
pub fn encode_path_nodes(tape: &mut Tape, node_encodings: Var, positions: &[Vec<usize>]) -> Result<Var> {
    let parts = positions
        .iter()
        .map(|idx| tape.gather_rows(node_encodings, idx))
        .collect::<Result<Vec<_>>>()?;
    tape.concat(&parts)
}

/// Two-layer perceptron, optionally with a linear adjacency-row embedding
/// added to the hidden layer (the "MLP+A" shortcut probe).
#[derive(Debug, Clone)]
pub struct Mlp {
    features: Array2<f64>,
    adjacency: Option<Arc<SparseRows>>,
    dropout: f64,
    w1: ParamId,
    b1: ParamId,
    wa: Option<ParamId>,
    w2: ParamId,
    b2: ParamId,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        features: &NodeFeatures,
        adjacency: Option<&Graph>,
        hidden: usize,
        classes: usize,
        dropout: f64,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must lie in [0, 1), got {dropout}"
            )));
        }
        let (n, f) = (features.rows(), features.dim());
        if let Some(g) = adjacency {
            if g.node_count() != n {
                return Err(Error::shape(
                    "mlp",
                    format!("{} nodes vs {n} feature rows", g.node_count()),
                ));
            }
        }
        let w1 = store.add("mlp_w1", init_uniform(f, hidden, rng));
        let b1 = store.add("mlp_b1", Array2::zeros((1, hidden)));
        let wa = adjacency.map(|_| store.add("mlp_wa", init_uniform(n, hidden, rng)));
        let w2 = store.add("mlp_w2", init_uniform(hidden, classes, rng));
        let b2 = store.add("mlp_b2", Array2::zeros((1, classes)));
        Ok(Mlp {
            features: features.matrix().clone(),
            adjacency: adjacency.map(adjacency_rows),
            dropout,
            w1,
            b1,
            wa,
            w2,
            b2,
        })
    }
}

impl NodeClassifier for Mlp {
    fn forward(&self, tape: &mut Tape, store: &ParamStore, mode: Mode, rng: &mut dyn RngCore) -> Result<Var> {
        let training = mode == Mode::Train;
        let x = tape.input(self.features.clone());
        let (w1, b1) = (tape.param(store, self.w1), tape.param(store, self.b1));
        let h = tape.linear(x, w1, Some(b1))?;
        let mut h = tape.relu(h)?;
        if let (Some(a), Some(wa)) = (&self.adjacency, self.wa) {
            let wa = tape.param(store, wa);
            let emb = tape.sparse_matmul(a.clone(), wa)?;
            h = tape.add(h, emb)?;
        }
        let h = tape.dropout(h, self.dropout, training, rng)?;
        let (w2, b2) = (tape.param(store, self.w2), tape.param(store, self.b2));
        let logits = tape.linear(h, w2, Some(b2))?;
        tape.softmax_rows(logits)
    }

    fn node_count(&self) -> usize {
        self.features.nrows()
    }
}
