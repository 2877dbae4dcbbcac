//! Path-based MLP node classification for graphs with heterophily.
//!
//! A target node is represented by a handful of short paths starting at it.
//! Paths are grown greedily through feature-similar neighbors, every node
//! on a path is encoded by a shared perceptron, the encodings along a path
//! are concatenated and re-encoded, and a learned per-node softmax mixes the
//! path messages into the node's own state before classification. No
//! message passing over the whole neighborhood takes place, so deep paths
//! do not blur node representations.
//!
//! ```
//! use pathmlp::graph::{edge_homophily, Graph, Labels};
//!
//! let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)])?;
//! let y = Labels::new(vec![0, 0, 1], 2)?;
//! assert!((edge_homophily(&g, &y)? - 1.0 / 3.0).abs() < 1e-12);
//! # Ok::<(), pathmlp::Error>(())
//! ```
//!
//! Modules:
//! - [`graph`]: CSR graphs, features, labels, homophily measures and the
//!   re-normalized affinity operator;
//! - [`sampler`]: similarity-guided, BFS and DFS path sampling;
//! - [`autodiff`]: a reverse-mode tape over dense matrices and a
//!   finite-difference checker;
//! - [`model`]: the path classifier and perceptron baselines;
//! - [`train`]: splits, Adam, early stopping, metrics, multi-run protocol and
//!   grid search;
//! - [`data`]: text formats, checkpoints, synthetic fixtures and the
//!   duplicate-row leakage probe.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod graph;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};

/// Guide chapters under `book/src`, compiled as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
