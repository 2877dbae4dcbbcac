//! Datasets: text interchange, checkpoints, synthetic fixtures and the
//! duplicate-row leakage probe.

pub mod checkpoint;
pub mod io;
pub mod kv;
pub mod leakage;
pub mod synthetic;

use std::path::PathBuf;

use crate::graph::{Graph, Labels, NodeFeatures};
use crate::train::SplitProfile;

pub use checkpoint::{load_checkpoint_into, save_checkpoint};
pub use io::{dataset_hash, load_dataset, load_manifest, save_dataset, DatasetManifest};
pub use leakage::{detect_leakage, generate_leaked, verify_leakage, DuplicationRates, LeakageReport, LeakedConfig, ProbeConfig};
pub use synthetic::{generate, generate_synthetic, SyntheticConfig, SyntheticDataset, SyntheticKind};

/// An attributed, labeled graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: NodeFeatures,
    pub labels: Labels,
    /// Preferred split profile, if the dataset declares one.
    pub split: Option<SplitProfile>,
}

/// Environment variable naming the fixture directory.
pub const FIXTURES_ENV: &str = "PATHMLP_FIXTURES";

/// `$PATHMLP_FIXTURES`, or `fixtures/` at the repository root.
pub fn fixtures_dir() -> PathBuf {
    match std::env::var_os(FIXTURES_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures")),
    }
}

/// Loads `<fixtures>/<name>/<name>.manifest` if it exists.
pub fn load_fixture(name: &str) -> Option<crate::error::Result<Dataset>> {
    let path = fixtures_dir().join(name).join(format!("{name}.manifest"));
    path.exists().then(|| load_manifest(&path))
}
