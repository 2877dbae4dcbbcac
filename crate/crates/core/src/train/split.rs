use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, SPLIT_STREAM};

/// Train/validation/test ratio profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitProfile {
    /// 48% / 32% / 20%.
    Standard,
    /// 50% / 25% / 25%.
    Half,
}

impl SplitProfile {
    /// Train and validation fractions in percent.
    fn percents(self) -> (usize, usize) {
        match self {
            SplitProfile::Standard => (48, 32),
            SplitProfile::Half => (50, 25),
        }
    }
}

impl fmt::Display for SplitProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitProfile::Standard => "48/32/20",
            SplitProfile::Half => "50/25/25",
        })
    }
}

impl FromStr for SplitProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "48/32/20" => Ok(SplitProfile::Standard),
            "50/25/25" => Ok(SplitProfile::Half),
            other => Err(Error::InvalidArgument(format!(
                "unknown split profile '{other}' (expected 48/32/20 or 50/25/25)"
            ))),
        }
    }
}

/// Disjoint node sets for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub profile: SplitProfile,
    pub seed: u64,
}

/// Uniform shuffle of `0..node_count` cut at the profile's ratios.
/// Sizes are rounded to the nearest node; the test set takes the rest.
pub fn make_random_split(node_count: usize, profile: SplitProfile, seed: u64) -> Result<Split> {
    if node_count < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 nodes to split, got {node_count}"
        )));
    }
    let mut order: Vec<usize> = (0..node_count).collect();
    order.shuffle(&mut stream_rng(seed, SPLIT_STREAM));
    let (tp, vp) = profile.percents();
    let n_train = (node_count * tp + 50) / 100;
    let n_val = (node_count * vp + 50) / 100;
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(Split {
        train: order,
        val,
        test,
        profile,
        seed,
    })
}
