use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Labels;

/// Model-selection and reporting metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Accuracy,
    /// ROC AUC of the class-1 probability; binary tasks only.
    Auc,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "auc" => Ok(Metric::Auc),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric '{other}' (expected accuracy or auc)"
            ))),
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Share of `nodes` whose arg-max class equals the label.
pub fn evaluate_accuracy(probs: &Array2<f64>, labels: &Labels, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("accuracy over an empty node set".into()));
    }
    let hits = nodes
        .iter()
        .filter(|&&v| argmax(probs.row(v)) == labels.get(v))
        .count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Area under the ROC curve through the Mann–Whitney U statistic, with
/// tied scores contributing one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::shape(
            "roc_auc",
            format!("{} scores for {} labels", scores.len(), positive.len()),
        ));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks (1-based) over tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// AUC over `nodes`, scoring each by its class-1 probability.
pub fn evaluate_auc(probs: &Array2<f64>, labels: &Labels, nodes: &[usize]) -> Result<f64> {
    if labels.class_count() != 2 || probs.ncols() != 2 {
        return Err(Error::InvalidArgument("AUC requires exactly two classes".into()));
    }
    let scores: Vec<f64> = nodes.iter().map(|&v| probs[[v, 1]]).collect();
    let positive: Vec<bool> = nodes.iter().map(|&v| labels.get(v) == 1).collect();
    roc_auc(&scores, &positive)
}

pub fn evaluate(metric: Metric, probs: &Array2<f64>, labels: &Labels, nodes: &[usize]) -> Result<f64> {
    match metric {
        Metric::Accuracy => evaluate_accuracy(probs, labels, nodes),
        Metric::Auc => evaluate_auc(probs, labels, nodes),
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
