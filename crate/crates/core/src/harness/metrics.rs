//! Per-step error and topology statistics aggregated over runs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::multihop::DynamicTopology;

/// `MSE[t] = 1/(N R) sum_r sum_i (x_i[t] - x^_{i,r}[t])^2`.
pub fn mse_curve(estimates: &[&DMatrix<f64>], ground_truth: &DMatrix<f64>) -> Result<Vec<f64>> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput("mse needs at least one run".into()));
    }
    let (t_len, n) = ground_truth.shape();
    for e in estimates {
        if e.nrows() != t_len {
            return Err(Error::dim("trace length", t_len, e.nrows()));
        }
        if e.ncols() != n {
            return Err(Error::dim("trace nodes", n, e.ncols()));
        }
    }
    let scale = 1.0 / (n * estimates.len()) as f64;
    Ok((0..t_len)
        .map(|t| {
            let total: f64 = estimates
                .iter()
                .map(|e| (e.row(t) - ground_truth.row(t)).norm_squared())
                .sum();
            total * scale
        })
        .collect())
}

/// `2 |E[t]| / N` per step.
pub fn degree_curve(topology: &DynamicTopology) -> Result<Vec<f64>> {
    if topology.is_empty() {
        return Err(Error::EmptyInput("topology has no steps".into()));
    }
    let n = topology.node_count();
    Ok(topology
        .slices
        .iter()
        .map(|s| 2.0 * s.graph.edge_count() as f64 / n as f64)
        .collect())
}

/// Average degree from per-step edge counts, averaged over runs.
pub fn degree_from_counts(counts: &[&[usize]], node_count: usize) -> Result<Vec<f64>> {
    let first = counts.first().ok_or_else(|| Error::EmptyInput("no edge counts".into()))?;
    let t_len = first.len();
    if let Some(bad) = counts.iter().find(|c| c.len() != t_len) {
        return Err(Error::dim("edge count length", t_len, bad.len()));
    }
    let scale = 2.0 / (node_count as f64 * counts.len() as f64);
    Ok((0..t_len)
        .map(|t| counts.iter().map(|c| c[t] as f64).sum::<f64>() * scale)
        .collect())
}

/// Mean of the last `k` entries (all of them when shorter).
pub fn tail_mean(curve: &[f64], k: usize) -> f64 {
    let tail = &curve[curve.len().saturating_sub(k)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}
