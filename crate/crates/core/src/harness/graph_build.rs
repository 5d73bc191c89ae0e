//! Initial graph from a training series: per-node top-k plus an absolute
//! correlation threshold.

use serde::{Deserialize, Serialize};

use crate::dynamics::{abs_pearson, NodeSignalSeries};
use crate::error::{Error, Result};
use crate::graph::StaticGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBuildSpec {
    pub top_k: usize,
    pub abs_corr_threshold: f64,
}

impl Default for GraphBuildSpec {
    fn default() -> Self {
        GraphBuildSpec {
            top_k: 3,
            abs_corr_threshold: 0.95,
        }
    }
}

impl GraphBuildSpec {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 || !(0.0..=1.0).contains(&self.abs_corr_threshold) {
            return Err(Error::InvalidParameter(format!(
                "graph build needs top_k >= 1 and a threshold in [0, 1], got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Full `|corr|` matrix of the series columns.
pub fn abs_correlation_matrix(series: &NodeSignalSeries) -> Vec<Vec<f64>> {
    let n = series.node_count();
    let cols: Vec<Vec<f64>> = (0..n).map(|i| series.node(i)).collect();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = abs_pearson(&cols[i], &cols[j]);
            c[i][j] = v;
            c[j][i] = v;
        }
    }
    c
}

/// Union of each node's `top_k` strongest partners (capped at `N - 1`) and all
/// pairs above the threshold, weighted by `|corr|`. Ties go to the lower index.
pub fn build_initial_graph(train: &NodeSignalSeries, spec: &GraphBuildSpec) -> Result<StaticGraph> {
    spec.validate()?;
    let n = train.node_count();
    if n < 2 {
        return Err(Error::InvalidGraph(format!("need at least 2 nodes, got {n}")));
    }
    if train.len() < 2 {
        return Err(Error::EmptyInput("train split needs at least 2 steps".into()));
    }
    let c = abs_correlation_matrix(train);
    let k = spec.top_k.min(n - 1);
    let mut keep = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| c[i][b].total_cmp(&c[i][a]).then(a.cmp(&b)));
        for &j in &others[..k] {
            keep[i.min(j)][i.max(j)] = true;
        }
    }
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if keep[i][j] || c[i][j] > spec.abs_corr_threshold {
                edges.push((i, j));
                weights.push(c[i][j]);
            }
        }
    }
    let g = StaticGraph::new(n, edges, weights)?;
    match train.labels() {
        Some(l) => g.with_labels(l.to_vec()),
        None => Ok(g),
    }
}
