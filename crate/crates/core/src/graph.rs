//! Undirected weighted graphs and the matrices built from them.
//!
//! The Laplacian is `L = D - A`. The node-to-edge incidence matrix `B1`
//! orients every edge from its lower-indexed endpoint (+1) to its
//! higher-indexed endpoint (-1), so that
//! `sign(B1) diag(w) sign(B1)^T = L` and the Hodge-1 Laplacian of the edge
//! space is `L1 = B1^T B1`.

use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered node pair stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub lo: usize,
    pub hi: usize,
}

impl Edge {
    /// Normalizes the pair order. Panics on a self-loop.
    pub fn new(a: usize, b: usize) -> Self {
        assert!(a != b, "self-loop ({a}, {a})");
        if a < b {
            Edge { lo: a, hi: b }
        } else {
            Edge { lo: b, hi: a }
        }
    }
}

/// Undirected graph with non-negative edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticGraph {
    node_count: usize,
    edges: Vec<Edge>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl StaticGraph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        if edges.len() != weights.len() {
            return Err(Error::dim("edge weights", edges.len(), weights.len()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut out = Vec::with_capacity(edges.len());
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge {k} ({a}, {b}) references a node outside 0..{node_count}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            let e = Edge::new(a, b);
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.lo, e.hi)));
            }
            let w = weights[k];
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has invalid weight {w}",
                    e.lo, e.hi
                )));
            }
            out.push(e);
        }
        Ok(StaticGraph {
            node_count,
            edges: out,
            weights,
            labels: None,
        })
    }

    /// Every edge gets weight 1.
    pub fn unweighted(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let w = vec![1.0; edges.len()];
        Self::new(node_count, edges, w)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.node_count {
            return Err(Error::dim("node labels", self.node_count, labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same edge set, new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        let edges = self.edges.iter().map(|e| (e.lo, e.hi)).collect();
        let mut g = Self::new(self.node_count, edges, weights)?;
        g.labels = self.labels.clone();
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&Edge::new(a, b))
    }

    pub fn edge_set(&self) -> HashSet<Edge> {
        self.edges.iter().copied().collect()
    }

    pub fn adjacency(&self) -> DenseSymMatrix {
        let n = self.node_count;
        let mut a = DMatrix::zeros(n, n);
        for (e, &w) in self.edges.iter().zip(&self.weights) {
            a[(e.lo, e.hi)] = w;
            a[(e.hi, e.lo)] = w;
        }
        DenseSymMatrix(a)
    }

    /// Mean unweighted node degree, `2 |E| / N`.
    pub fn average_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.node_count as f64
    }

    /// Number of connected components, counting only edges with positive weight
    /// when `positive_only` is set.
    pub fn component_count(&self, positive_only: bool) -> usize {
        let mut parent: Vec<usize> = (0..self.node_count).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.node_count;
        for (e, &w) in self.edges.iter().zip(&self.weights) {
            if positive_only && w <= 0.0 {
                continue;
            }
            let (a, b) = (find(&mut parent, e.lo), find(&mut parent, e.hi));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count(false) == 1
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["src", "dst", "weight"])?;
        for (e, &wt) in self.edges.iter().zip(&self.weights) {
            wr.write_record([e.lo.to_string(), e.hi.to_string(), format!("{wt:?}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads an edge-list CSV (`src,dst,weight`). The CSV form does not carry
    /// isolated trailing nodes, so `node_count` overrides the inferred count when given.
    pub fn read_csv<R: Read>(r: R, node_count: Option<usize>) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(r);
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        let mut max_node = 0usize;
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::RaggedRow {
                    row: row + 1,
                    expected: 3,
                    found: rec.len(),
                });
            }
            let parse_idx = |col: usize| -> Result<usize> {
                rec[col].trim().parse().map_err(|_| Error::NonNumeric {
                    row: row + 1,
                    column: col,
                    value: rec[col].to_string(),
                })
            };
            let a = parse_idx(0)?;
            let b = parse_idx(1)?;
            let w: f64 = rec[2].trim().parse().map_err(|_| Error::NonNumeric {
                row: row + 1,
                column: 2,
                value: rec[2].to_string(),
            })?;
            max_node = max_node.max(a).max(b);
            edges.push((a, b));
            weights.push(w);
        }
        let inferred = if edges.is_empty() { 0 } else { max_node + 1 };
        let n = node_count.unwrap_or(inferred);
        if n == 0 {
            return Err(Error::EmptyInput("edge list has no edges and no node count".into()));
        }
        Self::new(n, edges, weights)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: StaticGraph = serde_json::from_str(s)?;
        let edges = raw.edges.iter().map(|e| (e.lo, e.hi)).collect();
        let g = Self::new(raw.node_count, edges, raw.weights)?;
        match raw.labels {
            Some(l) => g.with_labels(l),
            None => Ok(g),
        }
    }
}

/// Square real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix(DMatrix<f64>);

impl DenseSymMatrix {
    /// Symmetrizes by averaging with the transpose; rejects non-square input.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim("square matrix", m.nrows(), m.ncols()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(DenseSymMatrix(sym))
    }

    pub fn zeros(n: usize) -> Self {
        DenseSymMatrix(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dim("matrix-vector product", self.dim(), x.len()));
        }
        Ok(&self.0 * x)
    }

    pub fn scaled(&self, s: f64) -> Self {
        DenseSymMatrix(&self.0 * s)
    }
}

/// Node-to-edge incidence matrix with the lower-endpoint-positive orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    node_count: usize,
    edges: Vec<Edge>,
}

impl IncidenceMatrix {
    pub fn rows(&self) -> usize {
        self.node_count
    }

    pub fn cols(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The signed matrix `sign(B1)` with entries in {-1, 0, +1}.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.node_count, self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            b[(e.lo, k)] = 1.0;
            b[(e.hi, k)] = -1.0;
        }
        b
    }

    /// `sign(B1) diag(w) sign(B1)^T`.
    pub fn weighted_laplacian(&self, weights: &[f64]) -> Result<DenseSymMatrix> {
        if weights.len() != self.cols() {
            return Err(Error::dim("incidence weights", self.cols(), weights.len()));
        }
        let b = self.to_matrix();
        let mut bw = b.clone();
        for (k, &w) in weights.iter().enumerate() {
            bw.column_mut(k).scale_mut(w);
        }
        Ok(DenseSymMatrix(bw * b.transpose()))
    }
}

pub fn build_laplacian(g: &StaticGraph) -> DenseSymMatrix {
    laplacian_from_parts(g.node_count, &g.edges, &g.weights)
}

pub(crate) fn laplacian_from_parts(n: usize, edges: &[Edge], weights: &[f64]) -> DenseSymMatrix {
    let mut l = DMatrix::zeros(n, n);
    for (e, &w) in edges.iter().zip(weights) {
        l[(e.lo, e.hi)] -= w;
        l[(e.hi, e.lo)] -= w;
        l[(e.lo, e.lo)] += w;
        l[(e.hi, e.hi)] += w;
    }
    DenseSymMatrix(l)
}

pub fn incidence(g: &StaticGraph) -> IncidenceMatrix {
    IncidenceMatrix {
        node_count: g.node_count,
        edges: g.edges.clone(),
    }
}

/// Hodge-1 Laplacian `B1^T B1` of the edge space.
///
/// The weighting is the square-root split consistent with
/// `L = B1 B1^T = sign(B1) diag(w) sign(B1)^T`, i.e. `B1 = sign(B1) diag(sqrt(w))`.
/// Unit weights give the plain `sign(B1)^T sign(B1)`.
pub fn hodge1_laplacian(b: &IncidenceMatrix, weights: &[f64]) -> Result<DenseSymMatrix> {
    if weights.len() != b.cols() {
        return Err(Error::dim("hodge-1 weights", b.cols(), weights.len()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidParameter(format!("edge weight {w} is not a non-negative number")));
    }
    let mut bm = b.to_matrix();
    for (k, &w) in weights.iter().enumerate() {
        bm.column_mut(k).scale_mut(w.sqrt());
    }
    Ok(DenseSymMatrix(bm.transpose() * bm))
}
