//! Time-varying edge weights from sliding-window correlations of node signals.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian_from_parts, DenseSymMatrix, Edge, StaticGraph};

/// `T x N` matrix of node signals, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignalSeries {
    values: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl NodeSignalSeries {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyInput("series needs at least one step and one node".into()));
        }
        for r in 0..values.nrows() {
            for c in 0..values.ncols() {
                if !values[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, column: c });
                }
            }
        }
        Ok(NodeSignalSeries { values, labels: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::RaggedRow {
                row: k,
                expected: n,
                found: r.len(),
            });
        }
        Self::new(DMatrix::from_fn(t, n, |i, j| rows[i][j]))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.node_count() {
            return Err(Error::dim("series labels", self.node_count(), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn node_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn at(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::OutOfRange {
                context: "series slice",
                index: end,
                len: self.len(),
            });
        }
        Ok(NodeSignalSeries {
            values: self.values.rows(start, end - start).into_owned(),
            labels: self.labels.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub window: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        let w = WindowSpec { window, stride };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidParameter(format!(
                "correlation window must be at least 2, got {}",
                self.window
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { window: 10, stride: 1 }
    }
}

/// Absolute sample Pearson correlation; zero-variance input scores 0.
pub fn abs_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (da, db) = (a[k] - ma, b[k] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    // The (n - 1) normalizations cancel in the ratio.
    let denom = (saa * sbb).sqrt();
    // Deviations at the rounding level of the mean count as a constant window.
    let floor = |v: &[f64]| {
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let r = 4.0 * n as f64 * f64::EPSILON * scale;
        n as f64 * r * r
    };
    if !denom.is_finite() || denom <= f64::MIN_POSITIVE || saa <= floor(&a[..n]).max(1e-300) || sbb <= floor(&b[..n]).max(1e-300) {
        return 0.0;
    }
    (sab / denom).abs().min(1.0)
}

/// Correlation scores at the window end times `ends[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowScores {
    pub ends: Vec<usize>,
    /// `scores[k][p]` for window ending at `ends[k]` and pair `p`.
    pub scores: Vec<Vec<f64>>,
}

/// Windowed absolute correlation for each pair, over samples `t - window + 1 ..= t`
/// for `t = window - 1, window - 1 + stride, ...`.
pub fn sliding_abs_correlation(
    series: &NodeSignalSeries,
    w: &WindowSpec,
    pairs: &[(usize, usize)],
) -> Result<WindowScores> {
    w.validate()?;
    let n = series.node_count();
    for &(a, b) in pairs {
        let bad = if a >= n { a } else { b };
        if a >= n || b >= n {
            return Err(Error::OutOfRange {
                context: "correlation pair",
                index: bad,
                len: n,
            });
        }
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|i| series.node(i)).collect();
    let mut ends = Vec::new();
    let mut scores = Vec::new();
    let mut t = w.window - 1;
    while t < series.len() {
        let start = t + 1 - w.window;
        scores.push(
            pairs
                .iter()
                .map(|&(a, b)| abs_pearson(&columns[a][start..=t], &columns[b][start..=t]))
                .collect(),
        );
        ends.push(t);
        t += w.stride;
    }
    Ok(WindowScores { ends, scores })
}

/// Non-negative weights on a fixed edge set, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightSeries {
    node_count: usize,
    edges: Vec<Edge>,
    weights: DMatrix<f64>,
}

impl EdgeWeightSeries {
    pub fn new(g: &StaticGraph, weights: DMatrix<f64>) -> Result<Self> {
        if weights.ncols() != g.edge_count() {
            return Err(Error::dim("edge weight columns", g.edge_count(), weights.ncols()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("edge weights must be finite and non-negative".into()));
        }
        Ok(EdgeWeightSeries {
            node_count: g.node_count(),
            edges: g.edges().to_vec(),
            weights,
        })
    }

    /// The graph's own weights repeated for `steps` time steps.
    pub fn constant(g: &StaticGraph, steps: usize) -> Result<Self> {
        let w = DMatrix::from_fn(steps, g.edge_count(), |_, k| g.weights()[k]);
        Self::new(g, w)
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn at(&self, t: usize) -> Result<Vec<f64>> {
        if t >= self.len() {
            return Err(Error::OutOfRange {
                context: "edge weight series",
                index: t,
                len: self.len(),
            });
        }
        Ok(self.weights.row(t).iter().copied().collect())
    }

    /// CSV with header `time,edge_src,edge_dst,weight`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "edge_src", "edge_dst", "weight"])?;
        for t in 0..self.len() {
            for (k, e) in self.edges.iter().enumerate() {
                wr.write_record([
                    t.to_string(),
                    e.lo.to_string(),
                    e.hi.to_string(),
                    format!("{:?}", self.weights[(t, k)]),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Sliding-window absolute correlations of each edge's endpoints, defined for every
/// time step. Steps before the first full window take the first window's value; with
/// stride > 1 each computed row is held until the next one.
pub fn edge_weight_series(g: &StaticGraph, series: &NodeSignalSeries, w: &WindowSpec) -> Result<EdgeWeightSeries> {
    if series.node_count() != g.node_count() {
        return Err(Error::dim("series nodes vs graph", g.node_count(), series.node_count()));
    }
    let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.lo, e.hi)).collect();
    let sc = sliding_abs_correlation(series, w, &pairs)?;
    let t_len = series.len();
    let mut out = DMatrix::zeros(t_len, pairs.len());
    if sc.ends.is_empty() {
        // Series shorter than one window: nothing is defined, fall back to the graph weights.
        for t in 0..t_len {
            for k in 0..pairs.len() {
                out[(t, k)] = g.weights()[k];
            }
        }
        return EdgeWeightSeries::new(g, out);
    }
    let mut idx = 0;
    for t in 0..t_len {
        while idx + 1 < sc.ends.len() && sc.ends[idx + 1] <= t {
            idx += 1;
        }
        for k in 0..pairs.len() {
            out[(t, k)] = sc.scores[idx][k];
        }
    }
    EdgeWeightSeries::new(g, out)
}

/// `L[t] = sign(B1) diag(w[t]) sign(B1)^T`.
pub fn time_varying_laplacian(g: &StaticGraph, ws: &EdgeWeightSeries, t: usize) -> Result<DenseSymMatrix> {
    if ws.edges() != g.edges() {
        return Err(Error::InvalidGraph("edge weight series was built on a different edge set".into()));
    }
    let w = ws.at(t)?;
    Ok(laplacian_from_parts(g.node_count(), g.edges(), &w))
}
