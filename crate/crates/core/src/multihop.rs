//! Multi-hop expansion, pruning and merging of time-varying graphs.
//!
//! At each time step the spectrally normalized Laplacian `L~ = L / lambda_max`
//! is raised to powers `p = 2..=P`. Every node pair that becomes non-zero in
//! `L~^p` for the first time, and is not an edge of the original graph, is a
//! hop-`p` candidate. Candidates whose score does not strictly exceed the
//! threshold are pruned; survivors are merged with the original graph.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{time_varying_laplacian, EdgeWeightSeries};
use crate::error::{Error, Result};
use crate::graph::{laplacian_from_parts, DenseSymMatrix, Edge, StaticGraph};
use crate::spectral::eigendecompose;

/// Entries of `L~^p` at or below this magnitude count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub edge: Edge,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopCandidateSet {
    pub hop: usize,
    pub time: usize,
    pub candidates: Vec<Candidate>,
}

impl HopCandidateSet {
    pub fn edges(&self) -> Vec<Edge> {
        self.candidates.iter().map(|c| c.edge).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneMetric {
    /// `|(L~^p)_ij|`.
    #[default]
    WeightMagnitude,
    /// Absolute windowed correlation of the endpoints' signals.
    WindowedCorrelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSpec {
    pub threshold: f64,
    #[serde(default)]
    pub metric: PruneMetric,
}

impl PruneSpec {
    pub fn new(threshold: f64) -> Result<Self> {
        let s = PruneSpec {
            threshold,
            metric: PruneMetric::WeightMagnitude,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prune threshold must be finite and >= 0, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Weight given to a latent edge when it is merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatentWeightRule {
    #[default]
    CandidateScore,
    EndpointCorrelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Hop(usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original => write!(f, "original"),
            Provenance::Hop(p) => write!(f, "hop{p}"),
        }
    }
}

/// One time step of a dynamic topology.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySlice {
    pub graph: StaticGraph,
    /// Parallel to `graph.edges()`.
    pub provenance: Vec<Provenance>,
}

impl TopologySlice {
    pub fn original(g: &StaticGraph) -> Self {
        TopologySlice {
            graph: g.clone(),
            provenance: vec![Provenance::Original; g.edge_count()],
        }
    }

    pub fn latent_count(&self) -> usize {
        self.provenance.iter().filter(|p| **p != Provenance::Original).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTopology {
    pub slices: Vec<TopologySlice>,
}

impl DynamicTopology {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.slices.first().map_or(0, |s| s.graph.node_count())
    }

    /// CSV `time,src,dst,weight,provenance`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "src", "dst", "weight", "provenance"])?;
        for (t, s) in self.slices.iter().enumerate() {
            for ((e, wt), p) in s.graph.edges().iter().zip(s.graph.weights()).zip(&s.provenance) {
                wr.write_record([
                    t.to_string(),
                    e.lo.to_string(),
                    e.hi.to_string(),
                    format!("{wt:?}"),
                    p.to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// `L / lambda_max(L)`, or `None` when the Laplacian is zero.
pub fn normalize_laplacian(l: &DenseSymMatrix) -> Result<Option<DenseSymMatrix>> {
    let lambda_max = eigendecompose(l)?.lambda_max();
    if lambda_max <= ZERO_TOLERANCE {
        return Ok(None);
    }
    Ok(Some(l.scaled(1.0 / lambda_max)))
}

/// Hop candidates for `p = 2..=max_hops` from a normalized Laplacian.
pub fn hop_expand(normalized: &DenseSymMatrix, g: &StaticGraph, max_hops: usize, time: usize) -> Result<Vec<HopCandidateSet>> {
    if max_hops < 1 {
        return Err(Error::InvalidParameter("max hops must be at least 1".into()));
    }
    let n = g.node_count();
    if normalized.dim() != n {
        return Err(Error::dim("hop expansion", n, normalized.dim()));
    }
    let mut emitted: HashSet<Edge> = g.edge_set();
    let mut out = Vec::with_capacity(max_hops.saturating_sub(1));
    let base = normalized.matrix();
    let mut power: DMatrix<f64> = base.clone();
    for hop in 2..=max_hops {
        power = &power * base;
        let mut candidates = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let e = Edge { lo: i, hi: j };
                if emitted.contains(&e) {
                    continue;
                }
                // The power of a symmetric matrix is symmetric up to round-off.
                let score = 0.5 * (power[(i, j)].abs() + power[(j, i)].abs());
                if score > ZERO_TOLERANCE {
                    candidates.push(Candidate { edge: e, score });
                }
            }
        }
        for c in &candidates {
            emitted.insert(c.edge);
        }
        out.push(HopCandidateSet { hop, time, candidates });
    }
    Ok(out)
}

/// Keeps candidates with `score > threshold`, preserving order.
pub fn prune(cands: &HopCandidateSet, spec: &PruneSpec) -> HopCandidateSet {
    HopCandidateSet {
        hop: cands.hop,
        time: cands.time,
        candidates: cands
            .candidates
            .iter()
            .filter(|c| c.score > spec.threshold)
            .copied()
            .collect(),
    }
}

/// Replaces each candidate's score with `score_fn(edge)`.
pub fn rescore(cands: &HopCandidateSet, score_fn: impl Fn(Edge) -> f64) -> HopCandidateSet {
    HopCandidateSet {
        hop: cands.hop,
        time: cands.time,
        candidates: cands
            .candidates
            .iter()
            .map(|c| Candidate {
                edge: c.edge,
                score: score_fn(c.edge),
            })
            .collect(),
    }
}

/// Union of `g_t` with the pruned hop graphs. `correlation` supplies endpoint
/// correlations for [`LatentWeightRule::EndpointCorrelation`].
pub fn merge(
    g_t: &StaticGraph,
    pruned: &[HopCandidateSet],
    rule: LatentWeightRule,
    correlation: Option<&dyn Fn(Edge) -> f64>,
) -> Result<TopologySlice> {
    let mut seen = g_t.edge_set();
    let mut edges: Vec<(usize, usize)> = g_t.edges().iter().map(|e| (e.lo, e.hi)).collect();
    let mut weights = g_t.weights().to_vec();
    let mut provenance = vec![Provenance::Original; edges.len()];
    for set in pruned {
        for c in &set.candidates {
            if !seen.insert(c.edge) {
                return Err(Error::DuplicateEdge(c.edge.lo, c.edge.hi));
            }
            let w = match rule {
                LatentWeightRule::CandidateScore => c.score,
                LatentWeightRule::EndpointCorrelation => {
                    let f = correlation.ok_or_else(|| {
                        Error::InvalidParameter("endpoint-correlation weights need a correlation source".into())
                    })?;
                    f(c.edge)
                }
            };
            edges.push((c.edge.lo, c.edge.hi));
            weights.push(w.max(0.0));
            provenance.push(Provenance::Hop(set.hop));
        }
    }
    let mut graph = StaticGraph::new(g_t.node_count(), edges, weights)?;
    if let Some(l) = g_t.labels() {
        graph = graph.with_labels(l.to_vec())?;
    }
    Ok(TopologySlice { graph, provenance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopConfig {
    pub max_hops: usize,
    pub prune: PruneSpec,
    #[serde(default)]
    pub latent_weight: LatentWeightRule,
}

/// One expand, prune and merge step for the original graph carrying weights `w_t`.
pub fn topology_step(
    g: &StaticGraph,
    w_t: &[f64],
    cfg: &HopConfig,
    time: usize,
    correlation: Option<&dyn Fn(Edge) -> f64>,
) -> Result<TopologySlice> {
    let g_t = g.reweighted(w_t.to_vec())?;
    if cfg.max_hops <= 1 {
        if cfg.max_hops == 0 {
            return Err(Error::InvalidParameter("max hops must be at least 1".into()));
        }
        return Ok(TopologySlice::original(&g_t));
    }
    let l = laplacian_from_parts(g.node_count(), g.edges(), w_t);
    let Some(normalized) = normalize_laplacian(&l)? else {
        return Ok(TopologySlice::original(&g_t));
    };
    let expanded = hop_expand(&normalized, g, cfg.max_hops, time)?;
    let mut pruned = Vec::with_capacity(expanded.len());
    for set in &expanded {
        let scored = match cfg.prune.metric {
            PruneMetric::WeightMagnitude => set.clone(),
            PruneMetric::WindowedCorrelation => {
                let f = correlation.ok_or_else(|| {
                    Error::InvalidParameter("correlation pruning needs a correlation source".into())
                })?;
                rescore(set, f)
            }
        };
        pruned.push(prune(&scored, &cfg.prune));
    }
    merge(&g_t, &pruned, cfg.latent_weight, correlation)
}

/// Per-step composition of time-varying Laplacian, normalization, expansion,
/// pruning by candidate score and merging.
pub fn build_dynamic_topology(g: &StaticGraph, ws: &EdgeWeightSeries, max_hops: usize, spec: &PruneSpec) -> Result<DynamicTopology> {
    spec.validate()?;
    if spec.metric != PruneMetric::WeightMagnitude {
        return Err(Error::InvalidParameter(
            "offline topology construction only supports the weight-magnitude metric".into(),
        ));
    }
    let cfg = HopConfig {
        max_hops,
        prune: *spec,
        latent_weight: LatentWeightRule::CandidateScore,
    };
    let mut slices = Vec::with_capacity(ws.len());
    for t in 0..ws.len() {
        // Validates the edge set and the index.
        time_varying_laplacian(g, ws, t)?;
        slices.push(topology_step(g, &ws.at(t)?, &cfg, t, None)?);
    }
    Ok(DynamicTopology { slices })
}
