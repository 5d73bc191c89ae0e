//! Online LMS-type estimation of time-varying graph signals from noisy,
//! partially observed samples.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{abs_pearson, NodeSignalSeries, WindowSpec};
use crate::error::{Error, Result};
use crate::filter::{BoundFilter, FilterSpec};
use crate::graph::{build_laplacian, DenseSymMatrix, Edge, StaticGraph};
use crate::multihop::{
    topology_step, DynamicTopology, HopConfig, LatentWeightRule, Provenance, PruneMetric, PruneSpec, TopologySlice,
};
use crate::spectral::eigendecompose;

/// An estimate is flagged as diverged once `||x|| > DIVERGENCE_FACTOR * (1 + max ||y||)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Noisy observations `y[t] = M[t](x[t] + eta[t])` with their masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStream {
    y: DMatrix<f64>,
    mask: Vec<bool>,
}

impl ObservationStream {
    /// `y` is T x N and `mask` row-major T x N. Unobserved entries of `y` are zeroed.
    pub fn new(mut y: DMatrix<f64>, mask: Vec<bool>) -> Result<Self> {
        let (t_len, n) = y.shape();
        if t_len == 0 || n == 0 {
            return Err(Error::EmptyInput("observation stream has no samples".into()));
        }
        if mask.len() != t_len * n {
            return Err(Error::dim("observation mask", t_len * n, mask.len()));
        }
        for t in 0..t_len {
            for i in 0..n {
                if !mask[t * n + i] {
                    y[(t, i)] = 0.0;
                }
            }
        }
        Ok(ObservationStream { y, mask })
    }

    /// Every node observed without noise.
    pub fn fully_observed(series: &NodeSignalSeries) -> Self {
        let (t_len, n) = series.values().shape();
        ObservationStream {
            y: series.values().clone(),
            mask: vec![true; t_len * n],
        }
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }

    pub fn node_count(&self) -> usize {
        self.y.ncols()
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn y(&self, t: usize) -> DVector<f64> {
        self.y.row(t).transpose()
    }

    pub fn mask(&self, t: usize) -> &[bool] {
        let n = self.node_count();
        &self.mask[t * n..(t + 1) * n]
    }

    /// Steps `range` of the stream.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > self.len() {
            return Err(Error::OutOfRange {
                context: "observation slice",
                index: range.end,
                len: self.len(),
            });
        }
        let n = self.node_count();
        Ok(ObservationStream {
            y: self.y.rows_range(range.clone()).into_owned(),
            mask: self.mask[range.start * n..range.end * n].to_vec(),
        })
    }

    pub fn observed_fraction(&self) -> f64 {
        self.mask.iter().filter(|m| **m).count() as f64 / self.mask.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepSizeRule {
    Fixed { mu: f64 },
    ResidualAdaptive { mu_min: f64, mu_max: f64 },
}

impl StepSizeRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSizeRule::Fixed { mu } if mu > 0.0 && mu.is_finite() => Ok(()),
            StepSizeRule::ResidualAdaptive { mu_min, mu_max }
                if mu_min > 0.0 && mu_min <= mu_max && mu_max.is_finite() =>
            {
                Ok(())
            }
            other => Err(Error::InvalidParameter(format!("invalid step size rule {other:?}"))),
        }
    }
}

pub fn adaptive_mu(residual_norm: f64, rule: &StepSizeRule) -> f64 {
    match *rule {
        StepSizeRule::Fixed { mu } => mu,
        StepSizeRule::ResidualAdaptive { mu_min, mu_max } => (mu_max - mu_min) * (-residual_norm).exp() + mu_min,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Algorithm {
    DynamicMultihop,
    Glms,
    Gdlms,
    Glmp { p: f64 },
    Gsign,
    Gsd,
    SgmThenGlms,
    GlmsThenSgm,
}

impl Algorithm {
    pub const DEFAULT_GLMP_EXPONENT: f64 = 1.5;

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::DynamicMultihop => "dynamic-multihop",
            Algorithm::Glms => "glms",
            Algorithm::Gdlms => "gdlms",
            Algorithm::Glmp { .. } => "glmp",
            Algorithm::Gsign => "gsign",
            Algorithm::Gsd => "gsd",
            Algorithm::SgmThenGlms => "sgm-then-glms",
            Algorithm::GlmsThenSgm => "glms-then-sgm",
        }
    }

    /// Spatial variants that diffuse with `I - eps L` instead of a spectral filter.
    pub fn is_diffusion(&self) -> bool {
        matches!(self, Algorithm::Gdlms | Algorithm::Gsd)
    }

    pub fn is_baseline(&self) -> bool {
        !matches!(self, Algorithm::DynamicMultihop)
    }

    pub fn validate(&self) -> Result<()> {
        if let Algorithm::Glmp { p } = *self {
            if !(p > 1.0 && p <= 2.0) {
                return Err(Error::InvalidParameter(format!("glmp exponent must lie in (1, 2], got {p}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Glmp { p } => write!(f, "glmp:{p}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// Accepts the kebab-case names; `glmp:<p>` sets the exponent.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let algo = match head {
            "dynamic-multihop" | "dmh" => Algorithm::DynamicMultihop,
            "glms" => Algorithm::Glms,
            "gdlms" => Algorithm::Gdlms,
            "glmp" => Algorithm::Glmp {
                p: match arg {
                    Some(a) => a
                        .parse()
                        .map_err(|_| Error::Config(format!("bad glmp exponent '{a}'")))?,
                    None => Self::DEFAULT_GLMP_EXPONENT,
                },
            },
            "gsign" => Algorithm::Gsign,
            "gsd" => Algorithm::Gsd,
            "sgm-then-glms" => Algorithm::SgmThenGlms,
            "glms-then-sgm" => Algorithm::GlmsThenSgm,
            _ => return Err(Error::Config(format!("unknown algorithm '{s}'"))),
        };
        if arg.is_some() && !matches!(algo, Algorithm::Glmp { .. }) {
            return Err(Error::Config(format!("algorithm '{head}' takes no argument")));
        }
        algo.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(algo)
    }
}

/// What the trace reports as the estimate at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// The update operator applied to the internal state.
    #[default]
    Filtered,
    Raw,
}

/// Where the original edges' weights come from during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeWeightSource {
    #[default]
    Windowed,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub algorithm: Algorithm,
    pub filter: FilterSpec,
    pub step: StepSizeRule,
    pub max_hops: usize,
    pub prune: PruneSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub latent_weight: LatentWeightRule,
    #[serde(default)]
    pub edge_weights: EdgeWeightSource,
    /// Defaults to raw for diffusion variants and filtered otherwise.
    #[serde(default)]
    pub readout: Option<Readout>,
    /// `eps` of `I - eps L`; defaults to `1 / lambda_max`.
    #[serde(default)]
    pub diffusion_step: Option<f64>,
    #[serde(default)]
    pub record_topology: bool,
}

impl EstimatorConfig {
    pub fn new(algorithm: Algorithm, filter: FilterSpec, step: StepSizeRule) -> Self {
        EstimatorConfig {
            algorithm,
            filter,
            step,
            max_hops: 1,
            prune: PruneSpec {
                threshold: 0.0,
                metric: Default::default(),
            },
            window: WindowSpec::default(),
            latent_weight: LatentWeightRule::default(),
            edge_weights: EdgeWeightSource::default(),
            readout: None,
            diffusion_step: None,
            record_topology: false,
        }
    }

    pub fn with_hops(mut self, max_hops: usize, prune: PruneSpec) -> Self {
        self.max_hops = max_hops;
        self.prune = prune;
        self
    }

    pub fn with_window(mut self, window: WindowSpec) -> Self {
        self.window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        self.filter.validate()?;
        self.step.validate()?;
        self.prune.validate()?;
        self.window.validate()?;
        if self.max_hops < 1 {
            return Err(Error::InvalidParameter("max hops must be at least 1".into()));
        }
        if let Some(eps) = self.diffusion_step {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::InvalidParameter(format!("diffusion step must be finite and >= 0, got {eps}")));
            }
        }
        Ok(())
    }

    pub fn readout(&self) -> Readout {
        self.readout.unwrap_or(if self.algorithm.is_diffusion() {
            Readout::Raw
        } else {
            Readout::Filtered
        })
    }
}

/// Per-step output of [`run_estimation`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    /// T x N reported estimates.
    pub estimates: DMatrix<f64>,
    /// `||M(y - x)||_2` before each update.
    pub residual_norms: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// Sticky: once set, stays set.
    pub diverged: Vec<bool>,
    /// Edges of the topology used at each step.
    pub edge_counts: Vec<usize>,
    pub topology: Option<DynamicTopology>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub node_count: usize,
    pub residual_norms: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub diverged: Vec<bool>,
    pub edge_counts: Vec<usize>,
}

impl EstimationTrace {
    pub fn len(&self) -> usize {
        self.estimates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.nrows() == 0
    }

    pub fn node_count(&self) -> usize {
        self.estimates.ncols()
    }

    pub fn estimate(&self, t: usize) -> DVector<f64> {
        self.estimates.row(t).transpose()
    }

    pub fn has_diverged(&self) -> bool {
        self.diverged.last().copied().unwrap_or(false)
    }

    /// CSV `t,node,estimate`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "node", "estimate"])?;
        for t in 0..self.len() {
            for i in 0..self.node_count() {
                wr.write_record([t.to_string(), i.to_string(), format!("{:?}", self.estimates[(t, i)])])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            steps: self.len(),
            node_count: self.node_count(),
            residual_norms: self.residual_norms.clone(),
            step_sizes: self.step_sizes.clone(),
            diverged: self.diverged.clone(),
            edge_counts: self.edge_counts.clone(),
        }
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}

/// A linear map applied to the (transformed) masked residual.
pub trait UpdateOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
}

impl UpdateOperator for BoundFilter {
    fn dim(&self) -> usize {
        BoundFilter::dim(self)
    }

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        BoundFilter::apply(self, x)
    }
}

/// `I - eps L`.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    laplacian: DenseSymMatrix,
    epsilon: f64,
}

impl DiffusionOperator {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl UpdateOperator for DiffusionOperator {
    fn dim(&self) -> usize {
        self.laplacian.dim()
    }

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let lx = self.laplacian.mul_vec(x)?;
        Ok(x - lx * self.epsilon)
    }
}

/// Warns when `eps` is outside `[0, 2 / lambda_max)`.
pub fn diffusion_operator(l: &DenseSymMatrix, epsilon: f64) -> Result<DiffusionOperator> {
    let lambda_max = eigendecompose(l)?.lambda_max();
    if epsilon < 0.0 || (lambda_max > 0.0 && epsilon >= 2.0 / lambda_max) {
        warn!("diffusion step {epsilon} is outside [0, 2/lambda_max) = [0, {})", 2.0 / lambda_max);
    }
    Ok(DiffusionOperator {
        laplacian: l.clone(),
        epsilon,
    })
}

pub fn error_nonlinearity(e: &DVector<f64>, algorithm: &Algorithm) -> DVector<f64> {
    match *algorithm {
        Algorithm::Glmp { p } => e.map(|v| v.signum() * v.abs().powf(p - 1.0) * f64::from(v != 0.0)),
        Algorithm::Gsign | Algorithm::Gsd => e.map(|v| if v == 0.0 { 0.0 } else { v.signum() }),
        _ => e.clone(),
    }
}

fn masked_residual(x_hat: &DVector<f64>, y: &DVector<f64>, mask: &[bool]) -> Result<DVector<f64>> {
    if x_hat.len() != y.len() {
        return Err(Error::dim("observation", x_hat.len(), y.len()));
    }
    if mask.len() != y.len() {
        return Err(Error::dim("mask", y.len(), mask.len()));
    }
    Ok(DVector::from_iterator(
        y.len(),
        (0..y.len()).map(|i| if mask[i] { y[i] - x_hat[i] } else { 0.0 }),
    ))
}

/// `x + mu C M(y - x)`.
pub fn lms_step(
    x_hat: &DVector<f64>,
    y: &DVector<f64>,
    mask: &[bool],
    op: &dyn UpdateOperator,
    mu: f64,
) -> Result<DVector<f64>> {
    let r = masked_residual(x_hat, y, mask)?;
    if op.dim() != r.len() {
        return Err(Error::dim("update operator", r.len(), op.dim()));
    }
    Ok(x_hat + op.apply(&r)? * mu)
}

/// Worst-case mask used when evaluating the stability bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum MaskPolicy {
    #[default]
    Full,
    /// Every node observed with the given probability.
    Expected { observed_fraction: f64 },
}

/// `2 / lambda_max((U Sigma)^T M (U Sigma))`, `+inf` when that eigenvalue is zero.
pub fn stability_bound(l: &DenseSymMatrix, filter: &FilterSpec, policy: &MaskPolicy) -> Result<f64> {
    let bound = BoundFilter::bind(l, filter)?;
    let (d, h) = bound.spectral_response()?;
    let n = d.dim();
    let mut us = d.eigenvectors().clone();
    for (k, hk) in h.iter().enumerate() {
        us.column_mut(k).scale_mut(*hk);
    }
    let m = match *policy {
        MaskPolicy::Full => 1.0,
        MaskPolicy::Expected { observed_fraction } => {
            if !(0.0..=1.0).contains(&observed_fraction) {
                return Err(Error::InvalidParameter(format!(
                    "observed fraction must lie in [0, 1], got {observed_fraction}"
                )));
            }
            observed_fraction
        }
    };
    let op = DenseSymMatrix::from_matrix(us.tr_mul(&us) * m)?;
    let lambda_max = if n == 0 { 0.0 } else { eigendecompose(&op)?.lambda_max() };
    if lambda_max <= 1e-300 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 / lambda_max)
}

/// Binds the update operator for one topology.
fn bind_operator(g: &StaticGraph, cfg: &EstimatorConfig) -> Result<Box<dyn UpdateOperator>> {
    let l = build_laplacian(g);
    if cfg.algorithm.is_diffusion() {
        let eps = match cfg.diffusion_step {
            Some(e) => e,
            None => {
                let lm = eigendecompose(&l)?.lambda_max();
                if lm > 0.0 {
                    1.0 / lm
                } else {
                    0.0
                }
            }
        };
        Ok(Box::new(diffusion_operator(&l, eps)?))
    } else {
        Ok(Box::new(BoundFilter::bind(&l, &cfg.filter)?))
    }
}

/// Rows of recent signals feeding the correlation window.
struct History {
    rows: Vec<DVector<f64>>,
    window: usize,
}

impl History {
    fn new(prefix: Option<&NodeSignalSeries>, window: usize) -> Self {
        let rows = match prefix {
            Some(p) => {
                let start = p.len().saturating_sub(window);
                (start..p.len()).map(|t| p.at(t)).collect()
            }
            None => Vec::new(),
        };
        History { rows, window }
    }

    fn push(&mut self, row: DVector<f64>) {
        self.rows.push(row);
        if self.rows.len() > self.window {
            self.rows.remove(0);
        }
    }

    /// Node columns over the last full window, if there is one.
    fn columns(&self, n: usize) -> Option<Vec<Vec<f64>>> {
        if self.rows.len() < self.window {
            return None;
        }
        Some((0..n).map(|i| self.rows.iter().map(|r| r[i]).collect()).collect())
    }
}

fn correlation_topology(n: usize, cols: &[Vec<f64>], threshold: f64) -> Result<StaticGraph> {
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let c = abs_pearson(&cols[i], &cols[j]);
            if c > threshold {
                edges.push((i, j));
                weights.push(c);
            }
        }
    }
    StaticGraph::new(n, edges, weights)
}

/// Online estimation over `stream`. `history` holds signal rows preceding the
/// stream (typically ground truth before the test split) that seed the
/// correlation window.
pub fn run_estimation(
    stream: &ObservationStream,
    g: &StaticGraph,
    cfg: &EstimatorConfig,
    history: Option<&NodeSignalSeries>,
) -> Result<EstimationTrace> {
    cfg.validate()?;
    let n = g.node_count();
    if stream.is_empty() {
        return Err(Error::EmptyInput("observation stream".into()));
    }
    if stream.node_count() != n {
        return Err(Error::dim("stream nodes vs graph", n, stream.node_count()));
    }
    if let Some(h) = history {
        if h.node_count() != n {
            return Err(Error::dim("history nodes vs graph", n, h.node_count()));
        }
    }
    let t_len = stream.len();
    let readout = cfg.readout();
    let dynamic = matches!(
        cfg.algorithm,
        Algorithm::DynamicMultihop | Algorithm::SgmThenGlms | Algorithm::GlmsThenSgm
    );
    let hop_cfg = HopConfig {
        max_hops: cfg.max_hops,
        prune: cfg.prune,
        latent_weight: cfg.latent_weight,
    };

    let mut hist = History::new(history, cfg.window.window);
    let mut x_hat = DVector::zeros(n);
    let mut estimates = DMatrix::zeros(t_len, n);
    let mut residual_norms = Vec::with_capacity(t_len);
    let mut step_sizes = Vec::with_capacity(t_len);
    let mut diverged = Vec::with_capacity(t_len);
    let mut edge_counts = Vec::with_capacity(t_len);
    let mut slices = Vec::new();
    let mut flagged = false;
    let mut y_scale: f64 = 0.0;

    let mut current: TopologySlice = TopologySlice::original(g);
    let mut op: Box<dyn UpdateOperator> = bind_operator(g, cfg)?;
    let mut weights_t: Vec<f64> = g.weights().to_vec();

    for t in 0..t_len {
        if dynamic && t % cfg.window.stride == 0 {
            let cols = hist.columns(n);
            let next = match cfg.algorithm {
                Algorithm::DynamicMultihop => {
                    if cfg.edge_weights == EdgeWeightSource::Windowed {
                        weights_t = match &cols {
                            Some(c) => g.edges().iter().map(|e| abs_pearson(&c[e.lo], &c[e.hi])).collect(),
                            None => g.weights().to_vec(),
                        };
                    }
                    let corr_fn = cols
                        .as_ref()
                        .map(|c| move |e: Edge| abs_pearson(&c[e.lo], &c[e.hi]));
                    let corr_ref: Option<&dyn Fn(Edge) -> f64> = corr_fn.as_ref().map(|f| f as &dyn Fn(Edge) -> f64);
                    let needs_corr = cfg.prune.metric == PruneMetric::WindowedCorrelation
                        || cfg.latent_weight == LatentWeightRule::EndpointCorrelation;
                    if needs_corr && cols.is_none() {
                        // Correlation-based rules need a full window; until then keep the original graph.
                        TopologySlice::original(&g.reweighted(weights_t.clone())?)
                    } else {
                        topology_step(g, &weights_t, &hop_cfg, t, corr_ref)?
                    }
                }
                _ => match &cols {
                    Some(c) => {
                        let sg = correlation_topology(n, c, cfg.prune.threshold)?;
                        let k = sg.edge_count();
                        TopologySlice {
                            graph: sg,
                            provenance: vec![Provenance::Original; k],
                        }
                    }
                    None => TopologySlice::original(g),
                },
            };
            if next != current {
                op = bind_operator(&next.graph, cfg)?;
                current = next;
            }
        }

        let y = stream.y(t);
        let mask = stream.mask(t);
        y_scale = y_scale.max(y.norm());
        let r = masked_residual(&x_hat, &y, mask)?;
        let rn = r.norm();
        let mu = adaptive_mu(rn, &cfg.step);
        let g_r = error_nonlinearity(&r, &cfg.algorithm);
        x_hat = &x_hat + op.apply(&g_r)? * mu;

        let reported = match readout {
            Readout::Filtered => op.apply(&x_hat)?,
            Readout::Raw => x_hat.clone(),
        };
        if !flagged && (x_hat.iter().any(|v| !v.is_finite()) || x_hat.norm() > DIVERGENCE_FACTOR * (1.0 + y_scale)) {
            warn!("{} diverged at step {t}", cfg.algorithm);
            flagged = true;
        }
        estimates.set_row(t, &reported.transpose());
        residual_norms.push(rn);
        step_sizes.push(mu);
        diverged.push(flagged);
        edge_counts.push(current.graph.edge_count());
        if cfg.record_topology {
            slices.push(current.clone());
        }

        match cfg.algorithm {
            Algorithm::SgmThenGlms => hist.push(y),
            _ => hist.push(reported),
        }
    }

    Ok(EstimationTrace {
        estimates,
        residual_norms,
        step_sizes,
        diverged,
        edge_counts,
        topology: cfg.record_topology.then_some(DynamicTopology { slices }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::gft;

    fn triangle() -> StaticGraph {
        StaticGraph::unweighted(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn adaptive_mu_examples() {
        let rule = StepSizeRule::ResidualAdaptive { mu_min: 0.8, mu_max: 3.5 };
        assert_eq!(adaptive_mu(0.0, &rule), 3.5);
        assert!((adaptive_mu(1e6, &rule) - 0.8).abs() < 1e-15);
        assert!((adaptive_mu(1.0, &rule) - (0.8 + 2.7 * (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(adaptive_mu(7.0, &StepSizeRule::Fixed { mu: 0.9 }), 0.9);
    }

    #[test]
    fn step_rule_validation() {
        assert!(StepSizeRule::Fixed { mu: 0.0 }.validate().is_err());
        assert!(StepSizeRule::ResidualAdaptive { mu_min: 2.0, mu_max: 1.0 }.validate().is_err());
        assert!(StepSizeRule::ResidualAdaptive { mu_min: 1.0, mu_max: 1.0 }.validate().is_ok());
    }

    #[test]
    fn nonlinearities() {
        let e = DVector::from_vec(vec![-3.0, 0.0, 2.0]);
        assert_eq!(error_nonlinearity(&e, &Algorithm::Gsign).as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(error_nonlinearity(&e, &Algorithm::Glms), e);
        let four = DVector::from_vec(vec![4.0, -4.0, 0.0]);
        let out = error_nonlinearity(&four, &Algorithm::Glmp { p: 1.5 });
        assert_eq!(out.as_slice(), &[2.0, -2.0, 0.0]);
        let zero = DVector::zeros(3);
        for a in [Algorithm::Glms, Algorithm::Gdlms, Algorithm::Glmp { p: 1.2 }, Algorithm::Gsd] {
            assert_eq!(error_nonlinearity(&zero, &a), zero);
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for s in ["dynamic-multihop", "glms", "gdlms", "gsign", "gsd", "sgm-then-glms", "glms-then-sgm"] {
            assert_eq!(s.parse::<Algorithm>().unwrap().to_string(), s);
        }
        assert_eq!("glmp:1.2".parse::<Algorithm>().unwrap(), Algorithm::Glmp { p: 1.2 });
        assert!("glmp:2.5".parse::<Algorithm>().is_err());
        assert!("glms:1".parse::<Algorithm>().is_err());
        assert!("nope".parse::<Algorithm>().is_err());
    }

    #[test]
    fn diffusion_matches_formula() {
        let l = build_laplacian(&triangle());
        let x = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let op = diffusion_operator(&l, 0.2).unwrap();
        let expect = &x - l.matrix() * &x * 0.2;
        assert!((op.apply(&x).unwrap() - expect).norm() < 1e-15);
        let c = DVector::from_element(3, 4.0);
        assert!((op.apply(&c).unwrap() - &c).norm() < 1e-14);
        let id = diffusion_operator(&l, 0.0).unwrap();
        assert_eq!(id.apply(&x).unwrap(), x);
    }

    #[test]
    fn lms_step_fixed_points() {
        let l = build_laplacian(&triangle());
        let f = BoundFilter::bind(&l, &FilterSpec::ideal_low_pass(1.0).unwrap()).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![5.0, 2.0, 3.0]);
        let mask = [true, true, true];
        assert_eq!(lms_step(&x, &x, &mask, &f, 0.7).unwrap(), x);
        assert_eq!(lms_step(&x, &y, &mask, &f, 0.0).unwrap(), x);
        // Masked-out disagreement has no effect.
        let out = lms_step(&x, &y, &[false, true, true], &f, 1.0).unwrap();
        assert!((out - &x).norm() < 1e-14);
    }

    #[test]
    fn bound_examples() {
        let l = build_laplacian(&triangle());
        let id = FilterSpec::ideal_low_pass(1.0).unwrap();
        assert!((stability_bound(&l, &id, &MaskPolicy::Full).unwrap() - 2.0).abs() < 1e-12);
        let empty = MaskPolicy::Expected { observed_fraction: 0.0 };
        assert_eq!(stability_bound(&l, &id, &empty).unwrap(), f64::INFINITY);
        let half = MaskPolicy::Expected { observed_fraction: 0.5 };
        assert!((stability_bound(&l, &id, &half).unwrap() - 4.0).abs() < 1e-12);
    }

    fn bandlimited_constant(g: &StaticGraph, rho: f64, steps: usize) -> (NodeSignalSeries, DVector<f64>) {
        let l = build_laplacian(g);
        let d = eigendecompose(&l).unwrap();
        let spec = FilterSpec::ideal_low_pass(rho).unwrap();
        let raw = DVector::from_fn(g.node_count(), |i, _| 1.0 + (i as f64 * 0.7).sin());
        let x = BoundFilter::ideal_from_decomposition(d.clone(), &spec).apply(&raw).unwrap();
        let s = gft(&x, &d).unwrap();
        assert!(s.norm() > 0.0);
        let rows = DMatrix::from_fn(steps, g.node_count(), |_, i| x[i]);
        (NodeSignalSeries::new(rows).unwrap(), x)
    }

    fn path(n: usize) -> StaticGraph {
        StaticGraph::unweighted(n, (1..n).map(|i| (i - 1, i)).collect()).unwrap()
    }

    #[test]
    fn converges_and_diverges_around_bound() {
        let g = path(8);
        let spec = FilterSpec::ideal_low_pass(0.4).unwrap();
        let (series, x) = bandlimited_constant(&g, 0.4, 200);
        let bound = stability_bound(&build_laplacian(&g), &spec, &MaskPolicy::Full).unwrap();
        let stream = ObservationStream::fully_observed(&series);
        let ok = EstimatorConfig::new(Algorithm::Glms, spec.clone(), StepSizeRule::Fixed { mu: 0.5 * bound });
        let tr = run_estimation(&stream, &g, &ok, None).unwrap();
        assert!((tr.estimate(199) - &x).norm() < 1e-6);
        assert!(!tr.has_diverged());
        let bad = EstimatorConfig::new(Algorithm::Glms, spec, StepSizeRule::Fixed { mu: 1.5 * bound });
        assert!(run_estimation(&stream, &g, &bad, None).unwrap().has_diverged());
    }

    #[test]
    fn diffusion_variant_tracks_constant() {
        let g = path(5);
        let rows = DMatrix::from_element(300, 5, 2.0);
        let stream = ObservationStream::fully_observed(&NodeSignalSeries::new(rows).unwrap());
        let cfg = EstimatorConfig::new(
            Algorithm::Gdlms,
            FilterSpec::ideal_low_pass(0.4).unwrap(),
            StepSizeRule::Fixed { mu: 0.5 },
        );
        let tr = run_estimation(&stream, &g, &cfg, None).unwrap();
        assert!((tr.estimate(299) - DVector::from_element(5, 2.0)).norm() < 1e-6);
    }

    #[test]
    fn masked_entries_are_zeroed() {
        let y = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let s = ObservationStream::new(y, vec![true, false]).unwrap();
        assert_eq!(s.y(0).as_slice(), &[3.0, 0.0]);
        assert_eq!(s.observed_fraction(), 0.5);
        assert!(ObservationStream::new(DMatrix::zeros(1, 2), vec![true]).is_err());
    }

    #[test]
    fn trace_exports() {
        let g = path(3);
        let rows = DMatrix::from_element(4, 3, 1.0);
        let stream = ObservationStream::fully_observed(&NodeSignalSeries::new(rows).unwrap());
        let cfg = EstimatorConfig::new(Algorithm::Glms, FilterSpec::ideal_low_pass(1.0).unwrap(), StepSizeRule::Fixed { mu: 1.0 });
        let tr = run_estimation(&stream, &g, &cfg, None).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 12);
        let js: TraceSummary = serde_json::from_str(&tr.summary_json().unwrap()).unwrap();
        assert_eq!(js.edge_counts, vec![2; 4]);
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let cfg = EstimatorConfig::new(Algorithm::Glmp { p: 1.5 }, FilterSpec::ideal_low_pass(0.4).unwrap(), StepSizeRule::Fixed { mu: 0.9 });
        let js = serde_json::to_string(&cfg).unwrap();
        let back: EstimatorConfig = serde_json::from_str(&js).unwrap();
        assert_eq!(back, cfg);
        let bad = js.replacen('{', "{\"bogus\":1,", 1);
        assert!(serde_json::from_str::<EstimatorConfig>(&bad).is_err());
    }
}
