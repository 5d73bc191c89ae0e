//! Dynamic multi-hop graph topologies and online estimation of time-varying
//! graph signals from noisy, partially observed samples.

pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod filter;
pub mod graph;
pub mod harness;
pub mod multihop;
pub mod spectral;

pub use dynamics::{
    abs_pearson, edge_weight_series, sliding_abs_correlation, time_varying_laplacian, EdgeWeightSeries,
    NodeSignalSeries, WindowSpec,
};
pub use error::{Error, Result};
pub use estimate::{
    adaptive_mu, diffusion_operator, error_nonlinearity, lms_step, run_estimation, stability_bound, Algorithm,
    EdgeWeightSource, EstimationTrace, EstimatorConfig, MaskPolicy, ObservationStream, Readout, StepSizeRule,
};
pub use filter::{apply_edge_filter, apply_filter, fit_chebyshev, BoundFilter, FilterKind, FilterSpec};
pub use graph::{build_laplacian, hodge1_laplacian, incidence, DenseSymMatrix, Edge, IncidenceMatrix, StaticGraph};
pub use multihop::{
    build_dynamic_topology, hop_expand, merge, normalize_laplacian, prune, DynamicTopology, HopCandidateSet,
    HopConfig, LatentWeightRule, Provenance, PruneMetric, PruneSpec, TopologySlice,
};
pub use spectral::{eigendecompose, gft, igft, SpectralDecomposition};
