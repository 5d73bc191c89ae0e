//! Experiment orchestration: data preparation, Monte-Carlo runs and aggregation.

use std::ops::Range;
use std::path::PathBuf;
use std::thread;

use log::info;
use serde::{Deserialize, Serialize};

use crate::dynamics::{abs_pearson, NodeSignalSeries, WindowSpec};
use crate::error::{Error, Result};
use crate::estimate::{run_estimation, Algorithm, EstimationTrace, EstimatorConfig, StepSizeRule};
use crate::filter::FilterSpec;
use crate::graph::StaticGraph;
use crate::harness::dataset::{ingest_csv, normalize_by_train_mean, DataSource, DatasetSpec, Splits};
use crate::harness::graph_build::{build_initial_graph, GraphBuildSpec};
use crate::harness::metrics::{degree_from_counts, mse_curve, tail_mean};
use crate::harness::simulate::{node_variances, simulate_observations, NoiseMaskSpec};
use crate::harness::synth::{make_synthetic_dataset, SyntheticSpec};
use crate::multihop::PruneSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmRun {
    #[serde(default)]
    pub label: Option<String>,
    pub estimator: EstimatorConfig,
}

impl AlgorithmRun {
    pub fn new(estimator: EstimatorConfig) -> Self {
        AlgorithmRun { label: None, estimator }
    }

    pub fn labeled(label: &str, estimator: EstimatorConfig) -> Self {
        AlgorithmRun {
            label: Some(label.to_string()),
            estimator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub graph: GraphBuildSpec,
    pub noise: NoiseMaskSpec,
    pub algorithms: Vec<AlgorithmRun>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.noise.validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms configured".into()));
        }
        for a in &self.algorithms {
            a.estimator
                .validate()
                .map_err(|e| Error::Config(format!("{}: {e}", a.estimator.algorithm)))?;
        }
        if let DataSource::Synthetic(s) = &self.dataset.source {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Unique report labels in configuration order.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::with_capacity(self.algorithms.len());
        for a in &self.algorithms {
            let base = a.label.clone().unwrap_or_else(|| a.estimator.algorithm.name().to_string());
            let mut label = base.clone();
            let mut k = 2;
            while out.contains(&label) {
                label = format!("{base}-{k}");
                k += 1;
            }
            out.push(label);
        }
        out
    }
}

/// Normalized series, initial graph and splits shared by every run.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub series: NodeSignalSeries,
    pub graph: StaticGraph,
    pub splits: Splits,
    /// Train-split variance of each node, which sets the noise level.
    pub variances: Vec<f64>,
}

/// Edge weights `|corr|` over `range` on a fixed edge set.
pub fn train_correlation_weights(g: &StaticGraph, series: &NodeSignalSeries, range: Range<usize>) -> Result<StaticGraph> {
    let train = series.slice(range.start, range.end)?;
    let cols: Vec<Vec<f64>> = (0..train.node_count()).map(|i| train.node(i)).collect();
    g.reweighted(g.edges().iter().map(|e| abs_pearson(&cols[e.lo], &cols[e.hi])).collect())
}

pub fn prepare(dataset: &DatasetSpec, build: &GraphBuildSpec) -> Result<PreparedData> {
    let (raw, base) = match &dataset.source {
        DataSource::Csv { path } => (ingest_csv(path)?, None),
        DataSource::Synthetic(spec) => {
            let d = make_synthetic_dataset(spec)?;
            (d.series, Some(d.graph))
        }
    };
    let splits = dataset.splits.clone().unwrap_or_else(|| Splits::short_series(raw.len()));
    splits.validate(raw.len())?;
    let series = if dataset.normalize {
        normalize_by_train_mean(&raw, &splits)?
    } else {
        raw
    };
    let graph = match base {
        Some(g) => train_correlation_weights(&g, &series, splits.train.clone())?,
        None => build_initial_graph(&series.slice(splits.train.start, splits.train.end)?, build)?,
    };
    let variances = node_variances(&series, splits.train.clone())?;
    Ok(PreparedData {
        series,
        graph,
        splits,
        variances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmMetrics {
    pub label: String,
    pub algorithm: String,
    pub reference_baseline: bool,
    pub mse: Vec<f64>,
    pub avg_degree: Vec<f64>,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Absolute time index of each curve entry.
    pub time: Vec<usize>,
    pub node_count: usize,
    pub runs: usize,
    pub algorithms: Vec<AlgorithmMetrics>,
}

impl MetricsReport {
    pub fn get(&self, label: &str) -> Option<&AlgorithmMetrics> {
        self.algorithms.iter().find(|a| a.label == label)
    }

    pub fn all_runs_diverged(&self) -> bool {
        self.algorithms.iter().all(|a| a.diverged_runs == self.runs)
    }
}

fn worker_count(runs: usize) -> usize {
    thread::available_parallelism().map_or(1, |n| n.get()).min(runs).max(1)
}

/// Runs `f(r)` for `r in 0..runs`, possibly in parallel, returning results in run order.
fn for_each_run<T: Send>(runs: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = worker_count(runs);
    let f = &f;
    let chunks: Vec<Result<Vec<T>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w..runs).step_by(workers).map(f).collect::<Result<Vec<T>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("worker thread panicked".into()))))
            .collect()
    });
    let mut per_worker = Vec::with_capacity(workers);
    for c in chunks {
        per_worker.push(c?.into_iter());
    }
    let mut out = Vec::with_capacity(runs);
    for r in 0..runs {
        out.push(per_worker[r % workers].next().expect("every run produced a result"));
    }
    Ok(out)
}

/// `R` runs of every algorithm over `range`, seeding correlation windows with the
/// ground truth that precedes it. Run `r` of every algorithm sees the same observations.
pub fn run_range(
    data: &PreparedData,
    noise: &NoiseMaskSpec,
    algorithms: &[AlgorithmRun],
    labels: &[String],
    range: Range<usize>,
) -> Result<MetricsReport> {
    if range.is_empty() || range.end > data.series.len() {
        return Err(Error::Config(format!("evaluation range {range:?} is empty or exceeds the series")));
    }
    let truth = data.series.slice(range.start, range.end)?;
    let history = if range.start > 0 {
        Some(data.series.slice(0, range.start)?)
    } else {
        None
    };
    let traces: Vec<Vec<EstimationTrace>> = for_each_run(noise.runs, |r| {
        let full = simulate_observations(&data.series, &data.variances, noise, r)?;
        let stream = full.slice(range.clone())?;
        algorithms
            .iter()
            .map(|a| run_estimation(&stream, &data.graph, &a.estimator, history.as_ref()))
            .collect()
    })?;

    let n = data.series.node_count();
    let mut metrics = Vec::with_capacity(algorithms.len());
    for (k, a) in algorithms.iter().enumerate() {
        let est: Vec<_> = traces.iter().map(|run| &run[k].estimates).collect();
        let counts: Vec<&[usize]> = traces.iter().map(|run| run[k].edge_counts.as_slice()).collect();
        let diverged_runs = traces.iter().filter(|run| run[k].has_diverged()).count();
        let m = AlgorithmMetrics {
            label: labels[k].clone(),
            algorithm: a.estimator.algorithm.to_string(),
            reference_baseline: a.estimator.algorithm.is_baseline(),
            mse: mse_curve(&est, truth.values())?,
            avg_degree: degree_from_counts(&counts, n)?,
            diverged_runs,
        };
        info!(
            "{}: final-50 mse {:.4}, {} of {} runs diverged",
            m.label,
            tail_mean(&m.mse, 50),
            diverged_runs,
            noise.runs
        );
        metrics.push(m);
    }
    Ok(MetricsReport {
        time: range.collect(),
        node_count: n,
        runs: noise.runs,
        algorithms: metrics,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let data = prepare(&cfg.dataset, &cfg.graph)?;
    run_range(&data, &cfg.noise, &cfg.algorithms, &cfg.labels(), data.splits.test.clone())
}

/// Mean validation-split MSE of `base` for each fixed step size in `mus`.
pub fn validation_sweep(
    data: &PreparedData,
    noise: &NoiseMaskSpec,
    base: &EstimatorConfig,
    mus: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let range = data.splits.validation.clone();
    let runs: Vec<AlgorithmRun> = mus
        .iter()
        .map(|&mu| {
            AlgorithmRun::new(EstimatorConfig {
                step: StepSizeRule::Fixed { mu },
                ..base.clone()
            })
        })
        .collect();
    let labels: Vec<String> = mus.iter().map(|m| format!("mu={m}")).collect();
    let report = run_range(data, noise, &runs, &labels, range)?;
    Ok(mus
        .iter()
        .zip(&report.algorithms)
        .map(|(&mu, a)| (mu, a.mse.iter().sum::<f64>() / a.mse.len() as f64))
        .collect())
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Synthetic,
    Brain,
    Msci,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Preset::Synthetic),
            "brain" => Ok(Preset::Brain),
            "msci" => Ok(Preset::Msci),
            _ => Err(Error::Config(format!("unknown preset '{s}'"))),
        }
    }
}

fn estimator(algorithm: Algorithm, step: StepSizeRule, hops: usize, tau: f64) -> EstimatorConfig {
    EstimatorConfig::new(algorithm, FilterSpec::ideal_low_pass(0.4).expect("valid passband"), step)
        .with_hops(hops, PruneSpec::new(tau).expect("valid threshold"))
        .with_window(WindowSpec::default())
}

/// The full algorithm line-up: dynamic multi-hop with a residual-adaptive step and
/// every reference baseline at the fixed step `mu`.
pub fn standard_lineup(hops: usize, tau: f64, adaptive: StepSizeRule, mu: f64, sgm_tau: f64) -> Vec<AlgorithmRun> {
    let fixed = StepSizeRule::Fixed { mu };
    let mut out = vec![AlgorithmRun::new(estimator(Algorithm::DynamicMultihop, adaptive, hops, tau))];
    for a in [
        Algorithm::Glms,
        Algorithm::Gdlms,
        Algorithm::Glmp {
            p: Algorithm::DEFAULT_GLMP_EXPONENT,
        },
        Algorithm::Gsign,
        Algorithm::Gsd,
    ] {
        out.push(AlgorithmRun::new(estimator(a, fixed, 1, 0.0)));
    }
    for a in [Algorithm::SgmThenGlms, Algorithm::GlmsThenSgm] {
        out.push(AlgorithmRun::new(estimator(a, fixed, 1, sgm_tau)));
    }
    out
}

impl Preset {
    /// `data` is required for the CSV-backed presets.
    pub fn config(self, data: Option<PathBuf>) -> Result<ExperimentConfig> {
        let csv = |splits: fn(usize) -> Splits| -> Result<DatasetSpec> {
            let path = data
                .clone()
                .ok_or_else(|| Error::Config(format!("preset {self:?} needs a data CSV")))?;
            let len = ingest_csv(&path)?.len();
            Ok(DatasetSpec {
                source: DataSource::Csv { path },
                splits: Some(splits(len)),
                normalize: true,
            })
        };
        let noise = |runs| NoiseMaskSpec {
            snr: 3.0,
            missing_fraction: 0.3,
            seed: 0,
            runs,
        };
        Ok(match self {
            Preset::Synthetic => ExperimentConfig {
                dataset: DatasetSpec {
                    source: DataSource::Synthetic(SyntheticSpec::default()),
                    splits: None,
                    normalize: true,
                },
                graph: GraphBuildSpec::default(),
                noise: noise(20),
                algorithms: standard_lineup(
                    3,
                    0.02,
                    StepSizeRule::ResidualAdaptive { mu_min: 0.8, mu_max: 3.5 },
                    0.9,
                    0.8,
                ),
            },
            Preset::Brain => ExperimentConfig {
                dataset: csv(Splits::short_series)?,
                graph: GraphBuildSpec::default(),
                noise: noise(100),
                algorithms: standard_lineup(
                    6,
                    0.02,
                    StepSizeRule::ResidualAdaptive { mu_min: 0.8, mu_max: 3.5 },
                    0.9,
                    0.8,
                ),
            },
            Preset::Msci => ExperimentConfig {
                dataset: csv(Splits::long_series)?,
                graph: GraphBuildSpec::default(),
                noise: noise(100),
                algorithms: standard_lineup(
                    6,
                    0.02,
                    StepSizeRule::ResidualAdaptive { mu_min: 0.2, mu_max: 0.6 },
                    0.4,
                    0.8,
                ),
            },
        })
    }
}
