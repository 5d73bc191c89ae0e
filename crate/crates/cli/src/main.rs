//! `dynhop` command line: synthetic data, graph building, experiments and report summaries.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynhop::harness::*;
use dynhop::{Algorithm, Error, EstimatorConfig, FilterSpec, PruneSpec, StepSizeRule};
use log::info;

#[derive(Parser)]
#[command(name = "dynhop", version, about = "Dynamic multi-hop graph signal estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a regime-switching synthetic series and its graph.
    Synth(SynthArgs),
    /// Build an initial graph from a series CSV.
    BuildGraph(BuildGraphArgs),
    /// Run an experiment and write per-algorithm reports.
    Run(Box<RunArgs>),
    /// Merge report directories into one summary JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthetic dataset spec; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Series CSV, one column per node.
    #[arg(long)]
    data: PathBuf,
    /// JSON graph build spec (`top_k`, `abs_corr_threshold`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use only the first N rows.
    #[arg(long)]
    train_steps: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: synthetic, brain or msci.
    #[arg(long)]
    preset: Option<Preset>,
    /// Series CSV for the brain and msci presets.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Noise and mask seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Linear signal-to-noise power ratio.
    #[arg(long, conflicts_with = "snr_db")]
    snr: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    missing_frac: Option<f64>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Fixed step size for the baselines.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    mu_min: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Restrict to these algorithms (repeatable), e.g. `--algo dmh --algo glms`.
    #[arg(long = "algo")]
    algos: Vec<Algorithm>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directories written by `run`.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Also write `summary.json` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Data(Error),
    Diverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            Error::InvalidParameter(m) => Failure::Config(m),
            Error::Json(e) => Failure::Config(e.to_string()),
            other => Failure::Data(other),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let mut spec: SyntheticSpec = match &args.config {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let d = make_synthetic_dataset(&spec)?;
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;
    write_series(&d.series, create(&args.out_dir.join("series.csv"))?)?;
    d.graph.write_csv(create(&args.out_dir.join("graph.csv"))?)?;
    info!("wrote {} steps on {} nodes to {}", d.series.len(), d.series.node_count(), args.out_dir.display());
    Ok(())
}

fn build_graph(args: BuildGraphArgs) -> Result<(), Failure> {
    let spec: GraphBuildSpec = match &args.config {
        Some(p) => read_json(p)?,
        None => GraphBuildSpec::default(),
    };
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let series = ingest_csv(&args.data)?;
    let train = match args.train_steps {
        Some(k) => series.slice(0, k)?,
        None => series,
    };
    let g = build_initial_graph(&train, &spec)?;
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;
    g.write_csv(create(&args.out_dir.join("graph.csv"))?)?;
    info!("{} edges on {} nodes", g.edge_count(), g.node_count());
    Ok(())
}

fn default_estimator(algorithm: Algorithm) -> EstimatorConfig {
    let filter = FilterSpec::ideal_low_pass(0.4).expect("valid passband");
    match algorithm {
        Algorithm::DynamicMultihop => EstimatorConfig::new(
            algorithm,
            filter,
            StepSizeRule::ResidualAdaptive { mu_min: 0.8, mu_max: 3.5 },
        )
        .with_hops(3, PruneSpec::new(0.02).expect("valid threshold")),
        Algorithm::SgmThenGlms | Algorithm::GlmsThenSgm => EstimatorConfig::new(algorithm, filter, StepSizeRule::Fixed { mu: 0.9 })
            .with_hops(1, PruneSpec::new(0.8).expect("valid threshold")),
        _ => EstimatorConfig::new(algorithm, filter, StepSizeRule::Fixed { mu: 0.9 }),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, a: &RunArgs) -> Result<(), Failure> {
    if let Some(s) = a.seed {
        cfg.noise.seed = s;
    }
    if let Some(s) = a.snr {
        cfg.noise.snr = s;
    }
    if let Some(db) = a.snr_db {
        cfg.noise.snr = NoiseMaskSpec::snr_from_db(db);
    }
    if let Some(m) = a.missing_frac {
        cfg.noise.missing_fraction = m;
    }
    if let Some(r) = a.runs {
        cfg.noise.runs = r;
    }
    if !a.algos.is_empty() {
        let mut picked = Vec::with_capacity(a.algos.len());
        for algo in &a.algos {
            let run = cfg
                .algorithms
                .iter()
                .find(|r| r.estimator.algorithm == *algo)
                .cloned()
                .unwrap_or_else(|| AlgorithmRun::new(default_estimator(*algo)));
            picked.push(run);
        }
        cfg.algorithms = picked;
    }
    for run in &mut cfg.algorithms {
        let e = &mut run.estimator;
        let multihop = e.algorithm == Algorithm::DynamicMultihop;
        if let Some(w) = a.window {
            e.window.window = w;
        }
        if let Some(s) = a.stride {
            e.window.stride = s;
        }
        if multihop {
            if let Some(h) = a.hops {
                e.max_hops = h;
            }
            if let Some(t) = a.tau {
                e.prune.threshold = t;
            }
            if a.mu_min.is_some() || a.mu_max.is_some() {
                let (lo, hi) = match e.step {
                    StepSizeRule::ResidualAdaptive { mu_min, mu_max } => (mu_min, mu_max),
                    StepSizeRule::Fixed { mu } => (mu, mu),
                };
                e.step = StepSizeRule::ResidualAdaptive {
                    mu_min: a.mu_min.unwrap_or(lo),
                    mu_max: a.mu_max.unwrap_or(hi),
                };
            }
        } else if let (Some(mu), StepSizeRule::Fixed { .. }) = (a.mu, e.step) {
            e.step = StepSizeRule::Fixed { mu };
        }
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(p), _) => read_json::<ExperimentConfig>(p)?,
        (None, Some(preset)) => preset.config(args.data.clone())?,
        (None, None) => return Err(Failure::Config("either --config or --preset is required".into())),
    };
    apply_overrides(&mut cfg, &args)?;
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    write_report(&args.out_dir, &report, &cfg)?;
    for a in &report.algorithms {
        info!(
            "{}: final-{} MSE {:.4}, diverged runs {}",
            a.label,
            report::TAIL_STEPS,
            tail_mean(&a.mse, report::TAIL_STEPS),
            a.diverged_runs
        );
    }
    if report.all_runs_diverged() {
        return Err(Failure::Diverged);
    }
    Ok(())
}

fn summarize(args: ReportArgs) -> Result<(), Failure> {
    let summary = summarize_reports(&args.dirs)?;
    let text = serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n";
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(Error::from)?;
        fs::write(dir.join("summary.json"), &text).map_err(Error::from)?;
    }
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::Run(a) => run(*a),
        Command::Report(a) => summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Diverged) => {
            eprintln!("every run of every algorithm diverged");
            ExitCode::from(4)
        }
    }
}
