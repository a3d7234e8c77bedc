//! `topsel`: fit propagation models, evaluate the max-value rule's error
//! probability, run experiment specs and check trace logs.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 bad usage or
//! invalid input.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use topsel::ingest::{build_fit_dataset, parse_traces, IngestConfig};
use topsel::maxsel::{empirical_error, error_prob_corollary1, error_prob_theorem1, ErrorProbReport, TopPProblem};
use topsel::seed::derive_seed;
use topsel::sim::{parse_override, run_experiment, ExperimentSpec, Manifest, DEFAULT_SEED};
use topsel::{fit_log_linear, fit_spline, DeploymentMap, Error, HypothesisGrid, PropagationModel, Result, SensorModel};

#[derive(Parser, Debug)]
#[command(name = "topsel", version, about = "Top-p sensor selection for RSS localization")]
struct Cli {
    /// Root seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "TOPSEL_THREADS")]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit per-sensor propagation models from trace logs.
    Fit(FitArgs),
    /// Error probability of the normalized max-value rule over a p range.
    Errorprob(ErrorProbArgs),
    /// Run an experiment spec and write its result table and manifest.
    Run(RunArgs),
    /// Align trace logs and report what would be dropped.
    IngestCheck(TraceArgs),
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// RSS log (timestamp_ms,sensor_id,rss).
    #[arg(long)]
    traces: PathBuf,
    /// Ground-truth log (timestamp_ms,target_id,x,y).
    #[arg(long)]
    truth: PathBuf,
    /// Deployment map JSON.
    #[arg(long)]
    deploy: PathBuf,
    /// Alignment bucket width.
    #[arg(long, default_value_t = 200)]
    bucket_ms: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelKind {
    Loglinear,
    Spline,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    traces: TraceArgs,
    #[arg(long, value_enum, default_value = "loglinear")]
    model: ModelKind,
    /// Distance bins for spline models.
    #[arg(long, default_value_t = 8)]
    bins: usize,
    /// Where to write the fitted model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Quadrature,
    OrthantMc,
    Empirical,
    /// Quadrature and orthant Monte Carlo, one row each.
    Both,
}

#[derive(Args, Debug)]
struct ErrorProbArgs {
    /// Deployment map JSON.
    #[arg(long)]
    deploy: PathBuf,
    /// Normalized noise std dev: one value for all sensors or a comma list.
    #[arg(
        long,
        value_delimiter = ',',
        required_unless_present = "model",
        conflicts_with = "model"
    )]
    sigma: Vec<f64>,
    /// Take per-sensor normalized noise from a fitted log-linear model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Selection sizes: `a..b` (inclusive) or a single value.
    #[arg(long, default_value = "1")]
    p: String,
    /// Hypothesis grid covering the deployment area, `ROWSxCOLS`.
    #[arg(long, default_value = "20x20")]
    grid: String,
    #[arg(long, value_enum, default_value = "quadrature")]
    method: MethodArg,
    /// Monte Carlo draws per estimate.
    #[arg(long, default_value_t = 1_000_000)]
    n_mc: u64,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for results.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Spec override `dotted.key=value` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_p_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parameter(format!("--p `{s}` is not a positive value or range a..b"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parameter(format!("--grid `{s}` is not of the form ROWSxCOLS"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let t = &a.traces;
    let map = DeploymentMap::load(&t.deploy)?;
    let aligned = parse_traces(&t.traces, &t.truth, &map, IngestConfig { bucket_ms: t.bucket_ms })?;
    let mut entries = Vec::with_capacity(map.len());
    let mut stdout = io::stdout().lock();
    let w = &mut stdout;
    let wr = |e: io::Error| Error::Io {
        path: "<stdout>".into(),
        source: e,
    };
    for i in 0..map.len() {
        let data = build_fit_dataset(&aligned.frames, &map, i)?;
        let ctx = |e: Error| e.context(format!("sensor {i}"));
        let entry: SensorModel = match a.model {
            ModelKind::Loglinear => {
                let m = fit_log_linear(&data).map_err(ctx)?;
                writeln!(
                    w,
                    "sensor {i}: p0 {:.3} dB, eta {:.3}, sigma {:.3} dB ({} samples)",
                    m.p0(),
                    m.eta(),
                    m.sigma(),
                    data.len()
                )
                .map_err(wr)?;
                m.into()
            }
            ModelKind::Spline => {
                let m = fit_spline(&data, a.bins).map_err(ctx)?;
                let eta: Vec<String> = m.eta().iter().map(|e| format!("{e:.2}")).collect();
                let sd: Vec<String> = m.sigma2().iter().map(|v| format!("{:.2}", v.sqrt())).collect();
                writeln!(
                    w,
                    "sensor {i}: {} bins, eta [{}], sigma [{}] dB ({} samples)",
                    m.bins(),
                    eta.join(" "),
                    sd.join(" "),
                    data.len()
                )
                .map_err(wr)?;
                m.into()
            }
        };
        entries.push(entry);
    }
    PropagationModel::new(entries)?.save(&a.out)?;
    log::info!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_errorprob(a: &ErrorProbArgs, seed: u64) -> Result<()> {
    let ps = parse_p_range(&a.p)?;
    let (rows, cols) = parse_grid(&a.grid)?;
    let map = DeploymentMap::load(&a.deploy)?;
    let sigma = match &a.model {
        Some(path) => PropagationModel::load(path)?.sigma_tilde()?,
        None if a.sigma.len() == 1 => vec![a.sigma[0]; map.len()],
        None => a.sigma.clone(),
    };
    let grid = HypothesisGrid::covering(map.area(), rows, cols)?;
    let base = TopPProblem::new(map, grid, sigma, ps[0])?;

    let mut out = output(a.out.as_deref())?;
    let dest = a.out.clone().unwrap_or_else(|| "<stdout>".into());
    let wr = |e: io::Error| Error::Io {
        path: dest.clone(),
        source: e,
    };
    writeln!(out, "p,p_error,uncertainty,method").map_err(wr)?;
    for &p in &ps {
        let pr = base.with_p(p)?;
        let mc_seed = derive_seed(seed, p as u64);
        let reports: Vec<ErrorProbReport> = match a.method {
            MethodArg::Quadrature => vec![error_prob_corollary1(&pr)?],
            MethodArg::OrthantMc => vec![error_prob_theorem1(&pr, a.n_mc, mc_seed)?],
            MethodArg::Empirical => vec![empirical_error(&pr, a.n_mc, mc_seed)?],
            MethodArg::Both => vec![error_prob_corollary1(&pr)?, error_prob_theorem1(&pr, a.n_mc, mc_seed)?],
        };
        for r in reports {
            writeln!(out, "{p},{},{},{}", r.p_error, r.uncertainty, r.method.as_str()).map_err(wr)?;
        }
    }
    out.flush().map_err(wr)
}

fn cmd_run(a: &RunArgs, seed: Option<u64>) -> Result<()> {
    let mut overrides = a
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let spec = ExperimentSpec::load(&a.spec, &overrides)?;
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let table = run_experiment(&spec)?;

    let csv_path = a.out.join("results.csv");
    let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
    table.write_csv(BufWriter::new(file))?;
    let manifest = Manifest::new(&spec, &table)?;
    let man_path = a.out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&man_path, text).map_err(io_err(&man_path))?;
    eprintln!("{} rows -> {}", table.rows.len(), csv_path.display());
    Ok(())
}

fn cmd_ingest_check(a: &TraceArgs) -> Result<()> {
    let map = DeploymentMap::load(&a.deploy)?;
    let aligned = parse_traces(&a.traces, &a.truth, &map, IngestConfig { bucket_ms: a.bucket_ms })?;
    let r = aligned.report;
    println!("targets: {}", aligned.targets);
    println!("buckets: {}", r.total_buckets);
    println!("frames: {}", r.emitted);
    println!("dropped (incomplete): {}", r.incomplete);
    println!("dropped (missing truth): {}", r.missing_truth);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Parameter("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Errorprob(a) => cmd_errorprob(a, cli.seed.unwrap_or(DEFAULT_SEED)),
        Command::Run(a) => cmd_run(a, cli.seed),
        Command::IngestCheck(a) => cmd_ingest_check(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
