//! `rbn`: command-line front end for Random Boolean Network attractor
//! experiments.
//!
//! Single-file outputs go to stdout unless `--out` is given, and single-file
//! inputs default to stdin, so the per-network stages compose:
//!
//! ```text
//! rbn simulate --network net.txt --samples 1000 --max-steps 100000 --seed 7 \
//!   | rbn distances --measure min-hamming \
//!   | rbn cluster --out clusters/
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
//! `RBN_WORKERS` sets the worker thread count.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rbn_core::experiment::{cluster_artifacts, summary_table_csv, write_cluster_artifacts};
use rbn_core::{
    critical_bias, distance_matrix, exhaustive_attractors, generate_rbn, pool_distances,
    run_experiment, sample_attractors, seed, summary, AttractorSet, BooleanNetwork, DistanceMatrix,
    ExperimentConfig, GenerationParams, Measure, SearchConfig,
};

const WORKERS_ENV: &str = "RBN_WORKERS";

#[derive(Parser)]
#[command(
    name = "rbn",
    version,
    about = "Random Boolean Network attractor distance toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random Boolean network files
    Generate(GenerateArgs),
    /// Sample the attractors of one network
    Simulate(SimulateArgs),
    /// Distance matrix from an attractor set
    Distances(DistancesArgs),
    /// Clustering coefficients and single-link dendrogram from a distance matrix
    Cluster(ClusterArgs),
    /// Pool distance matrices into a six-number summary and histogram clustering coefficients
    Stats(StatsArgs),
    /// Full ensemble pipeline
    Experiment(ExperimentArgs),
    /// Bias on the order/chaos critical line for in-degree k
    CriticalBias {
        #[arg(long)]
        k: u32,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    bias: f64,
    #[arg(long)]
    seed: u64,
    /// With a count above 1, `--out` is a directory of `net_<i>.txt` files
    /// whose seeds are derived from `--seed`.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Network file (`-` for stdin)
    #[arg(long, default_value = "-")]
    network: PathBuf,
    #[arg(long, required_unless_present = "exhaustive")]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    #[arg(long)]
    memory_cap: Option<usize>,
    /// Seed for drawing initial states
    #[arg(long, required_unless_present = "exhaustive")]
    seed: Option<u64>,
    /// Enumerate all 2^n states instead of sampling (small n only)
    #[arg(long, conflicts_with_all = ["samples", "seed"])]
    exhaustive: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistancesArgs {
    /// Attractor set JSON (`-` for stdin)
    #[arg(long, default_value = "-")]
    attractors: PathBuf,
    #[arg(long)]
    measure: Measure,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Distance matrix CSV (`-` for stdin)
    #[arg(long, default_value = "-")]
    matrix: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Distance matrix CSVs, all of one measure
    #[arg(long, num_args = 1.., required = true)]
    matrices: Vec<PathBuf>,
    /// Clustering report CSVs whose network coefficients are histogrammed
    #[arg(long, num_args = 1..)]
    clustering: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML file with experiment settings; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Repeatable
    #[arg(long = "bias")]
    biases: Vec<f64>,
    #[arg(long)]
    nets: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Repeatable; defaults to all three
    #[arg(long = "measure")]
    measures: Vec<Measure>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            fs::write(p, contents).with_context(|| format!("writing {}", p.display()))
        }
        _ => io::stdout()
            .write_all(contents.as_bytes())
            .context("writing stdout"),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let params = |seed| GenerationParams {
        n: args.n,
        k: args.k,
        bias: args.bias,
        seed,
    };
    if args.count <= 1 {
        let net = generate_rbn(&params(args.seed))?;
        return write_output(args.out.as_deref(), &net.to_text());
    }
    let dir = args
        .out
        .ok_or_else(|| usage("--out <DIR> is required with --count"))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for i in 0..args.count {
        let net = generate_rbn(&params(seed::network_seed(args.seed, 0, i as u32)))?;
        net.save(&dir.join(format!("net_{i:03}.txt")))?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let net = BooleanNetwork::from_text(&read_input(&args.network)?)?;
    let set = if args.exhaustive {
        exhaustive_attractors(&net)?
    } else {
        let cfg = SearchConfig {
            max_steps: args.max_steps,
            memory_cap: args.memory_cap,
        };
        let samples = args.samples.expect("clap enforces --samples");
        let seed = args.seed.expect("clap enforces --seed");
        sample_attractors(&net, samples, &cfg, seed)?
    };
    eprintln!(
        "{} attractors, {} trajectories without one",
        set.len(),
        set.not_found()
    );
    write_output(args.out.as_deref(), &set.to_json())
}

fn distances(args: DistancesArgs) -> Result<()> {
    let set = AttractorSet::from_json(&read_input(&args.attractors)?)?;
    write_output(
        args.out.as_deref(),
        &distance_matrix(&set, args.measure).to_csv(),
    )
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let matrix = DistanceMatrix::from_csv(&read_input(&args.matrix)?)?;
    if matrix.len() < 2 {
        bail!(
            "clustering needs at least 2 attractors, the matrix has {}",
            matrix.len()
        );
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let artifacts = cluster_artifacts(&matrix)?;
    match &artifacts.report {
        Some(r) => eprintln!("network clustering coefficient {:.6}", r.network),
        None => eprintln!("fewer than 3 attractors: clustering coefficient skipped"),
    }
    write_cluster_artifacts(&args.out, matrix.measure(), &artifacts)?;
    Ok(())
}

/// The `network` row of a clustering report CSV.
fn network_coefficient(text: &str, path: &Path) -> Result<f64> {
    text.lines()
        .find_map(|l| l.strip_prefix("network,"))
        .ok_or_else(|| anyhow!("{}: no `network` row", path.display()))?
        .trim()
        .parse()
        .with_context(|| format!("{}: invalid network coefficient", path.display()))
}

fn stats(args: StatsArgs) -> Result<()> {
    let matrices = args
        .matrices
        .iter()
        .map(|p| DistanceMatrix::load(p))
        .collect::<rbn_core::Result<Vec<_>>>()?;
    let measure = matrices[0].measure();
    let pooled = pool_distances(&matrices)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let table = summary_table_csv(
        "sample",
        &[("pooled".to_string(), summary(&pooled).ok(), pooled.len())],
    );
    fs::write(args.out.join(format!("summary_{measure}.csv")), &table)?;
    print!("{table}");
    if !args.clustering.is_empty() {
        let values = args
            .clustering
            .iter()
            .map(|p| network_coefficient(&read_input(p)?, p))
            .collect::<Result<Vec<_>>>()?;
        let hist = rbn_core::clustering_histogram(&values, args.bins)?;
        fs::write(
            args.out.join(format!("histogram_{measure}.csv")),
            hist.to_csv(),
        )?;
    }
    Ok(())
}

fn experiment_config(args: ExperimentArgs) -> Result<ExperimentConfig> {
    let mut seed_from_file = false;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = read_input(path)?;
            let table: toml::Table = text
                .parse()
                .with_context(|| format!("parsing {}", path.display()))?;
            seed_from_file = table.contains_key("root_seed");
            table
                .try_into()
                .map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if !args.biases.is_empty() {
        cfg.biases = args.biases;
    }
    if let Some(v) = args.nets {
        cfg.networks_per_bias = v;
    }
    if let Some(v) = args.samples {
        cfg.samples_per_network = v;
    }
    if let Some(v) = args.max_steps {
        cfg.max_steps = v;
    }
    if !args.measures.is_empty() {
        cfg.measures = args.measures;
    }
    if let Some(v) = args.bins {
        cfg.bins = v;
    }
    if let Some(v) = args.out {
        cfg.output_dir = v;
    }
    match args.seed {
        Some(s) => cfg.root_seed = s,
        None if seed_from_file => {}
        None => {
            return Err(usage(
                "--seed is required (or `root_seed` in the config file)",
            ))
        }
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = experiment_config(args)?;
    let report = run_experiment(&cfg)?;
    for class in &report.classes {
        for m in &class.measures {
            match m.pooled {
                Some(s) => eprintln!(
                    "bias {:<9} {:<15} min {:.2}  q1 {:.2}  median {:.2}  mean {:.2}  q3 {:.2}  max {:.2}",
                    class.bias,
                    m.measure.name(),
                    s.min,
                    s.q1,
                    s.median,
                    s.mean,
                    s.q3,
                    s.max
                ),
                None => eprintln!("bias {:<9} {:<15} no attractor pairs", class.bias, m.measure.name()),
            }
        }
    }
    eprintln!(
        "{} networks written to {} in {:.1}s",
        report.manifest.networks.len(),
        cfg.output_dir.display(),
        report.manifest.wall_clock_secs
    );
    Ok(())
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Distances(a) => distances(a),
        Command::Cluster(a) => cluster(a),
        Command::Stats(a) => stats(a),
        Command::Experiment(a) => experiment(a),
        Command::CriticalBias { k } => {
            println!("{}", critical_bias(k).map_err(|e| usage(e.to_string()))?);
            Ok(())
        }
    }
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let workers: usize = v.parse().map_err(|_| {
            usage(format!(
                "{WORKERS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_workers().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(
                    e.downcast_ref::<rbn_core::Error>(),
                    Some(rbn_core::Error::InvalidParams(_))
                );
            ExitCode::from(if is_usage { 1 } else { 2 })
        }
    }
}
