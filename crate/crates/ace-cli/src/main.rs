//! `ace` — estimate average causal effects of continuous interventions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ace_core::analysis;
use ace_core::data::Dataset;
use ace_core::experiment::{self, ExperimentConfig};
use ace_core::graph::{node_set, CausalGraph, GraphFile, NodeSet};
use ace_core::oracle::{DiscreteScm, ScmFile};
use ace_core::pipeline::{self, PipelineConfig};
use ace_core::sim;

#[derive(Parser)]
#[command(name = "ace", version, about = "Average causal effect estimation for continuous interventions", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural checks on a causal graph: identifiability, availability
    /// for modeling, and the residualization preconditions.
    CheckGraph(CheckGraphArgs),
    /// Fit a residualization pipeline on a CSV dataset.
    Build(BuildArgs),
    /// Point estimate from a trained pipeline.
    Estimate(EstimateArgs),
    /// Row-wise estimates for a CSV of requests.
    EstimateBatch(EstimateBatchArgs),
    /// Generate synthetic datasets.
    Simulate(SimulateArgs),
    /// Run a configured experiment and emit plot data.
    Experiment(ExperimentArgs),
    /// Exact queries against a discrete SCM.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct CheckGraphArgs {
    /// Graph JSON file.
    #[arg(long)]
    graph: PathBuf,
    /// Outcome variable.
    #[arg(long)]
    y: String,
    /// Treatment variables, comma separated.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    /// Covariates, comma separated (defaults to all remaining observed).
    #[arg(long, value_delimiter = ',')]
    z: Option<Vec<String>>,
}

#[derive(Args)]
struct BuildArgs {
    /// Training data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Pipeline config TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output pipeline file.
    #[arg(long)]
    out: PathBuf,
    /// Optional graph JSON; when given, structural preconditions are
    /// checked and reported. Without it they are reported as unverified.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Diagnostic flagging tolerance.
    #[arg(long, default_value_t = pipeline::DEFAULT_DIAGNOSTIC_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Trained pipeline file.
    #[arg(long)]
    model: PathBuf,
    /// Treatment values, comma separated, in configured order.
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
    /// Covariate values, comma separated, in trained order.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    z: Vec<f64>,
}

#[derive(Args)]
struct EstimateBatchArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with one column per treatment and covariate.
    #[arg(long)]
    requests: PathBuf,
    /// Output CSV: the request columns plus an `estimate` column.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(subcommand)]
    model: SimulateModel,
}

#[derive(Subcommand)]
enum SimulateModel {
    /// The sinusoidal benchmark model.
    Paper {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A linear-Gaussian model from an experiment-style TOML spec.
    Linear {
        /// TOML file with a [[variables]] list.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Override the number of replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Exit nonzero when the configured max_mae is breached.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(subcommand)]
    op: OracleOp,
}

#[derive(Subcommand)]
enum OracleOp {
    /// Evaluate joint, interventional or conditional-interventional tables.
    Eval {
        /// SCM JSON file.
        #[arg(long)]
        scm: PathBuf,
        /// Interventions as name=value pairs, comma separated.
        #[arg(long, value_delimiter = ',')]
        r#do: Vec<String>,
        /// Target variables (defaults to all observed).
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Observed conditions as name=value pairs.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::CheckGraph(args) => check_graph(args),
        Command::Build(args) => build(args),
        Command::Estimate(args) => estimate(args),
        Command::EstimateBatch(args) => estimate_batch(args),
        Command::Simulate(args) => simulate(args),
        Command::Experiment(args) => experiment_cmd(args),
        Command::Oracle(args) => oracle(args),
    }
}

fn load_graph(path: &Path) -> Result<CausalGraph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let parsed: GraphFile = serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(CausalGraph::from_file(&parsed)?)
}

fn check_graph(args: CheckGraphArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    if args.x.is_empty() {
        bail!("--x must name at least one treatment");
    }
    let x: NodeSet = node_set(args.x.iter());
    let y: NodeSet = node_set([args.y.as_str()]);
    let z: NodeSet = match &args.z {
        Some(z) => node_set(z.iter()),
        None => g
            .observed()
            .iter()
            .filter(|v| v.as_str() != args.y && !args.x.iter().any(|t| t == v.as_str()))
            .cloned()
            .collect(),
    };

    let identifiable = analysis::is_identifiable_conditional(&g, &x, &y, &z)?;
    let available = analysis::is_available_for_modeling(&g, &x, &y, &z)?;
    let theorem1 = analysis::check_theorem1_preconditions(&g, &x, &args.y)?;
    let hedge = if identifiable {
        None
    } else {
        analysis::find_hedge(&g, &x, &y)?
    };

    let report = serde_json::json!({
        "identifiable": identifiable,
        "available_for_modeling": available,
        "theorem1_preconditions": theorem1,
        "hedge_witness": hedge,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn build(args: BuildArgs) -> Result<()> {
    let data_file =
        File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let data: Dataset<f64> = Dataset::from_csv(BufReader::new(data_file))?;
    let cfg_text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let cfg: PipelineConfig = toml::from_str(&cfg_text)
        .with_context(|| format!("parsing {}", args.config.display()))?;

    let (pipeline, trace) = pipeline::build(&data, &cfg)?;
    let diag = pipeline::diagnostics(&trace, &data, &cfg, args.tolerance)?;

    let preconditions = match &args.graph {
        None => serde_json::json!("unverified"),
        Some(path) => {
            let g = load_graph(path)?;
            let x: NodeSet = node_set(cfg.treatments.iter());
            let y: NodeSet = node_set([cfg.outcome.as_str()]);
            let z: NodeSet = node_set(pipeline.covariates().iter());
            serde_json::json!({
                "identifiable": analysis::is_identifiable_conditional(&g, &x, &y, &z)?,
                "available_for_modeling": analysis::is_available_for_modeling(&g, &x, &y, &z)?,
                "theorem1": analysis::check_theorem1_preconditions(&g, &x, &cfg.outcome)?,
            })
        }
    };

    let out = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    pipeline::save_pipeline(&pipeline, BufWriter::new(out))?;

    let report = serde_json::json!({
        "model": args.out.display().to_string(),
        "models_fit": pipeline.model_count(),
        "rows": data.n_rows(),
        "covariates": pipeline.covariates(),
        "diagnostics_clean": diag.is_clean(),
        "diagnostics_flags": diag.flagged,
        "preconditions": preconditions,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn load_pipeline(path: &Path) -> Result<ace_core::TrainedPipeline> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(pipeline::load_pipeline(BufReader::new(file))?)
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let p = load_pipeline(&args.model)?;
    let value = p.estimate(&args.x, &args.z)?;
    println!("{value}");
    Ok(())
}

fn estimate_batch(args: EstimateBatchArgs) -> Result<()> {
    let p = load_pipeline(&args.model)?;
    let file = File::open(&args.requests)
        .with_context(|| format!("opening {}", args.requests.display()))?;
    let requests: Dataset<f64> = Dataset::from_csv(BufReader::new(file))?;

    let treatments = p.config().treatments.clone();
    let covariates = p.covariates().to_vec();
    let mut rows = Vec::with_capacity(requests.n_rows());
    for r in 0..requests.n_rows() {
        let x: Vec<f64> = treatments
            .iter()
            .map(|t| requests.column(t).map(|c| c[r]))
            .collect::<Result<_, _>>()?;
        let z: Vec<f64> = covariates
            .iter()
            .map(|c| requests.column(c).map(|col| col[r]))
            .collect::<Result<_, _>>()?;
        rows.push((x, z));
    }
    let estimates = p.estimate_batch(&rows)?;

    let out = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(out));
    let mut header: Vec<String> = requests.names().iter().map(|n| n.to_string()).collect();
    header.push("estimate".into());
    w.write_record(&header)?;
    for (r, est) in estimates.iter().enumerate() {
        let mut record: Vec<String> = requests
            .names()
            .iter()
            .map(|n| requests.column(n.as_str()).unwrap()[r].to_string())
            .collect();
        record.push(est.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    println!("{} estimates -> {}", estimates.len(), args.out.display());
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    match args.model {
        SimulateModel::Paper { n, seed, out } => {
            let data: Dataset<f64> = sim::gen_paper_model(n, seed);
            let file =
                File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            data.to_csv(BufWriter::new(file))?;
            println!("{} rows -> {}", n, out.display());
        }
        SimulateModel::Linear { spec, n, seed, out } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let parsed: sim::LinearScmSpec = toml::from_str(&text)
                .with_context(|| format!("parsing {}", spec.display()))?;
            let data: Dataset<f64> = parsed.sample(n, seed)?;
            let file =
                File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            data.to_csv(BufWriter::new(file))?;
            println!("{} rows -> {}", n, out.display());
        }
    }
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    let result: ace_core::ExperimentResult = experiment::run_experiment(&cfg)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join("results.csv");
    let summary_path = args.out.join("summary.json");
    let csv_file = File::create(&csv_path)?;
    let summary_file = File::create(&summary_path)?;
    experiment::emit_plot_data(
        &result,
        cfg.pipeline.treatments.len(),
        BufWriter::new(csv_file),
        BufWriter::new(summary_file),
    )?;

    let checked = result
        .summary
        .replication_mae_median
        .or(result.summary.mae);
    println!(
        "grid={} mae={} median={} -> {}",
        result.summary.grid_points,
        fmt_opt(result.summary.mae),
        fmt_opt(result.summary.replication_mae_median),
        args.out.display()
    );
    if args.check {
        let Some(limit) = cfg.max_mae else {
            bail!("--check requires max_mae in the config");
        };
        match checked {
            Some(mae) if mae <= limit => {}
            Some(mae) => bail!("MAE {mae} exceeds the configured limit {limit}"),
            None => bail!("--check requires reference values to compare against"),
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

fn parse_assignments(pairs: &[String]) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .with_context(|| format!("`{pair}` is not name=value"))?;
        out.insert(name.trim().to_string(), value.trim().parse()?);
    }
    Ok(out)
}

fn oracle(args: OracleArgs) -> Result<()> {
    match args.op {
        OracleOp::Eval {
            scm,
            r#do,
            targets,
            given,
        } => {
            let file =
                File::open(&scm).with_context(|| format!("opening {}", scm.display()))?;
            let parsed: ScmFile = serde_json::from_reader(BufReader::new(file))?;
            let model: DiscreteScm<f64> = DiscreteScm::from_file(&parsed)?;
            let interventions = parse_assignments(&r#do)?;
            let conditions = parse_assignments(&given)?;
            let target_set: NodeSet = if targets.is_empty() {
                model
                    .graph()
                    .observed()
                    .iter()
                    .filter(|v| {
                        !interventions.contains_key(v.as_str())
                            && !conditions.contains_key(v.as_str())
                    })
                    .cloned()
                    .collect()
            } else {
                node_set(targets.iter())
            };
            let table = model.conditional_do_effect(&interventions, &target_set, &conditions)?;
            println!("{}", serde_json::to_string_pretty(&table)?);
        }
    }
    Ok(())
}
