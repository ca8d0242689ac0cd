//! `toolnet` — build, update, query, and simulate tool-transition graphs.
//!
//! Commands never modify their input files and write canonical,
//! byte-stable output, so runs are reproducible and diffable. Exit codes:
//! `0` success, `1` I/O failure (missing or unwritable files), `2`
//! validation failure (malformed JSON, bad parameters, unknown nodes),
//! `3` scenario assertion failure.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use toolnet::graph::UpdateParams;
use toolnet::navigation::menu_options;
use toolnet::simulation::{ScenarioMode, ScenarioSpec, StartMode};
use toolnet::{
    analyze_corpus, apply_evaluation, evaluate_assertions, format_tool_context, graph_to_dot,
    parse_registry, read_trajectories, run_scenario, run_scenario_with_prior, static_construct,
    EvaluatorReport, NodeRef, ToolGraph, ToolNetError, WeightFormat,
};

#[derive(Parser)]
#[command(
    name = "toolnet",
    version,
    about = "Weighted tool-transition graphs: build, update, query, simulate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph from a tool registry, optionally from a trajectory corpus.
    Build(BuildArgs),
    /// Fold one evaluator report into a graph.
    Update(UpdateArgs),
    /// Show the menu offered after a node, as a session would see it.
    Successors(SuccessorsArgs),
    /// Run a simulation scenario.
    Simulate(SimulateArgs),
    /// Summarize the transition sparsity of a trajectory corpus.
    Stats(StatsArgs),
    /// Render a graph as Graphviz DOT.
    ExportDot(ExportDotArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Tool registry JSON (array of {id, description, category}).
    #[arg(long)]
    registry: PathBuf,
    /// Trajectory corpus JSONL; weights become observed bigram frequencies.
    #[arg(long, required_unless_present = "no_corpus", conflicts_with = "no_corpus")]
    corpus: Option<PathBuf>,
    /// Build a uniform (non-informative) graph instead of reading a corpus.
    #[arg(long)]
    no_corpus: bool,
    /// Output graph JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Positive-score slope of the feedback mapping.
    #[arg(long, env = "TOOLNET_ALPHA", default_value_t = UpdateParams::DEFAULT_ALPHA)]
    alpha: f64,
    /// Prior retention factor of feedback updates, in [0, 1].
    #[arg(long, env = "TOOLNET_BETA", default_value_t = UpdateParams::DEFAULT_BETA)]
    beta: f64,
    /// Count failed and given-up trajectories too (default: successes only).
    #[arg(long)]
    include_failures: bool,
}

#[derive(Args)]
struct UpdateArgs {
    /// Input graph JSON.
    #[arg(long)]
    graph: PathBuf,
    /// Evaluator report JSON ({trajectory_id, scores_of_tools}).
    #[arg(long)]
    report: PathBuf,
    /// Output graph JSON path (may equal --graph to update in place).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SuccessorsArgs {
    /// Input graph JSON.
    #[arg(long)]
    graph: PathBuf,
    /// Node to list successors of: a tool id or "start".
    #[arg(long)]
    from: String,
    /// Weight rendering: none, div100, div10, integer, times10.
    #[arg(long, env = "TOOLNET_WEIGHT_FORMAT", default_value = "times10",
          value_parser = WeightFormat::from_str)]
    format: WeightFormat,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario spec JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Optional prior graph JSON seeding the run (toolnet mode).
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Write the per-iteration score/weight trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final graph JSON here.
    #[arg(long)]
    graph_out: Option<PathBuf>,
    /// Write one session result per line (JSONL) here.
    #[arg(long)]
    sessions_out: Option<PathBuf>,
    /// Override the scenario's seed.
    #[arg(long, env = "TOOLNET_SEED")]
    seed: Option<u64>,
    /// Override the start set with top-k retrieval of this size.
    #[arg(long, env = "TOOLNET_K")]
    k: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// Trajectory corpus JSONL.
    #[arg(long)]
    corpus: PathBuf,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportDotArgs {
    /// Input graph JSON.
    #[arg(long)]
    graph: PathBuf,
    /// Omit edges with current weight below this threshold.
    #[arg(long, default_value_t = 0.0)]
    min_weight: f64,
    /// Write the DOT text here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Io(String),
    Validation(String),
    Assertions(Vec<String>),
}

impl From<ToolNetError> for CliError {
    fn from(err: ToolNetError) -> Self {
        match err {
            ToolNetError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("invalid JSON in {}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<ToolGraph, CliError> {
    let text = read_text(path)?;
    ToolGraph::from_json(&text)
        .map_err(|e| CliError::Validation(format!("invalid graph {}: {e}", path.display())))
}

fn save_graph(graph: &ToolGraph, path: &Path) -> Result<(), CliError> {
    write_text(path, &graph.to_canonical_json()?)
}

/// Sorted-key pretty JSON with a trailing newline, for diffable output.
fn canonical_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut text =
        serde_json::to_string_pretty(&v).map_err(|e| CliError::Validation(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Assertions(failures)) => {
            for failure in &failures {
                eprintln!("assertion failed: {failure}");
            }
            std::process::exit(3);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build(args) => build(args),
        Command::Update(args) => update(args),
        Command::Successors(args) => successors(args),
        Command::Simulate(args) => simulate(args),
        Command::Stats(args) => stats(args),
        Command::ExportDot(args) => export_dot(args),
    }
}

fn build(args: BuildArgs) -> Result<(), CliError> {
    let registry_text = read_text(&args.registry)?;
    let tools = parse_registry(&registry_text)?;
    let params = UpdateParams {
        alpha: args.alpha,
        beta: args.beta,
    };
    params.validate()?;
    let graph = if args.no_corpus {
        ToolGraph::new(&tools, params)?
    } else {
        let corpus_path = args.corpus.as_deref().expect("clap enforces --corpus");
        let corpus_text = read_text(corpus_path)?;
        let corpus = read_trajectories(corpus_text.as_bytes())?;
        static_construct(&tools, &corpus, !args.include_failures, params)?
    };
    save_graph(&graph, &args.out)?;
    println!(
        "wrote graph over {} tools to {}",
        graph.tool_count(),
        args.out.display()
    );
    Ok(())
}

fn update(args: UpdateArgs) -> Result<(), CliError> {
    let mut graph = load_graph(&args.graph)?;
    let report_text = read_text(&args.report)?;
    let report: EvaluatorReport = parse_json(&report_text, &args.report)?;
    apply_evaluation(&mut graph, &report)?;
    save_graph(&graph, &args.out)?;
    println!(
        "applied report {} ; graph now at iteration {}",
        report.trajectory_id,
        graph.iteration()
    );
    Ok(())
}

fn successors(args: SuccessorsArgs) -> Result<(), CliError> {
    let graph = load_graph(&args.graph)?;
    let from = NodeRef::from_str(&args.from)?;
    let options = menu_options(&graph, &from)?;
    println!("{}", format_tool_context(&options, args.format));
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let scenario_text = read_text(&args.scenario)?;
    let mut spec: ScenarioSpec = parse_json(&scenario_text, &args.scenario)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(k) = args.k {
        spec.start = StartMode::TopK { k };
    }
    let outcome = match &args.prior {
        Some(prior_path) => {
            let prior = load_graph(prior_path)?;
            run_scenario_with_prior(&spec, &prior)?
        }
        None => run_scenario(&spec)?,
    };
    if let Some(path) = &args.trace {
        write_text(path, &outcome.trace.to_csv())?;
    }
    if let Some(path) = &args.graph_out {
        save_graph(&outcome.graph, path)?;
    }
    if let Some(path) = &args.sessions_out {
        let mut text = String::new();
        for session in &outcome.sessions {
            text.push_str(
                &serde_json::to_string(session).map_err(|e| CliError::Validation(e.to_string()))?,
            );
            text.push('\n');
        }
        write_text(path, &text)?;
    }
    let finished = outcome.sessions.iter().filter(|s| s.finished).count();
    let mode = match spec.mode {
        ScenarioMode::Toolnet => "toolnet",
        ScenarioMode::FullList => "full_list",
    };
    println!("mode: {mode}");
    println!("iterations: {}", spec.iterations);
    println!("sessions_finished: {finished}/{}", outcome.sessions.len());
    println!("total_tokens: {}", outcome.total_tokens);
    let failures = evaluate_assertions(&spec, &outcome);
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertions(failures))
    }
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let corpus_text = read_text(&args.corpus)?;
    let corpus = read_trajectories(corpus_text.as_bytes())?;
    let report = analyze_corpus(&corpus)?;
    let json = canonical_json(&report)?;
    match &args.out {
        Some(path) => write_text(path, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn export_dot(args: ExportDotArgs) -> Result<(), CliError> {
    let graph = load_graph(&args.graph)?;
    let dot = graph_to_dot(&graph, args.min_weight);
    match &args.out {
        Some(path) => write_text(path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(())
}
