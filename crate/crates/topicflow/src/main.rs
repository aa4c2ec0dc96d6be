//! topicflow command line: ingest checks, collection building, scoring,
//! batch evaluation, synthetic data, and report summaries.
//!
//! Every run option can come from a JSON config file (`--config`), from a
//! flag, or both; flags win. Warnings go to stderr; machine-readable output
//! goes to stdout or the requested file. Failures print
//! `error[category]: message` and exit nonzero.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use topicflow::attributes::{derive_attributes, DerivationConfig, TimezoneMapper};
use topicflow::distortion::TrendKind;
use topicflow::error::{Error, Result};
use topicflow::events::{slice_events, ActionEvent, SlotIndex, SlottedLog, DEFAULT_SLICE_SECONDS};
use topicflow::experiment::{
    method_scores, observed_vector, run_experiment, summarize, summary_table, ExperimentConfig,
    Method, Report, Schedule, TrendRows,
};
use topicflow::graph::{Attribute, EdgeMode, SocialGraph};
use topicflow::io;
use topicflow::metrics::DAY_SECONDS;
use topicflow::predict::{fit_models, PredictorConfig};
use topicflow::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(
    name = "topicflow",
    version,
    about = "Reconstruct topic diffusion, predict the next slice, and score attribute graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate all inputs, then report what loaded.
    IngestCheck(InputArgs),
    /// Reconstruct a topic's diffusion collection and print its report.
    Build(BuildArgs),
    /// Print the eight-component diffusion vector for a topic and horizon.
    Metrics(BuildArgs),
    /// Fit the sequence models and score every user for the next slot.
    Predict(PredictArgs),
    /// Run the batch experiment grid and emit a line-delimited report.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic world in the standard ingest formats.
    Synth(SynthArgs),
    /// Aggregate a report into one mean row per (graph, method).
    Summarize(SummarizeArgs),
}

/// Options every data-loading subcommand shares. Unset flags fall back to
/// the config file, then to defaults.
#[derive(Args, Debug, Default)]
struct InputArgs {
    /// JSON config file supplying any of the run options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge list CSV (src,dst with optional header).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// User records CSV.
    #[arg(long)]
    users: Option<PathBuf>,
    /// Action log JSONL.
    #[arg(long)]
    actions: Option<PathBuf>,
    /// Timezone→continent override CSV.
    #[arg(long)]
    timezone_map: Option<PathBuf>,
    /// How to read the edge list: friends | follows.
    #[arg(long, value_parser = parse_edge_mode)]
    edge_mode: Option<EdgeMode>,
    /// Trend series as kind:topic=path (e.g. search:rock=rock.csv). Repeatable.
    #[arg(long = "trend", value_parser = parse_trend_spec)]
    trends: Vec<TrendSpec>,
    /// Slot width in seconds.
    #[arg(long)]
    slice_duration: Option<i64>,
    /// Slicing origin as a unix timestamp; defaults to the first event.
    #[arg(long)]
    origin: Option<i64>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Topic to reconstruct.
    #[arg(long)]
    topic: Option<String>,
    /// Training horizon N (slots 1..=N).
    #[arg(long)]
    horizon: Option<SlotIndex>,
    /// Seconds per unit for the rate component.
    #[arg(long)]
    time_unit: Option<f64>,
    /// Write the result as JSON here instead of printing text.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    topic: Option<String>,
    #[arg(long)]
    horizon: Option<SlotIndex>,
    /// Scoring method (dbn, gen_model, cascade, lin_regress, deg_act, random).
    #[arg(long, value_parser = Method::parse)]
    method: Option<Method>,
    /// Reuse previously fitted models instead of fitting.
    #[arg(long)]
    models_in: Option<PathBuf>,
    /// Save the fitted models here.
    #[arg(long)]
    models_out: Option<PathBuf>,
    /// Write scores as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Topic to evaluate. Repeatable.
    #[arg(long = "topic")]
    topics: Vec<String>,
    /// Attribute graph to evaluate (location, info_role, content_role,
    /// activity_cluster). Repeatable; default all four.
    #[arg(long = "attribute", value_parser = Attribute::parse)]
    attributes: Vec<Attribute>,
    /// Method to run. Repeatable; default all six.
    #[arg(long = "method", value_parser = Method::parse)]
    methods: Vec<Method>,
    /// First training horizon.
    #[arg(long)]
    base_window: Option<SlotIndex>,
    /// Number of incremental horizons.
    #[arg(long)]
    steps: Option<u32>,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    time_unit: Option<f64>,
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Write the JSONL report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print the aggregate table to stderr.
    #[arg(long)]
    summary: bool,
}

/// Predictor hyperparameters, flag-overridable.
#[derive(Args, Debug, Default)]
struct PredictorArgs {
    /// Quantile bins per feature dimension.
    #[arg(long)]
    bins: Option<usize>,
    /// Laplace/Dirichlet smoothing weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Action-score threshold for joining the next slot.
    #[arg(long)]
    tau: Option<f64>,
    /// Active-friend fraction threshold for the cascade baseline.
    #[arg(long)]
    phi: Option<f64>,
    /// Baum-Welch iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Baum-Welch convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// JSON config file; the `synth` object supplies generator options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_users: Option<usize>,
    /// Group count for the planted attribute.
    #[arg(long)]
    groups: Option<usize>,
    /// Attribute carrying the planted structure.
    #[arg(long, value_parser = Attribute::parse)]
    planted: Option<Attribute>,
    #[arg(long)]
    within_prob: Option<f64>,
    #[arg(long)]
    cross_prob: Option<f64>,
    /// Propagation probability along same-group edges.
    #[arg(long)]
    hom_prob: Option<f64>,
    /// Propagation probability along cross-group edges.
    #[arg(long)]
    other_prob: Option<f64>,
    #[arg(long)]
    slots: Option<SlotIndex>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Directory receiving edges.csv, users.csv, actions.jsonl, meta.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// JSONL report; - or absent reads stdin.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_edge_mode(s: &str) -> Result<EdgeMode> {
    match s {
        "friends" => Ok(EdgeMode::Friends),
        "follows" => Ok(EdgeMode::Follows),
        other => Err(Error::Config(format!(
            "unknown edge mode {other:?}; expected friends or follows"
        ))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrendSpec {
    topic: String,
    kind: TrendKind,
    path: PathBuf,
}

fn parse_trend_spec(s: &str) -> Result<TrendSpec> {
    let err = || {
        Error::Config(format!(
            "trend spec {s:?} must look like kind:topic=path with kind search or news"
        ))
    };
    let (kind, rest) = s.split_once(':').ok_or_else(err)?;
    let kind = match kind {
        "search" => TrendKind::Search,
        "news" => TrendKind::News,
        _ => return Err(err()),
    };
    let (topic, path) = rest.split_once('=').ok_or_else(err)?;
    if topic.is_empty() || path.is_empty() {
        return Err(err());
    }
    Ok(TrendSpec {
        topic: topic.to_owned(),
        kind,
        path: PathBuf::from(path),
    })
}

/// Everything a config file can carry. All fields optional; flags override.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    edges: Option<PathBuf>,
    users: Option<PathBuf>,
    actions: Option<PathBuf>,
    timezone_map: Option<PathBuf>,
    edge_mode: Option<EdgeMode>,
    trends: Vec<TrendSpec>,
    topics: Vec<String>,
    attributes: Option<Vec<Attribute>>,
    methods: Option<Vec<Method>>,
    slice_duration: Option<i64>,
    origin: Option<i64>,
    base_window: Option<SlotIndex>,
    steps: Option<u32>,
    bins: Option<usize>,
    lambda: Option<f64>,
    tau: Option<f64>,
    phi: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
    time_unit: Option<f64>,
    rng_seed: Option<u64>,
    topic: Option<String>,
    horizon: Option<SlotIndex>,
    method: Option<Method>,
    derivation: Option<DerivationConfig>,
    synth: Option<SynthFileConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthFileConfig {
    n_users: Option<usize>,
    groups: Option<usize>,
    planted: Option<Attribute>,
    within_prob: Option<f64>,
    cross_prob: Option<f64>,
    hom_prob: Option<f64>,
    other_prob: Option<f64>,
    slots: Option<SlotIndex>,
    seeds: Option<usize>,
    rng_seed: Option<u64>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Loaded-and-derived inputs shared by most subcommands.
struct World {
    graph: SocialGraph,
    events: Vec<ActionEvent>,
    trends: TrendRows,
    origin: i64,
    slice_duration: i64,
}

impl World {
    fn log(&self, warnings: &mut Vec<String>) -> Result<SlottedLog> {
        slice_events(&self.events, self.origin, self.slice_duration, warnings)
    }
}

fn require(path: &Option<PathBuf>, what: &str, flag: &str) -> Result<PathBuf> {
    path.clone().ok_or_else(|| {
        Error::Config(format!("no {what} given (flag --{flag} or config `{flag}`)"))
    })
}

fn load_world(args: &InputArgs, file: &FileConfig, warnings: &mut Vec<String>) -> Result<World> {
    let edges_path = require(&args.edges.clone().or_else(|| file.edges.clone()), "edge list", "edges")?;
    let users_path = require(&args.users.clone().or_else(|| file.users.clone()), "user records", "users")?;
    let actions_path = require(
        &args.actions.clone().or_else(|| file.actions.clone()),
        "action log",
        "actions",
    )?;

    let edges = io::read_edge_list(&edges_path)?;
    let mut records = io::read_user_records(&users_path, warnings)?;
    let events = io::read_action_log(&actions_path)?;

    let mapper = match args.timezone_map.clone().or_else(|| file.timezone_map.clone()) {
        Some(p) => TimezoneMapper::with_overrides(io::read_timezone_overrides(&p)?),
        None => TimezoneMapper::new(),
    };
    let derivation = file.derivation.clone().unwrap_or_default();
    derive_attributes(&mut records, &events, &mapper, &derivation, warnings)?;

    let mode = args.edge_mode.or(file.edge_mode).unwrap_or_default();
    let graph = SocialGraph::load(&edges, records, mode, warnings)?;

    // A missing or unreadable trend file downgrades to a warning: the run
    // proceeds and the affected utility columns stay empty.
    let mut trends = TrendRows::new();
    let specs = if args.trends.is_empty() {
        file.trends.clone()
    } else {
        args.trends.clone()
    };
    for spec in specs {
        match io::read_trend_rows(&spec.path) {
            Ok(rows) => {
                trends.insert((spec.topic.clone(), spec.kind), rows);
            }
            Err(e) => warnings.push(format!(
                "trend file {} skipped; its utility columns will be empty: {e}",
                spec.path.display()
            )),
        }
    }

    let slice_duration = args
        .slice_duration
        .or(file.slice_duration)
        .unwrap_or(DEFAULT_SLICE_SECONDS);
    let origin = args
        .origin
        .or(file.origin)
        .or_else(|| events.iter().map(|e| e.timestamp).min())
        .unwrap_or(0);

    Ok(World {
        graph,
        events,
        trends,
        origin,
        slice_duration,
    })
}

fn predictor_config(args: &PredictorArgs, file: &FileConfig, seed: u64) -> PredictorConfig {
    let d = PredictorConfig::default();
    PredictorConfig {
        bins: args.bins.or(file.bins).unwrap_or(d.bins),
        lambda: args.lambda.or(file.lambda).unwrap_or(d.lambda),
        tau: args.tau.or(file.tau).unwrap_or(d.tau),
        phi: args.phi.or(file.phi).unwrap_or(d.phi),
        max_iters: args.max_iters.or(file.max_iters).unwrap_or(d.max_iters),
        tol: args.tol.or(file.tol).unwrap_or(d.tol),
        seed,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCheck(args) => ingest_check(args),
        Command::Build(args) => build(args, false),
        Command::Metrics(args) => build(args, true),
        Command::Predict(args) => predict(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Synth(args) => synth(args),
        Command::Summarize(args) => summarize_cmd(args),
    }
}

fn ingest_check(args: InputArgs) -> Result<()> {
    let file = load_file_config(args.config.as_deref())?;
    let mut warnings = Vec::new();
    let world = load_world(&args, &file, &mut warnings)?;
    let log = world.log(&mut warnings)?;
    print_warnings(&warnings);

    println!("users: {}", world.graph.user_count());
    println!("edges: {}", world.graph.edge_count());
    println!("components: {}", world.graph.connected_component_count());
    println!("events: {}", world.events.len());
    let topics = log.topics();
    println!("topics: {}", topics.len());
    for t in topics.iter().take(10) {
        println!("  - {t}");
    }
    if topics.len() > 10 {
        println!("  … and {} more", topics.len() - 10);
    }
    println!(
        "slots: {} (origin {}, slice {}s)",
        log.max_slot(),
        world.origin,
        world.slice_duration
    );
    println!("trend series: {}", world.trends.len());
    println!("ok");
    Ok(())
}

fn build(args: BuildArgs, metrics_only: bool) -> Result<()> {
    let file = load_file_config(args.input.config.as_deref())?;
    let topic = args
        .topic
        .or_else(|| file.topic.clone())
        .ok_or_else(|| Error::Config("no topic given (flag --topic or config `topic`)".into()))?;
    let mut warnings = Vec::new();
    let world = load_world(&args.input, &file, &mut warnings)?;
    let log = world.log(&mut warnings)?;
    let horizon = args.horizon.or(file.horizon).unwrap_or_else(|| log.max_slot());
    let time_unit = args.time_unit.or(file.time_unit).unwrap_or(DAY_SECONDS);

    let (collection, vector) =
        observed_vector(&world.graph, &log, &topic, horizon, time_unit, &mut warnings)?;
    print_warnings(&warnings);

    if metrics_only {
        let mut text = serde_json::to_string_pretty(&vector).expect("vector serializes");
        text.push('\n');
        emit(args.out.as_deref(), &text)?;
    } else if let Some(out) = args.out.as_deref() {
        let mut text = serde_json::to_string_pretty(&collection).expect("collection serializes");
        text.push('\n');
        emit(Some(out), &text)?;
    } else {
        print!("{}", collection.text_report());
    }
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let file = load_file_config(args.input.config.as_deref())?;
    let topic = args
        .topic
        .or_else(|| file.topic.clone())
        .ok_or_else(|| Error::Config("no topic given (flag --topic or config `topic`)".into()))?;
    let method = args.method.or(file.method).unwrap_or(Method::Dbn);
    let seed = args.rng_seed.or(file.rng_seed).unwrap_or(0);
    let pcfg = predictor_config(&args.predictor, &file, seed);
    pcfg.validate()?;

    let mut warnings = Vec::new();
    let world = load_world(&args.input, &file, &mut warnings)?;
    let log = world.log(&mut warnings)?;
    let horizon = args.horizon.or(file.horizon).unwrap_or_else(|| log.max_slot());

    let fitted = if matches!(method, Method::Dbn | Method::GenModel) {
        let models = match &args.models_in {
            Some(path) => io::load_models(path)?,
            None => fit_models(&world.graph, &log, &topic, horizon, &pcfg)?,
        };
        if let Some(path) = &args.models_out {
            io::save_models(path, &models)?;
        }
        Some(models)
    } else {
        None
    };

    let scores = method_scores(
        method,
        &world.graph,
        &log,
        &topic,
        horizon,
        &pcfg,
        seed,
        fitted.as_ref(),
        &mut warnings,
    )?;
    print_warnings(&warnings);

    let joining: Vec<&str> = scores
        .iter()
        .filter(|(_, s)| **s >= pcfg.tau)
        .map(|(u, _)| u.as_str())
        .collect();
    eprintln!(
        "{} of {} users predicted to act in slot {} (τ = {})",
        joining.len(),
        scores.len(),
        horizon + 1,
        pcfg.tau
    );
    let mut text = serde_json::to_string_pretty(&scores).expect("scores serialize");
    text.push('\n');
    emit(args.out.as_deref(), &text)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let file = load_file_config(args.input.config.as_deref())?;
    let seed = args.rng_seed.or(file.rng_seed).unwrap_or(0);
    let mut warnings = Vec::new();
    let world = load_world(&args.input, &file, &mut warnings)?;

    let topics = if args.topics.is_empty() {
        file.topics.clone()
    } else {
        args.topics.clone()
    };
    let attributes = if args.attributes.is_empty() {
        file.attributes.clone().unwrap_or_else(|| Attribute::ALL.to_vec())
    } else {
        args.attributes.clone()
    };
    let methods = if args.methods.is_empty() {
        file.methods.clone().unwrap_or_else(|| Method::ALL.to_vec())
    } else {
        args.methods.clone()
    };
    let schedule = Schedule {
        base_window: args.base_window.or(file.base_window).unwrap_or(5),
        steps: args.steps.or(file.steps).unwrap_or(1),
    };
    let config = ExperimentConfig {
        topics,
        attributes,
        methods,
        slice_duration: world.slice_duration,
        origin: Some(world.origin),
        schedule,
        predictor: predictor_config(&args.predictor, &file, seed),
        time_unit: args.time_unit.or(file.time_unit).unwrap_or(DAY_SECONDS),
        rng_seed: seed,
    };

    let report = run_experiment(&config, &world.graph, &world.events, &world.trends, &mut warnings)?;
    print_warnings(&warnings);
    emit(args.out.as_deref(), &report.to_jsonl())?;
    if args.summary {
        eprint!("{}", summary_table(&summarize(&report)?));
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let file = load_file_config(args.config.as_deref())?;
    let sf = file.synth.unwrap_or_default();
    let d = SynthConfig::default();
    let mut cfg = SynthConfig {
        n_users: args.n_users.or(sf.n_users).unwrap_or(d.n_users),
        planted: args.planted.or(sf.planted).unwrap_or(d.planted),
        within_group_edge_prob: args.within_prob.or(sf.within_prob).unwrap_or(d.within_group_edge_prob),
        cross_group_edge_prob: args.cross_prob.or(sf.cross_prob).unwrap_or(d.cross_group_edge_prob),
        propagation_homophilous: args.hom_prob.or(sf.hom_prob).unwrap_or(d.propagation_homophilous),
        propagation_other: args.other_prob.or(sf.other_prob).unwrap_or(d.propagation_other),
        n_slots: args.slots.or(sf.slots).unwrap_or(d.n_slots),
        n_seeds: args.seeds.or(sf.seeds).unwrap_or(d.n_seeds),
        rng_seed: args.rng_seed.or(sf.rng_seed).unwrap_or(d.rng_seed),
        cardinalities: d.cardinalities,
    };
    if let Some(groups) = args.groups.or(sf.groups) {
        cfg.cardinalities.insert(cfg.planted, groups);
    }

    let out = generate(&cfg)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.display().to_string(),
        source: e,
    })?;
    io::write_edge_list(&args.out_dir.join("edges.csv"), &out.graph.edges())?;
    let records: Vec<_> = out.graph.users().cloned().collect();
    io::write_user_records(&args.out_dir.join("users.csv"), &records)?;
    io::write_action_log(&args.out_dir.join("actions.jsonl"), &out.events)?;

    let meta = serde_json::json!({
        "topic": out.topic,
        "users": out.graph.user_count(),
        "edges": out.graph.edges().len(),
        "events": out.events.len(),
        "activations": out.activations.len(),
        "diffusion_edges": out.diffusion_edges.len(),
        "groups": out.groups,
    });
    let meta_path = args.out_dir.join("meta.json");
    fs::write(&meta_path, format!("{}\n", serde_json::to_string_pretty(&meta).expect("meta serializes")))
        .map_err(|e| Error::Io {
            path: meta_path.display().to_string(),
            source: e,
        })?;
    eprintln!(
        "wrote {} users, {} events to {}",
        out.graph.user_count(),
        out.events.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn summarize_cmd(args: SummarizeArgs) -> Result<()> {
    let text = match &args.report {
        Some(path) if path.as_os_str() != "-" => {
            fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?
        }
        _ => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf).map_err(|e| Error::Io {
                path: "<stdin>".into(),
                source: e,
            })?;
            buf
        }
    };
    let report = Report::from_jsonl(&text)?;
    print!("{}", summary_table(&summarize(&report)?));
    Ok(())
}
