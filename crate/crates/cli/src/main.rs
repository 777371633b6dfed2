//! `kglf`: synthetic experiments, bundle import/export and the review
//! service. Exit status is 0 on success, 2 when input fails validation
//! and 1 for anything else.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kglf_core::learning::GpConfig;
use kglf_core::metrics::PredictionMode;
use kglf_core::storage::{self, AnonymizationPolicy, GraphBundle, Manifest};
use kglf_core::KnowledgeGraph;
use kglf_eval::synthetic::MechanismMix;
use kglf_eval::{
    generate, read_hidden, run_experiment, simulate, write_hidden, write_report, EvalError, ExperimentReport, Scoring,
    SimulationConfig, SyntheticSpec, HIDDEN_FILE,
};
use kglf_service::{AppState, Overrides, ServiceConfig, ServiceError};

#[derive(Parser)]
#[command(name = "kglf", version, about = "Human-supervised link prediction for knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a synthetic graph and write it as a bundle plus its hidden links.
    Generate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Bundle directory to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Run the simulated review loop and write `runs.json`.
    Simulate(SimulateArgs),
    /// Turn a `runs.json` into plot-ready tables.
    Report {
        /// `runs.json` written by `simulate`.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        /// TOML settings file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        retrain_every: Option<usize>,
        #[arg(long)]
        candidate_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a bundle directory or a service export and optionally
    /// write it out compacted.
    Import {
        /// Bundle directory or JSON export from `GET /export`.
        source: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a bundle's live graph and weights as a compacted bundle.
    Export {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        anonymize: bool,
        /// Comma-separated concept keys to pseudonymise.
        #[arg(long, default_value = "Person", value_delimiter = ',')]
        concepts: Vec<String>,
        #[arg(long, env = "KGLF_SALT", default_value = "kglf")]
        salt: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Semantic,
}

#[derive(Args)]
struct SpecArgs {
    /// TOML file with a full synthetic spec; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long)]
    links_per_node: Option<f64>,
    #[arg(long)]
    triadic: Option<f64>,
    #[arg(long)]
    affinity: Option<f64>,
    #[arg(long)]
    recency: Option<f64>,
    #[arg(long)]
    layering: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Simulate on an existing bundle with a `hidden` file instead of
    /// generating graphs.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Seeds to run, e.g. `1..=10` or `3,5,8`.
    #[arg(long, default_value = "1..=10")]
    seeds: String,
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value = "existence")]
    mode: String,
    #[arg(long, default_value_t = 9)]
    batch_size: usize,
    #[arg(long, default_value_t = 30)]
    candidate_size: usize,
    #[arg(long, default_value_t = 200)]
    retrain_every: usize,
    #[arg(long, default_value_t = 200)]
    training_size: usize,
    #[arg(long, default_value_t = 7)]
    population: usize,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    /// `learned`, `zero`, or a metric name for a fixed one-hot ensemble.
    #[arg(long, default_value = "learned")]
    scoring: String,
    /// Directory for `runs.json`; the tables are written there too.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Other(String),
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

impl From<storage::StorageError> for Failure {
    fn from(e: storage::StorageError) -> Self {
        match e {
            storage::StorageError::Io { .. } => Failure::Other(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(_) => Failure::Other(e.to_string()),
            ServiceError::Storage(s) => s.into(),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Other(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { spec, out, name } => cmd_generate(&spec, &out, name),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Report { runs, out } => cmd_report(&runs, &out),
        Command::Serve {
            config,
            port,
            bundle,
            retrain_every,
            candidate_size,
            seed,
        } => cmd_serve(
            config.as_deref(),
            Overrides {
                port,
                bundle,
                retrain_every,
                candidate_size,
                seed,
            },
        ),
        Command::Import { source, out } => cmd_import(&source, out.as_deref()),
        Command::Export {
            bundle,
            out,
            anonymize,
            concepts,
            salt,
        } => cmd_export(&bundle, &out, anonymize.then(|| AnonymizationPolicy::new(salt.into_bytes(), concepts))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn build_spec(a: &SpecArgs) -> Result<SyntheticSpec, Failure> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io(path))?;
            toml::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?
        }
        None => match a.preset {
            Preset::Default => SyntheticSpec::default(),
            Preset::Semantic => SyntheticSpec::semantic_default(),
        },
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(h) = a.holdout {
        spec.holdout = h;
    }
    if let Some(l) = a.links_per_node {
        spec.links_per_node = l;
    }
    if let Some(l) = a.layering {
        spec.layering = l;
    }
    if a.triadic.is_some() || a.affinity.is_some() || a.recency.is_some() {
        spec.mechanisms = MechanismMix {
            triadic_closure: a.triadic.unwrap_or(0.0),
            type_affinity: a.affinity.unwrap_or(0.0),
            temporal_recency: a.recency.unwrap_or(0.0),
        };
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_generate(a: &SpecArgs, out: &Path, name: Option<String>) -> Result<(), Failure> {
    let spec = build_spec(a)?;
    let data = generate(&spec)?;
    let mut bundle = GraphBundle::snapshot(data.visible.clone());
    bundle.manifest = Some(Manifest::of(&data.visible, name));
    storage::write_bundle(out, &bundle, None)?;
    write_hidden(&out.join(HIDDEN_FILE), &data.visible, &data.hidden)?;
    println!(
        "wrote {}: {} nodes, {} visible links, {} hidden",
        out.display(),
        data.visible.node_count(),
        data.visible.link_count(),
        data.hidden.len()
    );
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Invalid(format!("bad seed list '{s}'"));
    let num = |x: &str| x.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mode = PredictionMode::parse(&a.mode).ok_or_else(|| Failure::Invalid(format!("unknown mode '{}'", a.mode)))?;
    let scoring = match a.scoring.as_str() {
        "learned" => Scoring::Learned,
        "zero" => Scoring::Zero,
        metric => {
            let e = kglf_core::MetricEnsemble::default_for(mode);
            let i = e
                .position(metric)
                .ok_or_else(|| Failure::Invalid(format!("unknown scoring '{metric}'")))?;
            let mut w = vec![0.0; e.len()];
            w[i] = 1.0;
            Scoring::Fixed(w)
        }
    };
    let config = SimulationConfig {
        mode,
        batch_size: a.batch_size,
        candidate_size: a.candidate_size,
        retrain_every: a.retrain_every,
        training_size: a.training_size,
        gp: GpConfig {
            population_size: a.population,
            max_iterations: a.max_iterations,
            ..Default::default()
        },
        scoring,
        seed: 0,
    };
    config.gp.validate().map_err(|e| Failure::Invalid(e.to_string()))?;
    let seeds = parse_seeds(&a.seeds)?;
    let reports = match &a.bundle {
        Some(dir) => {
            let g: KnowledgeGraph = storage::import_bundle(dir)?;
            let hidden = read_hidden(&dir.join(HIDDEN_FILE), &g)?;
            seeds
                .iter()
                .map(|&seed| simulate(&g, &hidden, a.budget, &SimulationConfig { seed, ..config.clone() }))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => run_experiment(&build_spec(&a.spec)?, a.budget, &config, &seeds)?,
    };
    print_summary(&reports);
    if let Some(out) = &a.out {
        let files = write_report(out, &reports)?;
        println!("runs written to {}", files.runs.display());
    }
    Ok(())
}

fn print_summary(reports: &[ExperimentReport]) {
    println!("seed  feedback  found/hidden  tp_genetic  tp_baseline  uplift  ks");
    for r in reports {
        println!(
            "{:>4}  {:>8}  {:>5}/{:<6}  {:>10.4}  {:>11.4}  {:>6}  {:.3}",
            r.seed,
            r.feedback_used,
            r.hidden_found,
            r.hidden_total,
            r.tp_genetic,
            r.tp_baseline,
            r.uplift.map_or_else(|| "n/a".into(), |u| format!("{u:.3}")),
            r.ks_statistic
        );
    }
    let hits = reports.iter().filter(|r| r.uplift.is_some_and(|u| u >= 1.5)).count();
    println!("uplift >= 1.5 on {hits}/{} seeds", reports.len());
}

fn cmd_report(runs: &Path, out: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(runs).map_err(io(runs))?;
    let reports: Vec<ExperimentReport> =
        serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", runs.display())))?;
    let files = write_report(out, &reports)?;
    for p in [files.runs, files.hit_rates, files.summary, files.similarity_cdf, files.weights] {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_serve(config: Option<&Path>, overrides: Overrides) -> Result<(), Failure> {
    let base = match config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    let config = base.with_overrides(overrides)?;
    let state = match &config.bundle {
        Some(_) => AppState::open(config)?,
        None => {
            return Err(Failure::Invalid("serve needs a bundle (--bundle or `bundle` in the config file)".into()))
        }
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Other(e.to_string()))?;
    rt.block_on(kglf_service::serve(state, |addr| {
        println!("listening on http://{addr}");
    }))?;
    Ok(())
}

fn print_manifest(g: &KnowledgeGraph) {
    let m = Manifest::of(g, None);
    println!("{} nodes, {} links, {} non-links", m.nodes, m.links, m.non_links);
}

fn cmd_import(source: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let bundle = if source.is_dir() {
        storage::read_bundle(source)?
    } else {
        let text = fs::read_to_string(source).map_err(io(source))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", source.display())))?;
        let files: BTreeMap<String, String> = serde_json::from_value(doc["files"].clone())
            .map_err(|e| Failure::Invalid(format!("{}: no `files` map: {e}", source.display())))?;
        storage::parse_bundle(&files)?
    };
    let live = bundle.live_graph()?;
    print_manifest(&live);
    if let Some(out) = out {
        let mut compacted = GraphBundle::snapshot(live);
        compacted.weights = bundle.weights;
        storage::write_bundle(out, &compacted, None)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_export(bundle: &Path, out: &Path, policy: Option<AnonymizationPolicy>) -> Result<(), Failure> {
    let b = storage::read_bundle(bundle)?;
    let mut compacted = GraphBundle::snapshot(b.live_graph()?);
    compacted.weights = b.weights;
    storage::write_bundle(out, &compacted, policy.as_ref())?;
    print_manifest(&compacted.graph);
    println!("wrote {}{}", out.display(), if policy.is_some() { " (anonymized)" } else { "" });
    Ok(())
}
