use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adtwin::bridge::{build_bridge_model, BridgeAction, BridgeConfig, Mode};
use adtwin::document::{read_model, serialize, write_model};
use adtwin::harness::{
    export_trace, run_cluster_with_traces, run_episode, write_document, write_rows, TraceFormat,
};
use adtwin::{Error, SimRng};
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "adtwin",
    version,
    about = "Active-inference digital twin of a railway bridge"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single episode and write its trace.
    Run(RunArgs),
    /// Run a seeded cluster of episodes and write a report.
    Cluster(ClusterArgs),
    /// Emit the bridge generative model document.
    BuildModel(BuildArgs),
    /// Validate and summarize a model document.
    Inspect(InspectArgs),
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML file with configuration fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// pragmatic_only, mixed or mixed_learning.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Episode length.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "eta-b")]
    eta_b: Option<f64>,
    /// Episode seed, or the seed base of a cluster.
    #[arg(long)]
    seed: Option<u64>,
    /// Mean diagonal of the synthetic confusion matrix.
    #[arg(long)]
    accuracy: Option<f64>,
    /// Comma-separated planner actions, e.g. DN,MA,RO.
    #[arg(long)]
    actions: Option<String>,
    /// Log every policy's G at every step.
    #[arg(long = "full-g")]
    full_g: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// rows (CSV) or document (JSON).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Output directory for report.json and traces; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one trace file per episode.
    #[arg(long)]
    traces: bool,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn resolve_config(args: &ConfigArgs) -> CliResult<BridgeConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => BridgeConfig::default(),
    };
    if let Some(m) = &args.mode {
        cfg.mode = Mode::parse(m).ok_or_else(|| usage(format!("unknown mode {m:?}")))?;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = args.steps {
        cfg.episode_length = v;
    }
    if let Some(v) = args.eta_b {
        cfg.eta_b = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.accuracy {
        cfg.confusion_accuracy = v;
    }
    if let Some(list) = &args.actions {
        let actions = list
            .split(',')
            .map(|s| {
                BridgeAction::parse(s.trim()).ok_or_else(|| usage(format!("unknown action {s:?}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        cfg.actions = Some(actions);
    }
    if args.full_g {
        cfg.full_g = true;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn resolve_format(flag: Option<&str>, out: Option<&Path>) -> CliResult<TraceFormat> {
    if let Some(f) = flag {
        return TraceFormat::parse(f).ok_or_else(|| usage(format!("unknown format {f:?}")));
    }
    let by_extension = out
        .and_then(|p| p.extension())
        .and_then(|e| e.to_str())
        .and_then(TraceFormat::parse);
    Ok(by_extension.unwrap_or(TraceFormat::Rows))
}

fn run(args: RunArgs) -> CliResult<()> {
    let cfg = resolve_config(&args.config)?;
    let format = resolve_format(args.format.as_deref(), args.out.as_deref())?;
    let trace = run_episode(&cfg)?;
    match &args.out {
        Some(path) => export_trace(&trace, path, format)?,
        None => {
            let stdout = io::stdout().lock();
            match format {
                TraceFormat::Rows => write_rows(&trace, stdout)?,
                TraceFormat::Document => write_document(&trace, stdout)?,
            }
        }
    }
    let counts: Vec<String> = BridgeAction::ALL
        .iter()
        .map(|&a| format!("{}={}", a.name(), trace.count(a)))
        .collect();
    eprintln!(
        "seed {} mode {}: {} steps, {:?}, actions {}",
        cfg.seed,
        cfg.mode.name(),
        trace.len(),
        trace.outcome,
        counts.join(" ")
    );
    Ok(())
}

fn cluster(args: ClusterArgs) -> CliResult<()> {
    let cfg = resolve_config(&args.config)?;
    if args.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if args.traces && args.out.is_none() {
        return Err(usage("--traces needs --out"));
    }
    let format = resolve_format(args.format.as_deref(), None)?;
    let (report, traces) = run_cluster_with_traces(&cfg, args.n, cfg.seed)?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.json"), json + "\n")?;
            if args.traces {
                for t in &traces {
                    let name = format!("trace_{}.{}", t.config.seed, format.extension());
                    export_trace(t, &dir.join(name), format)?;
                }
            }
        }
        None => writeln!(io::stdout().lock(), "{json}")?,
    }
    eprintln!(
        "{} episodes, mode {}: {} failures, {} RE actions",
        report.n_episodes,
        cfg.mode.name(),
        report.failures,
        report.re_total
    );
    Ok(())
}

fn build_model(args: BuildArgs) -> CliResult<()> {
    let cfg = resolve_config(&args.config)?;
    let model = build_bridge_model(&cfg, &SimRng::new(cfg.seed))?;
    match &args.out {
        Some(path) => write_model(&model, path)?,
        None => writeln!(io::stdout().lock(), "{}", serialize(&model))?,
    }
    Ok(())
}

fn inspect(args: InspectArgs) -> CliResult<()> {
    let model = read_model(&args.path)?;
    let mut out = io::stdout().lock();
    writeln!(out, "valid model")?;
    for f in &model.factors {
        writeln!(
            out,
            "factor {}: {} states, {} controls{}",
            f.name,
            f.cardinality,
            f.control_cardinality,
            if f.learnable_transitions {
                ", learnable"
            } else {
                ""
            }
        )?;
    }
    for m in &model.modalities {
        writeln!(out, "modality {}: {} outcomes", m.name, m.cardinality)?;
    }
    writeln!(out, "actions: {}", model.actions.join(", "))?;
    writeln!(out, "joint states: {}", model.joint_size())?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidModel(_) | Error::Schema { .. } => EXIT_VALIDATION,
        Error::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Cluster(a) => cluster(a),
        Command::BuildModel(a) => build_model(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            if let Error::InvalidModel(report) = &e {
                eprint!("{report}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
