use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abac_miner::metrics::WscWeights;
use abac_miner::model::Policy;
use abac_miner::pipeline::{self, ExperimentConfig, RunManifest};
use abac_miner::{io as abac_io, Error};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

/// Mine ABAC policies from access logs.
///
/// Any configuration field can be overridden with `--<dotted.path>=<value>`
/// (for example `--mining.k.auto.k_max=12` or `--enhance=false`) or with
/// `--set <dotted.path>=<value>`.
#[derive(Parser)]
#[command(name = "abac-miner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth policy and its access log.
    Generate(ConfigArgs),
    /// Mine, enhance and evaluate a policy from a log.
    Mine {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        log: PathBuf,
        /// Schema JSON; inferred from the log when absent.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Evaluate a policy against a log.
    Evaluate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Write the report JSON here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate the results of several runs.
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid search for the extraction thresholds.
    Tune {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    /// `dotted.path=value` override; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Spec(_) | Error::InvalidFraction(_) => 2,
        Error::CapExceeded { .. } => 4,
        _ => 3,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure {
            code: exit_code(&err),
            error: err.into(),
        }
    }
}

/// Keeps the exit code of `err` and names the file it concerns.
fn file_error(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |err| Failure {
        code: exit_code(&err),
        error: anyhow::Error::from(err).context(format!("reading {}", path.display())),
    }
}

fn config_error(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn data_error(error: anyhow::Error) -> Failure {
    Failure { code: 3, error }
}

const CONFIG_KEYS: [&str; 10] = [
    "dataset",
    "policy",
    "universe",
    "transforms",
    "discretizer",
    "mining",
    "tuning",
    "enhance",
    "enhancement",
    "evaluation",
];

fn is_config_path(name: &str) -> bool {
    CONFIG_KEYS.contains(&name.split('.').next().unwrap_or(""))
}

/// Splits configuration flags (`--a.b=v`, `--a.b v`) out of the arguments
/// as overrides.
fn extract_dotted(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--") {
            Some(flag) if is_config_path(flag.split('=').next().unwrap_or("")) => {
                if flag.contains('=') {
                    overrides.push(flag.to_string());
                } else if let Some(value) = it.next() {
                    overrides.push(format!("{flag}={value}"));
                } else {
                    overrides.push(format!("{flag}="));
                }
            }
            _ => rest.push(arg),
        }
    }
    (rest, overrides)
}

fn load_config(args: &ConfigArgs, dotted: &[String]) -> Result<ExperimentConfig, Failure> {
    let mut value: serde_json::Value = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(config_error)?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(config_error)?
        }
        None => serde_json::json!({}),
    };
    if let Some(seed) = args.seed {
        value["seed"] = seed.into();
    }
    if let Some(dir) = &args.output_dir {
        value["output_dir"] = dir.to_string_lossy().into_owned().into();
    }
    if value.get("seed").is_none() {
        return Err(config_error(anyhow!("a seed is required (--seed or `seed` in the config)")));
    }
    let base = ExperimentConfig::from_json(&value.to_string()).map_err(Failure::from)?;
    let overrides: Vec<&String> = args.overrides.iter().chain(dotted).collect();
    Ok(base.with_overrides(&overrides)?)
}

fn read_log(path: &Path, schema: Option<&PathBuf>) -> Result<abac_miner::model::AccessLog, Failure> {
    let schema = schema
        .map(|p| pipeline::read_schema(p).map_err(file_error(p)))
        .transpose()?;
    abac_io::read_log_file(path, schema.as_ref()).map_err(file_error(path))
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(data_error),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| data_error(e.into())),
    }
}

fn run(cli: Cli, dotted: &[String]) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(args) => {
            let config = load_config(&args, dotted)?;
            let manifest = pipeline::generate(&config)?;
            let c = &manifest.log_counts;
            println!(
                "|L| = {}  |L+| = {}  |L-| = {}",
                c.get("L").copied().unwrap_or(0),
                c.get("L+").copied().unwrap_or(0),
                c.get("L-").copied().unwrap_or(0)
            );
            if let Some(flips) = manifest.noise_flips {
                println!("flipped decisions: {flips}");
            }
            println!("wrote {}", config.output_dir.display());
        }
        Command::Mine { config, log, schema } => {
            let config = load_config(&config, dotted)?;
            let log = read_log(&log, schema.as_ref())?;
            let manifest = pipeline::mine(&log, &config)?;
            let r = manifest.report.as_ref().expect("mine always reports");
            println!(
                "k = {}  rules = {}  ACC = {:.4}  F = {:.4}  WSC = {}  Q = {:.4}",
                manifest.optimal_k.unwrap_or(0),
                r.rule_count,
                r.accuracy,
                r.f_score,
                r.wsc,
                r.quality
            );
            println!("wrote {}", config.output_dir.display());
        }
        Command::Evaluate { policy, log, output } => {
            let text = fs::read_to_string(&policy)
                .with_context(|| format!("reading {}", policy.display()))
                .map_err(data_error)?;
            let policy = Policy::from_json(&text)?;
            let log = abac_io::read_log_file(&log, Some(policy.schema())).map_err(file_error(&log))?;
            let report = pipeline::evaluate_files(&policy, &log, &WscWeights::default())?;
            emit(output.as_ref(), &report.to_json()?)?;
        }
        Command::Report { manifests, output } => {
            let manifests = manifests
                .iter()
                .map(|p| RunManifest::read(p).map_err(file_error(p)))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = pipeline::report_rows(&manifests)?;
            let mut buf = Vec::new();
            abac_io::write_table(&pipeline::REPORT_HEADER, rows, &mut buf)?;
            emit(output.as_ref(), &String::from_utf8_lossy(&buf))?;
        }
        Command::Tune { config, log, schema } => {
            let config = load_config(&config, dotted)?;
            let log = read_log(&log, schema.as_ref())?;
            let result = pipeline::tune(&log, &config)?;
            let t = result.thresholds;
            println!(
                "t+ = {}  t- = {}  theta+ = {}  theta- = {}  mean F = {:.4}  folds = {}",
                t.t_pos, t.t_neg, t.theta_pos, t.theta_neg, result.mean_f_score, result.folds_used
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let takes_config = args
        .get(1)
        .is_some_and(|c| ["generate", "mine", "tune"].contains(&c.as_str()));
    let (args, dotted) = if takes_config {
        extract_dotted(args)
    } else {
        (args, Vec::new())
    };
    let cli = Cli::parse_from(args);
    match run(cli, &dotted) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
