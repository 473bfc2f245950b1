//! Command-line front end: config loading, flag overrides, experiment
//! dispatch, and the exit-code contract (0 success, 2 bad config or input,
//! 3 work budget exceeded, 4 failed certificate).

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{default_config, Config, EXPERIMENTS};
use output::RunState;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("budget: {0}")]
    Budget(String),
    #[error("certificate: {0}")]
    Certificate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Certificate(_) => 4,
        }
    }
}

impl From<ldev::Error> for CliError {
    fn from(e: ldev::Error) -> Self {
        match &e {
            ldev::Error::Budget { .. } => CliError::Budget(e.to_string()),
            ldev::Error::Certificate { .. } => CliError::Certificate(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ldev",
    version,
    about = "Certified tail and free-energy experiments on product measures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run an experiment and write <experiment>.csv plus <experiment>_audit.json.
    Run(RunArgs),
    /// Check a config file and report the first problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List runnable experiments.
    ListExperiments,
}

#[derive(Args)]
pub struct RunArgs {
    /// Experiment name (see list-experiments); uses built-in defaults
    /// unless --config is given.
    #[arg(long)]
    pub experiment: Option<String>,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory. Default: $LDEV_OUT, then ./out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the run seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override the log2 state budget for exact enumeration.
    #[arg(long)]
    pub budget_states: Option<u32>,
    /// Append the closed-form reference column (triangles experiment only).
    #[arg(long)]
    pub lz_overlay: bool,
}

fn load_config(args: &RunArgs) -> Result<Config, CliError> {
    match (&args.config, &args.experiment) {
        (Some(path), maybe_name) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
            let cfg = Config::parse(&text)?;
            if let Some(name) = maybe_name {
                if *name != cfg.experiment {
                    return Err(CliError::Config(format!(
                        "--experiment {name:?} disagrees with the config's {:?}",
                        cfg.experiment
                    )));
                }
            }
            Ok(cfg)
        }
        (None, Some(name)) => default_config(name),
        (None, None) => {
            Err(CliError::Config("pass --experiment or --config".into()))
        }
    }
}

fn resolve_out(args: &RunArgs, cfg: &Config) -> PathBuf {
    if let Some(dir) = &args.out {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("LDEV_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    cfg.run.out.clone().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(b) = args.budget_states {
        cfg.run.budget_states = b;
    }
    if args.lz_overlay {
        cfg.run.lz_overlay = true;
    }
    // overrides can invalidate a previously valid config
    cfg.validate()?;

    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }

    let out_dir = resolve_out(&args, &cfg);
    let config_echo = serde_json::to_value(&cfg)
        .map_err(|e| CliError::Io(format!("encoding config echo: {e}")))?;
    let mut state = RunState::new(cfg.run.lz_overlay);
    match experiments::run_experiment(&cfg, &mut state) {
        Ok(()) => {
            let files =
                output::write_outputs(&out_dir, &cfg.experiment, &state, &config_echo, false)?;
            println!("wrote {}", files.csv.display());
            println!("wrote {}", files.audit.display());
            Ok(())
        }
        Err(e) => {
            // flush whatever finished, clearly marked as incomplete
            if !state.rows.is_empty() {
                if let Ok(files) =
                    output::write_outputs(&out_dir, &cfg.experiment, &state, &config_echo, true)
                {
                    eprintln!("partial results: {}", files.csv.display());
                }
            }
            Err(e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", config.display())))?;
            let cfg = Config::parse(&text)?;
            println!("ok: {} experiment, schema {}", cfg.experiment, cfg.schema);
            Ok(())
        }
        Command::ListExperiments => {
            for (name, blurb) in EXPERIMENTS {
                println!("{name:<14} {blurb}");
            }
            Ok(())
        }
    }
}

pub fn run_main() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
