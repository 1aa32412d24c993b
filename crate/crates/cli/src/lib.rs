//! The `han-ddi` command line: argument parsing, configuration layering and
//! one function per subcommand. Every subcommand writes into its own
//! directory under the configured output directory and finishes with a
//! `manifest.json`.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Precision, RunConfig};

/// Exit status for a command that ran but whose checks failed.
pub const EXIT_CHECK_FAILED: i32 = 3;
/// Exit status for malformed arguments or configuration.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(han_ddi::Error),
    /// The command completed but a declared check did not hold.
    CheckFailed(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Core(_) => EXIT_ERROR,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<han_ddi::Error> for CliError {
    fn from(e: han_ddi::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "han-ddi",
    version,
    about = "Heterogeneous graph attention for drug-drug interaction prediction"
)]
pub struct Cli {
    /// INI configuration file; relative paths inside it are resolved against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Floating-point width for training and scoring.
    #[arg(long, global = true, value_parser = ["32", "64"])]
    pub precision: Option<String>,
    /// Split protocol: edges or coldstart.
    #[arg(long, global = true)]
    pub protocol: Option<String>,
    /// Drug features: espf or fingerprint.
    #[arg(long, global = true)]
    pub features: Option<String>,
    /// Comma-separated meta-path names, e.g. DID-1,DID-3.
    #[arg(long, global = true)]
    pub metapaths: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Overrides any setting, e.g. --set train.epochs=50 (repeatable).
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted synthetic dataset and a config file pointing at it.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        drugs: usize,
        #[arg(long, default_value_t = 10)]
        proteins: usize,
    },
    /// Assemble and validate the network; write it with its statistics.
    BuildGraph,
    /// Write the commuting matrix of every selected meta-path.
    Metapaths,
    /// Write the substructure vocabulary and the drug feature matrix.
    Featurize,
    /// Train the full model and evaluate every split partition.
    Train,
    /// Score the split partitions with a trained checkpoint.
    Evaluate {
        /// Defaults to the checkpoint written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train with one attention level fixed: mp (random node attention) or n (uniform meta-path weights).
    Ablate {
        #[arg(long)]
        variant: String,
    },
    /// Score drug pairs listed one per line as `drug<TAB>drug`.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Compare analytic and numeric gradients of the full model on a small synthetic network.
    Gradcheck {
        /// Coordinates sampled per parameter tensor.
        #[arg(long, default_value_t = 5)]
        probes: usize,
        #[arg(long, default_value_t = han_ddi::verify::GRADCHECK_EPSILON)]
        epsilon: f64,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

/// Layers defaults, the config file, `--set` overrides and the dedicated
/// flags, in increasing precedence.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let cwd = Path::new(".");
    if let Some(path) = &cli.config {
        let text = han_ddi::io::read_to_string(path)?;
        let base = path.parent().unwrap_or(cwd);
        cfg.apply_ini(&text, base)?;
    }
    for assignment in &cli.set {
        cfg.apply_assignment(assignment, cwd)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &cli.precision {
        cfg.precision = Precision::parse(p)?;
    }
    if let Some(p) = &cli.protocol {
        cfg.set("split", "protocol", p, cwd)?;
    }
    if let Some(f) = &cli.features {
        cfg.set("features", "mode", f, cwd)?;
    }
    if let Some(m) = &cli.metapaths {
        cfg.set("graph", "metapaths", m, cwd)?;
    }
    if let Some(o) = &cli.output {
        cfg.paths.output = o.clone();
    }
    Ok(cfg)
}

/// Runs one parsed invocation and returns the directory it wrote.
pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Synth {
            dir,
            drugs,
            proteins,
        } => commands::synth(&cfg, dir, *drugs, *proteins),
        Command::BuildGraph => commands::build_graph(&cfg),
        Command::Metapaths => commands::metapaths(&cfg),
        Command::Featurize => commands::featurize(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Evaluate { checkpoint } => commands::evaluate(&cfg, checkpoint.as_deref()),
        Command::Ablate { variant } => commands::ablate(&cfg, variant),
        Command::Predict { checkpoint, pairs } => {
            commands::predict(&cfg, checkpoint.as_deref(), pairs)
        }
        Command::Gradcheck {
            probes,
            epsilon,
            inject_fault,
        } => commands::gradcheck(&cfg, *probes, *epsilon, inject_fault.as_deref()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests;
