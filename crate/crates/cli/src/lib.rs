//! `qcomp` command-line driver.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{ArgGroup, Parser, Subcommand};

use crate::commands::{ChannelSource, Method, Target};
pub use crate::config::Config;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qcomp", version, about = "Braid + T compilation of single-qubit unitaries and channels")]
pub struct Cli {
    /// Flat `key = value` config file, applied over the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base preset: default, smoke or wide.
    #[arg(long, global = true, default_value = "default")]
    pub preset: String,
    /// Override one key; repeatable and applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads for all internal parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy; writes io.checkpoint and the io.log CSV.
    Train {
        #[arg(long)]
        resume: bool,
        /// Accept a checkpoint whose config hash differs.
        #[arg(long)]
        force: bool,
        /// Stop with a checkpoint once this many updates are done.
        #[arg(long)]
        until: Option<usize>,
    },
    /// Compile one unitary.
    #[command(group(ArgGroup::new("source").required(true).args(["target", "matrix"])))]
    Compile {
        /// Gate tokens whose product is the target.
        #[arg(long)]
        target: Option<String>,
        /// File with 8 reals: row-major real/imaginary pairs.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sk")]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose a qubit channel into elementary channels.
    #[command(group(ArgGroup::new("source").required(true).args(["kraus", "transfer"])))]
    DecomposeChannel {
        /// One Kraus operator per line, 8 reals each.
        #[arg(long)]
        kraus: Option<PathBuf>,
        /// 12 reals: row-major distortion then shift.
        #[arg(long)]
        transfer: Option<PathBuf>,
        /// Overrides decomposer.epsilon.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Plan file; defaults to `<io.out_dir>/plan.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also compile proper pre/final rotations with SK.
        #[arg(long)]
        compile_maps: bool,
    },
    /// Run compilers over a seeded dataset and write CSVs to io.out_dir.
    Bench,
    /// Print the T-count lower bound.
    Bound {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        group_order: usize,
        #[arg(long)]
        epsilon: f64,
    },
    /// Build (or load) the cached SK net.
    BuildNet {
        /// Defaults to sk.depth.
        #[arg(long)]
        depth: Option<usize>,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut cfg = Config::load(&cli.preset, cli.config.as_deref(), &cli.set)?;
    match cli.command {
        Command::Train { resume, force, until } => commands::train(&cfg, resume, force, until),
        Command::Compile {
            target,
            matrix,
            method,
            out,
        } => {
            let t = match (target, matrix) {
                (Some(t), _) => Target::Tokens(t),
                (None, Some(m)) => Target::Matrix(m),
                (None, None) => unreachable!("clap requires a source"),
            };
            commands::compile_target(&cfg, &t, method, out.as_deref())
        }
        Command::DecomposeChannel {
            kraus,
            transfer,
            epsilon,
            out,
            compile_maps,
        } => {
            if let Some(e) = epsilon {
                cfg.set("decomposer.epsilon", &e.to_string())?;
                cfg.validate()?;
            }
            let src = match (kraus, transfer) {
                (Some(k), _) => ChannelSource::Kraus(k),
                (None, Some(t)) => ChannelSource::Transfer(t),
                (None, None) => unreachable!("clap requires a source"),
            };
            let out = out.unwrap_or_else(|| cfg.out_dir.join("plan.jsonl"));
            commands::decompose(&cfg, &src, &out, compile_maps)
        }
        Command::Bench => commands::bench(&cfg),
        Command::Bound {
            dim,
            group_order,
            epsilon,
        } => commands::bound(dim, group_order, epsilon),
        Command::BuildNet { depth } => commands::build_net(&cfg, depth.unwrap_or(cfg.sk_depth)),
    }
}
