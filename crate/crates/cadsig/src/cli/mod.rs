//! The `cadsig` command surface.
//!
//! Subcommands: `gen-data`, `train`, `infer`, `autocomplete`, `eval`.
//! Exit codes are a stable scripting contract: 0 success, 1 validation
//! error, 2 IO error, 3 internal error. Worker parallelism is capped by
//! the `CADSIG_THREADS` environment variable; all randomness funnels
//! through the `--seed` flags.

mod commands;
mod manifest;
mod repl;

pub use manifest::RunManifest;
pub use repl::interactive_session;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "cadsig",
    version,
    about = "Sketch-and-extrude design-history recovery from point clouds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    #[command(name = "gen-data")]
    GenData {
        /// Generator config JSON (defaults when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Total sample count (splits scale proportionally).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Points per cloud.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Train a model on a generated dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Model preset: tiny, desk, or full.
        #[arg(long, default_value = "desk")]
        model_preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Resume from the run directory's latest checkpoint.
        #[arg(long, default_value_t = false)]
        resume: bool,
    },
    /// Recover a design history from a point cloud.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        /// Input cloud (binary PLY; normals estimated when absent).
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long, default_value_t = 5)]
        hybrid_k: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Points per candidate reconstruction for CD scoring.
        #[arg(long, default_value_t = 2048)]
        eval_points: usize,
    },
    /// Complete a partial design history (batch or interactive).
    Autocomplete {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        /// Prefix program JSON whose first step seeds the completion
        /// (required in batch mode; forbidden with --interactive).
        #[arg(long)]
        prefix: Option<PathBuf>,
        /// Step-by-step candidate browsing on stdin/stdout.
        #[arg(long, default_value_t = false)]
        interactive: bool,
        #[arg(long)]
        out: PathBuf,
        /// Candidates per step.
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2048)]
        eval_points: usize,
    },
    /// Score predictions against ground truth.
    Eval {
        /// Directory of `<id>.program.json` predictions.
        #[arg(long)]
        pred_dir: PathBuf,
        /// Ground-truth dataset directory (gen-data output).
        #[arg(long)]
        gt_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8192)]
        eval_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Stable exit-code contract.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::Internal(m) => m,
        }
    }
}

/// Cap the global worker pool from `CADSIG_THREADS` (best effort; the
/// first caller wins the global pool).
pub fn init_threads_from_env() {
    if let Ok(v) = std::env::var("CADSIG_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

/// Binary entry point: parse, dispatch, map errors to exit codes.
pub fn run() -> i32 {
    init_threads_from_env();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
