//! Batch front end: builds tradeoff tables, optimizes single links, sizes
//! multi-user allocations, runs the Monte Carlo simulator, and emits
//! plot-ready sweep data. Commands write files only; nothing is interactive.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Lib(#[from] predlink::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "predlink", version, about = "Prediction/communication co-design toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command. The config file, when given, overrides
/// flag values key by key.
#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat key=value config file; entries override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for emitted files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// RNG seed; mandatory for the stochastic commands (tradeoff, simulate).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct LinkArgs {
    #[arg(long)]
    tx_power_dbm: Option<f64>,
    #[arg(long)]
    noise_psd_dbm_hz: Option<f64>,
    #[arg(long)]
    distance_km: Option<f64>,
    #[arg(long)]
    backhaul_delay_ms: Option<f64>,
    #[arg(long)]
    tx_duration_ms: Option<f64>,
    #[arg(long)]
    coherence_time_ms: Option<f64>,
    #[arg(long)]
    horizon_cap_ms: Option<f64>,
    /// "fixed:<gain>" or "rayleigh:<nodes>".
    #[arg(long)]
    fading: Option<String>,
}

#[derive(Args, Debug, Default)]
struct TaskArgs {
    #[arg(long)]
    dmax_ms: Option<f64>,
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    delta_pct: Option<f64>,
    #[arg(long)]
    lambda_pps: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct SearchArgs {
    #[arg(long)]
    w0_khz: Option<f64>,
    #[arg(long)]
    wmax_khz: Option<f64>,
    #[arg(long)]
    b0_bits: Option<u64>,
    #[arg(long)]
    bmax_bits: Option<u64>,
    #[arg(long)]
    b_step_bits: Option<u64>,
    /// "target_squared" or "abs:<tolerance>".
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    max_iters: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate trajectories, fit the predictor, and emit the tradeoff table
    /// plus per-threshold error-vs-horizon curves.
    Tradeoff {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        sequences: Option<u64>,
        #[arg(long)]
        eval_sequences: Option<u64>,
        #[arg(long)]
        seq_len_slots: Option<u64>,
        /// "ou" or "sinusoid".
        #[arg(long)]
        process: Option<String>,
        #[arg(long)]
        ou_reversion_rate: Option<f64>,
        #[arg(long)]
        ou_noise_std: Option<f64>,
        #[arg(long)]
        ou_init_vel_std: Option<f64>,
        #[arg(long)]
        ou_base_position: Option<f64>,
        #[arg(long)]
        sin_components: Option<u64>,
        #[arg(long)]
        sin_max_freq_hz: Option<f64>,
        #[arg(long)]
        sin_offset: Option<f64>,
        #[arg(long)]
        history_slots: Option<u64>,
        #[arg(long)]
        horizon_slots: Option<u64>,
        #[arg(long)]
        ar_order: Option<u64>,
        /// Comma-separated horizon grid in ms.
        #[arg(long)]
        horizons_ms: Option<String>,
        /// Comma-separated JND threshold grid in percent.
        #[arg(long)]
        deltas_pct: Option<String>,
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Single-user bandwidth/bits optimization against a tradeoff table.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        table_file: Option<PathBuf>,
    },
    /// Multi-user bandwidth curves: task-oriented versus task-agnostic.
    Allocate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        table_file: Option<PathBuf>,
        #[arg(long)]
        n_tasks: Option<u64>,
        #[arg(long)]
        critical_ratio: Option<f64>,
        #[arg(long)]
        delta_crit_pct: Option<f64>,
        #[arg(long)]
        delta_noncrit_pct: Option<f64>,
        #[arg(long)]
        wmax_min_khz: Option<f64>,
        #[arg(long)]
        wmax_max_khz: Option<f64>,
        #[arg(long)]
        wmax_steps: Option<u64>,
        /// Bypass the solver with an injected critical-class optimum (kHz).
        #[arg(long)]
        inject_w_crit_khz: Option<f64>,
        /// Bypass the solver with an injected non-critical optimum (kHz).
        #[arg(long)]
        inject_w_noncrit_khz: Option<f64>,
    },
    /// Slot-level Monte Carlo run plus the paired placement loss sweep.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        table_file: Option<PathBuf>,
        #[arg(long)]
        w_khz: Option<f64>,
        #[arg(long)]
        bits: Option<u64>,
        #[arg(long)]
        n_slots: Option<u64>,
        /// "receiver" or "transmitter".
        #[arg(long)]
        placement: Option<String>,
        /// Force the per-block decoding error probability.
        #[arg(long)]
        eps_d_override: Option<f64>,
        /// Comma-separated decode-loss levels for the paired sweep.
        #[arg(long)]
        loss_sweep: Option<String>,
        #[arg(long)]
        sweep_slots: Option<u64>,
    },
    /// Bound sweeps: error versus delay bound, bits, and bandwidth.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        table_file: Option<PathBuf>,
        #[arg(long)]
        w_khz: Option<f64>,
        #[arg(long)]
        bits: Option<u64>,
        #[arg(long)]
        dmax_min_ms: Option<f64>,
        #[arg(long)]
        dmax_max_ms: Option<f64>,
        #[arg(long)]
        dmax_step_ms: Option<f64>,
        #[arg(long)]
        bits_min: Option<u64>,
        #[arg(long)]
        bits_max: Option<u64>,
        #[arg(long)]
        bits_step: Option<u64>,
        #[arg(long)]
        w_min_khz: Option<f64>,
        #[arg(long)]
        w_max_khz: Option<f64>,
        #[arg(long)]
        w_steps: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("predlink: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
