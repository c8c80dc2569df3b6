use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use wpfl_core::channel::{instance_from_json, instance_to_json};
use wpfl_core::model::Mode;
use wpfl_core::{run_benchmark, RunOptions, Scheme};
use wpfl_experiments::sweep::instance_at;
use wpfl_experiments::{emit_csv, run_sweep, run_sweep_with, to_csv_string, ExperimentConfig};

const CONFIG_ERROR: u8 = 1;
const PARTIAL_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "wpfl", version, about = "Completion-time sweeps for wirelessly powered federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Uplink {
    Fdma,
    Noma,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its summary table as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output path; overrides the config's `output`. Stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Uplink of the base system, overriding the config.
        #[arg(long, value_enum)]
        mode: Option<Uplink>,
        /// Also write every individual run as JSON.
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Check a config file without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-run one saved instance and print its trace.
    Replay {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "S2FL")]
        scheme: Scheme,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Print the instance JSON of one realization of a config.
    Instance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("wpfl: {msg}");
    ExitCode::from(CONFIG_ERROR)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, workers, mode, runs } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            if let Some(m) = mode {
                cfg.base.system.mode = match m {
                    Uplink::Fdma => Mode::Fdma,
                    Uplink::Noma => Mode::Noma,
                };
            }
            let result = match workers {
                Some(k) => run_sweep_with(&cfg, k),
                None => run_sweep(&cfg),
            };
            let result = match result {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            let written = match out.or(cfg.output.clone()) {
                Some(path) => emit_csv(&result.table, &path),
                None => to_csv_string(&result.table).map(|s| print!("{s}")),
            };
            if let Err(e) = written {
                return config_error(e);
            }
            if let Some(path) = runs {
                let text = serde_json::to_string_pretty(&result.runs).expect("runs serialize");
                if let Err(e) = std::fs::write(&path, text) {
                    return config_error(format!("cannot write {}: {e}", path.display()));
                }
            }
            let failed = result.failures();
            if failed > 0 {
                eprintln!("wpfl: {failed} of {} runs failed", result.runs.len());
                return ExitCode::from(PARTIAL_FAILURE);
            }
            ExitCode::SUCCESS
        }
        Command::ValidateConfig { config } => match ExperimentConfig::load(&config) {
            Ok(c) => {
                let runs = c.sweep.grid.len() * c.schemes.len() * c.realizations;
                println!("ok: {} over {} points, {runs} runs", c.sweep.variable, c.sweep.grid.len());
                ExitCode::SUCCESS
            }
            Err(e) => config_error(e),
        },
        Command::Replay { instance, scheme, format } => {
            let text = match std::fs::read_to_string(&instance) {
                Ok(t) => t,
                Err(e) => return config_error(format!("cannot read {}: {e}", instance.display())),
            };
            let inst = match instance_from_json(&text) {
                Ok(i) => i,
                Err(e) => return config_error(e),
            };
            match run_benchmark(&inst, scheme, &RunOptions::default()) {
                Ok(trace) => {
                    match format {
                        Format::Csv => print!("{}", trace.to_csv()),
                        Format::Json => println!("{}", trace.to_json()),
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("wpfl: {e}");
                    ExitCode::from(PARTIAL_FAILURE)
                }
            }
        }
        Command::Instance { config, point, realization } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            match instance_at(&cfg, point, realization) {
                Ok(i) => {
                    println!("{}", instance_to_json(&i));
                    ExitCode::SUCCESS
                }
                Err(e) => config_error(e),
            }
        }
    }
}
