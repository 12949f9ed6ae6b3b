use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homopt::{cmd_optimize, cmd_solve, cmd_sweep, cmd_verify, Axis, Exit, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "homopt", version, about = "Homogenized optimal control: solve, optimize, verify, sweep")]
struct Cli {
    /// JSON run configuration. Missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized verification inputs (default: config `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the state equation for the configured source and control.
    Solve,
    /// Solve the optimality system and evaluate the cost.
    Optimize,
    /// Run the invariant suite and print a pass/fail table.
    Verify,
    /// Run `optimize` for each value of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

fn exit(e: Exit) -> ExitCode {
    ExitCode::from(e.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit(Exit::Config) } else { exit(Exit::Success) };
        }
    };
    let cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return exit(Exit::Config);
            }
        },
        None => RunConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let status = match &cli.command {
        Command::Solve => cmd_solve(&cfg, &out),
        Command::Optimize => cmd_optimize(&cfg, &out),
        Command::Verify => cmd_verify(&cfg, cli.seed.unwrap_or(cfg.seed), &out),
        Command::Sweep { axis, values } => cmd_sweep(&cfg, *axis, values, cli.workers, &out),
    };
    exit(status)
}
