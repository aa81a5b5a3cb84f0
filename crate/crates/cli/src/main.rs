//! `modesim run <config>`: run one experiment and write its artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modesim::experiment::{parse_config, run_experiment, EvalMode};
use modesim::Error;

#[derive(Parser)]
#[command(name = "modesim", version, about = "Random-phase mode interferometry and waveguide experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "mc")]
    analytic: bool,
    #[arg(long)]
    mc: bool,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::Numerical(_) | Error::Infeasible(_) => EXIT_RUNTIME,
        Error::Io { .. } => EXIT_IO,
    }
}

fn run(args: RunArgs) -> Result<(), (u8, String)> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = parse_config(&text).map_err(|e| (exit_code(&e), format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials < 2 {
            return Err((EXIT_CONFIG, "--trials must be at least 2".into()));
        }
        config.trials = trials;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if args.analytic {
        config.mode = EvalMode::Analytic;
    }
    if args.mc {
        config.mode = EvalMode::MonteCarlo;
    }
    let report = run_experiment(&config, args.workers).map_err(|e| (exit_code(&e), e.to_string()))?;
    for a in &report.artifacts.advisories {
        eprintln!("advisory: {a}");
    }
    println!(
        "{} finished in {:.2} s, results in {}",
        config.experiment.name(),
        report.wall_time_seconds,
        report.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
