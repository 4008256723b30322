use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use semiclassical_control::experiment::{execute, resolve_config, summarize_runs, Verb};
use semiclassical_control::Error;

#[derive(Parser)]
#[command(name = "sccontrol", version, about = "Potential recovery for the semiclassical Schrodinger equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve of the configured potential.
    Solve(RunArgs),
    /// Write synthetic observations (and the Test II dataset).
    GenerateData(RunArgs),
    /// Train the surrogate for the configured problem.
    Train(RunArgs),
    /// Temporal self-convergence study.
    Convergence(RunArgs),
    /// Sensitivity of the terminal field to z versus eps.
    Regularity(RunArgs),
    /// Summarize the run directories under --out.
    Report {
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory for the run; defaults to `output_dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted override, e.g. `--set solve.N_t=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::NumericalAbort { .. } => 3,
        _ => 1,
    }
}

fn run(verb: Verb, args: RunArgs) -> Result<(), Error> {
    let base = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::Config {
            path: p.display().to_string(),
            message: e.to_string(),
        })?),
        None => None,
    };
    let cfg = resolve_config(base.as_deref(), &args.overrides, args.seed)?;
    let root = args.out.unwrap_or_else(|| cfg.output_dir.clone());
    let (report, outcome) = execute(verb, &cfg);
    let dir = report.write(&root)?;
    println!("{}", dir.display());
    print!("{}", report.metrics_json()?);
    println!();
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run(Verb::Solve, a),
        Command::GenerateData(a) => run(Verb::GenerateData, a),
        Command::Train(a) => run(Verb::Train, a),
        Command::Convergence(a) => run(Verb::Convergence, a),
        Command::Regularity(a) => run(Verb::Regularity, a),
        Command::Report { out } => summarize_runs(&out).map(|s| print!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
