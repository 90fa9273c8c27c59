use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kdiff_lab::{run, Command, ExperimentConfig, LabError, Report};

/// Numerical laboratory for k-parameterized diffusion targets.
///
/// Exit status: 0 when every check passes, 1 when a check or a run-time
/// invariant fails, 2 on configuration or IO errors.
#[derive(Parser)]
#[command(name = "kdiff-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sweep the optimal loss over k and report the minimizer.
    Theory(RunArgs),
    /// Run gradient flow of the linear denoiser.
    Dynamics(RunArgs),
    /// Train a toy network with a learnable k.
    Train(RunArgs),
    /// Draw samples with the probability-flow ODE.
    Sample(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the `output_dir` key.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Theory(a) => (Command::Theory, a),
        Sub::Dynamics(a) => (Command::Dynamics, a),
        Sub::Train(a) => (Command::Train, a),
        Sub::Sample(a) => (Command::Sample, a),
    };
    match execute(command, &args) {
        Ok(report) => finish(&report),
        Err(err) => {
            eprintln!("error: {err}");
            match err.violated_invariant() {
                Some(name) => {
                    eprintln!("FAIL {name}");
                    ExitCode::from(1)
                }
                None => ExitCode::from(2),
            }
        }
    }
}

fn execute(command: Command, args: &RunArgs) -> Result<Report, LabError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = std::path::absolute(out).map_err(|source| LabError::Io {
            path: out.clone(),
            source,
        })?;
    }
    run(command, &config)
}

fn finish(report: &Report) -> ExitCode {
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    for c in &report.checks {
        println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        let names: Vec<_> = report.failures().collect();
        eprintln!("violated: {}", names.join(", "));
        ExitCode::from(1)
    }
}
