use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use layercraft::{load, run, CliError, Command, EXIT_ERROR, EXIT_OK, EXIT_UNVERIFIED};

#[derive(Parser)]
#[command(name = "layercraft", version, about = "Solvers and boundary-layer expansions for eps Delta^2 psi + (b.grad) Delta psi - c Delta psi = f")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long, env = "LAYERCRAFT_JOBS")]
    jobs: Option<usize>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn execute(args: &Args) -> Result<layercraft::Outcome, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io { path: args.config.clone(), source })?;
    let resolved = load(&text)?;
    let out = args.out.clone().unwrap_or_else(|| resolved.config.outputs.directory.clone());
    let jobs = args
        .jobs
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    run(args.command, &resolved, &out, jobs)
}

fn main() -> ExitCode {
    // clap's own usage errors would exit with 2, which is reserved for failed checks.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&args) {
        Ok(outcome) => {
            if !args.quiet || !outcome.verified {
                for line in &outcome.summary {
                    if outcome.verified {
                        println!("{line}");
                    } else {
                        eprintln!("{line}");
                    }
                }
            }
            ExitCode::from(if outcome.verified { EXIT_OK } else { EXIT_UNVERIFIED })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
