use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vnrecur::runner::{env_tolerance, run, RunOptions};
use vnrecur::scenario::{bundled, parse, prepare, ScenarioError, BUNDLED};

/// Recurrence experiments on finite von Neumann algebras.
#[derive(Parser)]
#[command(name = "vnrecur", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled scenario by name).
    Run {
        scenario: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override params.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override params.k_max.
        #[arg(long)]
        kmax: Option<usize>,
        /// Tolerance for invariant checks (default: VNRECUR_TOL, else 1e-10).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check a scenario without running it.
    Validate { file: String },
    /// List bundled scenarios.
    List,
}

fn load(source: &str) -> Result<String, ScenarioError> {
    let path = Path::new(source);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{source}: {e}")));
    }
    bundled(source)
        .map(str::to_owned)
        .ok_or_else(|| ScenarioError::Io(format!("{source}: no such file or bundled scenario")))
}

fn main_inner(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::List => {
            for (name, text) in BUNDLED {
                let sc = parse(text)?;
                println!("{name}\t{}", sc.experiment.as_str());
            }
            Ok(())
        }
        Command::Validate { file } => {
            let prepared = prepare(parse(&load(&file)?)?)?;
            let sc = &prepared.scenario;
            println!("ok: {} ({})", sc.name, sc.experiment.as_str());
            Ok(())
        }
        Command::Run {
            scenario,
            out,
            seed,
            kmax,
            tol,
        } => {
            let tol = match tol {
                Some(t) if t > 0.0 && t.is_finite() => t,
                Some(t) => return Err(ScenarioError::Invalid(vec![format!("--tol must be positive, got {t}")])),
                None => env_tolerance()?,
            };
            let prepared = prepare(parse(&load(&scenario)?)?)?;
            let opts = RunOptions { seed, k_max: kmax, tol };
            let outcome = run(&prepared, &out, &opts)?;
            print!("{}", outcome.summary());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vnrecur: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
