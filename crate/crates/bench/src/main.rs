use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jointprior_bench::config::{load_config, Task};
use jointprior_bench::error::{BenchError, Result};
use jointprior_bench::output::{write_table, Format};
use jointprior_bench::tasks::{run, Overrides};

#[derive(Parser)]
#[command(name = "jointprior", version, about = "Model-uncertainty experiments under dispersed parameter priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior model and inclusion probabilities over a c² grid.
    Sweep(Common),
    /// Cross-validation scores over a c² grid.
    Cv(Common),
    /// Reversible-jump sampler with enumeration reference.
    Rjmcmc(Common),
    /// Model-averaged shrinkage curve for two nested normal models.
    Shrinkage(Common),
    /// Writes a simulated dataset.
    Simulate(Common),
    /// Normalized prior model probabilities.
    PriorProbs(Common),
}

fn execute(cli: Cli) -> Result<()> {
    let (task, c) = match cli.command {
        Command::Sweep(c) => (Task::Sweep, c),
        Command::Cv(c) => (Task::Cv, c),
        Command::Rjmcmc(c) => (Task::Rjmcmc, c),
        Command::Shrinkage(c) => (Task::Shrinkage, c),
        Command::Simulate(c) => (Task::Simulate, c),
        Command::PriorProbs(c) => (Task::PriorProbs, c),
    };
    let loaded = load_config(&c.config)?;
    let out = run(&loaded, Some(task), &Overrides { seed: c.seed })?;
    let format = c.format.or(loaded.config.format).unwrap_or_default();
    let mut buf = Vec::new();
    write_table(&out.table, &out.provenance, format, &mut buf)?;
    match c.out.or(loaded.config.output) {
        Some(path) => std::fs::write(&path, &buf).map_err(|e| BenchError::io(path.display().to_string(), e)),
        None => std::io::stdout().lock().write_all(&buf).map_err(|e| BenchError::io("stdout", e)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
