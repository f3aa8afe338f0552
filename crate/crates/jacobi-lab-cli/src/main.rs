use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

mod commands;

/// Jacobi curves, symplectic indices and Morse index checks for linearized extremals.
#[derive(Debug, Parser)]
#[command(name = "jacobi-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in problems.
    Problems,
    /// Evaluate an index query file (passed with --problem).
    Indices,
    /// Jacobi curves.
    #[command(subcommand)]
    Jacobi(JacobiCmd),
    /// Pair L-derivatives and glueing.
    #[command(subcommand)]
    Glue(GlueCmd),
    /// Morse index verification.
    #[command(subcommand)]
    Morse(MorseCmd),
}

#[derive(Debug, Subcommand)]
enum JacobiCmd {
    /// Compute the Jacobi curve and its conjugate points.
    Run,
}

#[derive(Debug, Subcommand)]
enum GlueCmd {
    /// Glue pair L-derivatives on [0, split] and [split, t-max] and compare with the direct one.
    Demo {
        #[arg(long)]
        split: f64,
    },
}

#[derive(Debug, Subcommand)]
enum MorseCmd {
    /// Compare the curve formulas with the Hessian eigenvalue count.
    Verify,
    /// Run `verify` on seeded random LQ instances.
    Sweep {
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
struct Options {
    /// Problem file (JSON); for `indices`, the query file.
    #[arg(long, global = true)]
    problem: Option<PathBuf>,
    /// Built-in problem name instead of a file.
    #[arg(long, global = true, conflicts_with = "problem")]
    builtin: Option<String>,
    /// Number of grid intervals.
    #[arg(long, global = true, default_value_t = 200)]
    grid: usize,
    /// Horizon; overrides the problem file.
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Gauss–Legendre nodes per interval.
    #[arg(long, global = true, default_value_t = 4)]
    quadrature_order: usize,
    /// Output file; stdout when absent.
    #[arg(long, global = true, visible_alias = "report")]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for sweeps; all cores when absent.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Add wall-clock timings to reports (breaks byte-identical output).
    #[arg(long, global = true)]
    timing: bool,
}

impl Options {
    fn validate(&self) -> Result<(), Failure> {
        if self.grid < 1 {
            return Err(Failure::Validation("--grid must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Failure::Validation("--tol must be positive".into()));
        }
        if !(1..=10).contains(&self.quadrature_order) {
            return Err(Failure::Validation(
                "--quadrature-order must lie in [1, 10]".into(),
            ));
        }
        if self.jobs == Some(0) {
            return Err(Failure::Validation("--jobs must be positive".into()));
        }
        Ok(())
    }
}

/// Exit-code classes.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<jacobi_lab::Error> for Failure {
    fn from(e: jacobi_lab::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Problems => "problems",
        Command::Indices => "indices",
        Command::Jacobi(JacobiCmd::Run) => "jacobi run",
        Command::Glue(GlueCmd::Demo { .. }) => "glue demo",
        Command::Morse(MorseCmd::Verify) => "morse verify",
        Command::Morse(MorseCmd::Sweep { .. }) => "morse sweep",
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    cli.opts.validate()?;
    let name = command_name(&cli.command);
    info!("running {name}");
    let out = match &cli.command {
        Command::Problems => commands::problems(&cli.opts),
        Command::Indices => commands::indices(name, &cli.opts),
        Command::Jacobi(JacobiCmd::Run) => commands::jacobi_run(name, &cli.opts),
        Command::Glue(GlueCmd::Demo { split }) => commands::glue_demo(name, &cli.opts, *split),
        Command::Morse(MorseCmd::Verify) => commands::morse_verify(name, &cli.opts),
        Command::Morse(MorseCmd::Sweep { count }) => commands::morse_sweep(name, &cli.opts, *count),
    }?;
    match &cli.opts.output {
        Some(path) => std::fs::write(path, out)
            .map_err(|e| Failure::Validation(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{out}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("JACOBI_LAB_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("jacobi-lab: {f}");
            if let Failure::Numerical(_) = f {
                warn!("numerical failures depend on --tol and --grid; try a finer grid or a looser tolerance");
            }
            ExitCode::from(f.code())
        }
    }
}
