//! Command-line front end: JSON config in, CSV and JSON figure data out.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 configuration
//! error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qdm_cavity::{Convention, Error};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    /// Core errors that stem from invalid input are configuration errors;
    /// everything else is numerical.
    pub fn from_core(e: Error) -> Self {
        if is_input_error(&e) {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }

    pub fn from_core_config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn is_input_error(e: &Error) -> bool {
    match e {
        Error::NegativeRate { .. }
        | Error::ZeroScaleUnit(_)
        | Error::NonFinite(_)
        | Error::InvalidUnits(_)
        | Error::InvalidPreset(_)
        | Error::UnknownPreset(_)
        | Error::NegativeRabi(_)
        | Error::EmptyGrid
        | Error::StrictOrderViolated { .. }
        | Error::InvalidGrid(_)
        | Error::InvalidEvolution(_)
        | Error::StepTooLarge { .. }
        | Error::InvalidCavity(_) => true,
        Error::CellFailed { source, .. } => is_input_error(source),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConventionArg {
    Printed,
    Canonical,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Printed => Convention::Printed,
            ConventionArg::Canonical => Convention::Canonical,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qdm-cavity", version, about = "Quantum-dot-molecule EIT medium in a ring cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON parameter file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory [default: $QDM_CAVITY_OUT, else ./qdm-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Named parameter preset.
    #[arg(long, global = true)]
    preset: Option<String>,

    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionArg>,

    /// Use the literal -i Te rho10 term in the rho10 equation.
    #[arg(long, global = true)]
    eq1_printed: bool,

    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Susceptibility and its slope over a detuning grid.
    Susceptibility,
    /// Loaded-cavity spectrum around the pulled resonance, with a summary.
    Cavity,
    /// The five transmission spectra a-e.
    Fig2,
    /// Window dispersion over tunneling and linewidth, with clipping.
    Fig3,
    /// Generic one- or two-axis sweep of a scalar quantity.
    Sweep,
    /// Built-in verification suite.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Susceptibility => "susceptibility",
            Command::Cavity => "cavity",
            Command::Fig2 => "fig2",
            Command::Fig3 => "fig3",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None => config::RunConfig::default(),
    };
    let overrides = config::Overrides {
        preset: cli.preset,
        out: cli.out,
        convention: cli.convention.map(Into::into),
        eq1_printed: cli.eq1_printed,
    };
    let cfg = config::resolve(cli.command.name(), file, overrides)?;

    let (files, passed) = match cli.command {
        Command::Susceptibility => (commands::susceptibility(&cfg)?, true),
        Command::Cavity => (commands::cavity(&cfg)?, true),
        Command::Fig2 => (commands::fig2(&cfg)?, true),
        Command::Fig3 => (commands::fig3(&cfg)?, true),
        Command::Sweep => (commands::sweep(&cfg)?, true),
        Command::Verify => {
            let (files, report) = commands::verify(&cfg)?;
            for c in &report.checks {
                println!("{}", commands::describe_check(c));
            }
            (files, report.passed)
        }
    };
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            match &e {
                CliError::Config(m) => eprintln!("config error: {m}"),
                CliError::Numeric(m) => eprintln!("numeric error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
