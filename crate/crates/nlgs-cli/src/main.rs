//! `nlgs`: ground states, mass sweeps, the kernel atlas and the verification
//! suite from the command line.
//!
//! Exit codes: 0 success, 1 non-convergence or a failed check, 2 bad
//! configuration.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Flags;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] nlgs::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use nlgs::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(
                E::InvalidConfig(_)
                | E::InvalidGrid(_)
                | E::InvalidPotential(_)
                | E::InvalidCouplings(_)
                | E::Hypothesis(_),
            ) => 2,
            CliError::Lib(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nlgs",
    version,
    about = "Ground states of the mass-constrained two-Yukawa Schrodinger problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute one ground state.
    Solve(Flags),
    /// Ground-state energies along an ascending list of masses.
    Sweep(Flags),
    /// Classify the kernel over a grid of (a, b).
    Atlas(Flags),
    /// Inequality suite, scaling identities and kernel atlas.
    Verify(Flags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match &cli.command {
        Command::Solve(f) => ("solve", f),
        Command::Sweep(f) => ("sweep", f),
        Command::Atlas(f) => ("atlas", f),
        Command::Verify(f) => ("verify", f),
    };
    let result = config::load(flags).and_then(|cfg| match cli.command {
        Command::Solve(_) => commands::solve(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
        Command::Atlas(_) => commands::atlas(&cfg),
        Command::Verify(_) => commands::verify(&cfg),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nlgs {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
