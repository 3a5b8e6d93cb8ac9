//! `ncpdo`: command-line driver for the operator-valued pseudo-differential
//! calculus experiments. Each subcommand runs one experiment and writes a
//! deterministic report. Exit code 0 means every check passed, 2 that a
//! property check failed, 1 that the run itself failed.

mod commands;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ncpdo::Error;

#[derive(Parser, Debug, Serialize)]
#[command(name = "ncpdo", version, about = "Operator-valued pseudo-differential calculus experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Memory budget for dense symbol tables and kernels, in MiB.
    #[arg(long, global = true, default_value_t = 512)]
    pub budget_mb: usize,
}

impl Global {
    pub fn budget_bytes(&self) -> usize {
        self.budget_mb.saturating_mul(1 << 20)
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Command {
    /// Build the Littlewood-Paley family and check the partition of unity.
    LpBuild(commands::LpBuild),
    /// Measure the class constants of a symbol against its claim.
    SymbolCheck(commands::SymbolCheck),
    /// Apply a symbol's operator to a dumped function.
    PdoApply(commands::PdoApply),
    /// Evaluate one function-space norm of a dumped function.
    Norm(commands::NormCmd),
    /// Remainder of the truncated composition expansion.
    ComposeCheck(commands::ComposeCheck),
    /// Remainder of the truncated adjoint expansion.
    AdjointCheck(commands::AdjointCheck),
    /// Fit the off-diagonal decay of the kernel.
    KernelDecay(commands::KernelDecay),
    /// Almost-orthogonality table of the dyadic pieces.
    Cotlar(commands::Cotlar),
    /// Validate an atom manifest (or the shipped library).
    AtomsValidate(commands::AtomsValidate),
    /// Weighted image norms of subatoms across scales, and the far-support decay.
    AtomImage(commands::AtomImage),
    /// Operator-norm estimates across lattice sizes, written as CSV.
    BoundSweep(commands::BoundSweep),
    /// The exotic-symbol experiment on H_2^α.
    Forbidden(commands::Forbidden),
    /// Quantum-torus consistency checks at one θ.
    QtDemo(commands::QtDemo),
    /// Boundedness sweep of a toroidal multiplier on the quantum torus.
    QtSweep(commands::QtSweep),
    /// Write a random band-limited function dump (test input helper).
    MakeInput(commands::MakeInput),
}

/// Write `text` to a path, or to stdout for `-`.
pub fn emit(out: &Path, text: &str) -> ncpdo::Result<()> {
    if out == Path::new("-") {
        let mut s = std::io::stdout().lock();
        s.write_all(text.as_bytes())?;
        s.flush()?;
    } else {
        std::fs::write(out, text)?;
    }
    Ok(())
}

pub fn stdout_path() -> PathBuf {
    PathBuf::from("-")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            let class = match &e {
                Error::Config(_) => "configuration",
                Error::Validation(_) => "validation",
                Error::Structural(_) => "structure",
                Error::Data(_) => "data",
                Error::Unsupported(_) => "unsupported",
                Error::Budget(_) => "budget",
                Error::Io(_) => "io",
            };
            eprintln!("ncpdo: {class} failure: {e}");
            ExitCode::from(1)
        }
    }
}
