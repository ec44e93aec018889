//! `pragma` — pragmatic hypothesis regions and agnostic tests from the
//! command line.
//!
//! Every command resolves its configuration (file plus flag overrides),
//! computes deterministically, writes CSV/JSON artifacts paired with a
//! provenance sidecar, and exits 0 on success, 2 on configuration errors,
//! 3 on numeric errors, 4 on reproduction mismatches.

mod commands;
mod config;
mod sidecar;

use clap::{Parser, Subcommand};
use pragma_core::PragmaError;

#[derive(Debug)]
pub enum CliError {
    Core(PragmaError),
    Config(String),
    /// `--check` or `--strict` found a reproduction mismatch.
    Mismatch(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                PragmaError::Numeric { .. } | PragmaError::DegeneratePosterior(_) => 3,
                _ => 2,
            },
            CliError::Mismatch(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Mismatch(m) => write!(f, "mismatch: {m}"),
        }
    }
}

impl From<PragmaError> for CliError {
    fn from(e: PragmaError) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(
    name = "pragma",
    version,
    about = "Pragmatic hypothesis regions and three-valued (agnostic) tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a predictive dissimilarity (KL, BP, CD) for a pair or a grid sweep
    Dissim(commands::dissim::DissimArgs),
    /// Build a pragmatic region and export it as CSV
    Region(commands::region::RegionArgs),
    /// Run the region-estimator agnostic test on observed data
    Test(commands::test_cmd::TestArgs),
    /// Rebuild the Hardy-Weinberg genotype case-study decision table
    ReproduceHw(commands::reproduce_hw::ReproduceHwArgs),
    /// Trace pragmatic-region size over growing replication
    Convergence(commands::convergence::ConvergenceArgs),
    /// Compare a pragmatic region with its image under a reparametrization
    Invariance(commands::invariance::InvarianceArgs),
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("PRAGMA_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dissim(args) => commands::dissim::run(args),
        Command::Region(args) => commands::region::run(args),
        Command::Test(args) => commands::test_cmd::run(args),
        Command::ReproduceHw(args) => commands::reproduce_hw::run(args),
        Command::Convergence(args) => commands::convergence::run(args),
        Command::Invariance(args) => commands::invariance::run(args),
    };
    if let Err(e) = result {
        eprintln!("pragma: {e}");
        std::process::exit(e.exit_code());
    }
}
