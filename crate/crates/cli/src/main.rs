use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use commands::Output;
use config::RunConfig;
use error::CliError;

/// Boundary-preserving splitting-step simulations and convergence studies.
#[derive(Parser)]
#[command(name = "splitstep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate sample paths of a catalog model.
    Simulate(Common),
    /// Weak error against the exact mean over a list of step sizes.
    ConvergeWeak(Common),
    /// Strong error on coupled Wiener paths over a list of step sizes.
    ConvergeStrong(Common),
    /// Super-random walk on a periodic lattice.
    SpdeSbm(Common),
    /// Survival fractions of the contact-process SPDE over a list of growth rates.
    SpdeContact(Common),
    /// Critical growth rate of the contact-process SPDE, extrapolated in dt.
    ThetaCritical(Common),
    /// Raw non-central chi-square draws.
    SampleNcx2(Common),
    /// List catalog models and their parameters.
    Catalog,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    output: PathBuf,
    #[arg(long, env = "SPLITSTEP_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "SPLITSTEP_THREADS")]
    threads: Option<usize>,
}

type Runner = fn(&RunConfig, &Output) -> Result<(), CliError>;

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn execute(common: &Common, run: Runner) -> Result<(), CliError> {
    let cfg = load(common)?;
    if common.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let out = Output::create(&common.output, &cfg)?;
    pool.install(|| run(&cfg, &out))
}

fn catalog() {
    for e in splitstep::models::CATALOG {
        println!("{:<22} {}", e.name, e.summary);
        println!("{:<22} params: {}", "", e.params.join(", "));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => execute(c, commands::simulate),
        Command::ConvergeWeak(c) => execute(c, commands::converge_weak),
        Command::ConvergeStrong(c) => execute(c, commands::converge_strong),
        Command::SpdeSbm(c) => execute(c, commands::spde_sbm),
        Command::SpdeContact(c) => execute(c, commands::spde_contact),
        Command::ThetaCritical(c) => execute(c, commands::theta_critical),
        Command::SampleNcx2(c) => execute(c, commands::sample_ncx2),
        Command::Catalog => {
            catalog();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
