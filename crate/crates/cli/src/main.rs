//! `wgf`: stability spectra, particle flows, perturbation growth, GAN
//! training and stabilizer weights, each as a reproducible run directory.
//!
//! Exit codes: 0 success (unstable or diverged runs included), 1 numerical
//! failure, 2 usage or config error, 3 file error.

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;

/// Environment variable naming the base directory for runs without `--out-dir`.
pub const OUT_DIR_ENV: &str = "WGF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "wgf", version, about = "Particle-distance gradient flows and their stability")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// RNG seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: $WGF_OUT_DIR/<command>, else wgf-out/<command>].
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fourier transform, growth rates and stability verdicts of a kernel.
    Spectrum(commands::spectrum::Args),
    /// Simulate the particle flow of generated points against a fixed ring.
    Flow(commands::flow::Args),
    /// Linearised growth of a density perturbation on a periodic grid.
    Perturb(commands::perturb::Args),
    /// Train the feature-space GAN on the eight-mode ring.
    Train(commands::train::Args),
    /// Smallest stabilizer weight making the discriminator flow stable.
    Epsilon(commands::epsilon::Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Spectrum(_) => "spectrum",
            Self::Flow(_) => "flow",
            Self::Perturb(_) => "perturb",
            Self::Train(_) => "train",
            Self::Epsilon(_) => "epsilon",
        }
    }
}

/// Settings shared by every command after merging flags over the file.
pub struct Context {
    pub file: FileConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let out_dir = cli.out_dir.clone().or_else(|| file.out_dir.clone()).unwrap_or_else(|| {
        let base = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("wgf-out"), PathBuf::from);
        base.join(cli.command.name())
    });
    Ok(Context { file, seed, out_dir })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = context(&cli)?;
    match cli.command {
        Command::Spectrum(a) => commands::spectrum::run(&ctx, a),
        Command::Flow(a) => commands::flow::run(&ctx, a),
        Command::Perturb(a) => commands::perturb::run(&ctx, a),
        Command::Train(a) => commands::train::run(&ctx, a),
        Command::Epsilon(a) => commands::epsilon::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wgf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
