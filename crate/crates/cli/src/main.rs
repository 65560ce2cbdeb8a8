use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use torus_kam_cli::commands::{self, Overrides};
use torus_kam_cli::config::ConventionName;

#[derive(Parser)]
#[command(name = "torus-kam", version, about = "Analytic conjugacy of perturbed rotation actions on the torus")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the KAM iteration; writes trace.csv, result.json and decay.csv.
    Run(Common),
    /// Scan the box operator; writes spectrum.csv, shells.csv and fit.json.
    Spectrum(Common),
    /// Build the perturbation of a scenario; writes perturbation.json.
    Synthesize(Common),
    /// Built-in sanity checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory, overriding the scenario's.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    kmax: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// `inverse` (ν components) or `all` (2ν letters) for spectrum reports.
    #[arg(long)]
    convention: Option<ConventionName>,
}

impl From<&Common> for Overrides {
    fn from(c: &Common) -> Self {
        Overrides {
            out: c.out.clone(),
            seed: c.seed,
            max_steps: c.max_steps,
            k_max: c.kmax,
            tau: c.tau,
            convention: c.convention,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Run(c) => commands::run(&c.config, &c.into()),
        Command::Spectrum(c) => commands::spectrum(&c.config, &c.into()),
        Command::Synthesize(c) => commands::synthesize(&c.config, &c.into()),
        Command::Selftest => commands::selftest(),
    };
    match result {
        Ok(o) => {
            if !cli.quiet {
                println!("{}", o.summary);
            }
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
