use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zitter::packet::Dimensionality;
use zitter_cli::commands;
use zitter_cli::config::{Format, RunConfig};
use zitter_cli::error::CliError;

/// Relativistic wave-packet dynamics in a magnetic field.
///
/// Exit status: 0 success, 2 configuration error, 3 tolerance not met,
/// 4 capacity exceeded, 1 i/o failure.
#[derive(Parser)]
#[command(name = "zitter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent (trajectory falls back to output.path).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Overrides output.format from the config.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Packet trajectory (x, y, vx, vy) over the configured time grid.
    Trajectory,
    /// Line list of a 2+1 trajectory.
    Spectrum,
    /// Normalization and ladder sum rules of the packet coefficients.
    Sumrules,
    /// Series against dense evolution, per channel.
    OracleCheck,
    /// Simulated scales and laser schedule for a trapped-ion setup.
    IonMap {
        #[arg(long, value_parser = parse_model)]
        model: Option<Dimensionality>,
        /// Choose Omega so that the trap simulates this kappa.
        #[arg(long)]
        target_kappa: Option<f64>,
    },
    /// Non-relativistic radius, ZB amplitude and envelope estimates.
    Lowfield,
}

fn parse_model(s: &str) -> Result<Dimensionality, String> {
    match s {
        "2+1" => Ok(Dimensionality::TwoPlusOne),
        "3+1" => Ok(Dimensionality::ThreePlusOne),
        other => Err(format!("model must be 2+1 or 3+1, got {other}")),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let need = |cfg: &Option<RunConfig>| {
        cfg.clone().ok_or_else(|| CliError::Config("this command needs --config <path>".into()))
    };
    let format = cli.format.or(cfg.as_ref().map(|c| c.output.format)).unwrap_or_default();
    let output = cli.output.as_deref();
    match cli.command {
        Command::Trajectory => {
            // Only the trajectory honours output.path; reports default to stdout.
            let cfg = need(&cfg)?;
            let path = output.map(PathBuf::from).or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
            commands::cmd_trajectory(&cfg, path.as_deref(), format)
        }
        Command::Spectrum => commands::cmd_spectrum(&need(&cfg)?, output, format),
        Command::Sumrules => commands::cmd_sumrules(&need(&cfg)?, output, format),
        Command::OracleCheck => commands::cmd_oracle_check(&need(&cfg)?, output, format),
        Command::IonMap { model, target_kappa } => {
            commands::cmd_ion_map(cfg.as_ref(), model, target_kappa, output, format)
        }
        Command::Lowfield => commands::cmd_lowfield(&need(&cfg)?, output, format),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zitter: {e}");
            e.exit_code()
        }
    }
}
