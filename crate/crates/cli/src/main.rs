use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use simo_lqr_cli::commands::{self, SimulateOverrides};
use simo_lqr_cli::config::ProjectConfig;
use simo_lqr_cli::error::{CliError, CliResult};

/// Linearize nonlinear single-input mechanical plants, design LQR state
/// feedback, map it exactly onto PD controllers and simulate the closed
/// loop of the two-wheeled balancing robot.
#[derive(Debug, Parser)]
#[command(name = "simo-lqr", version, about)]
struct Cli {
    /// Project configuration file (TOML). Without it, the built-in
    /// balancing-robot experiment is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (falls back to the config's `out_dir`, then the
    /// SIMO_LQR_OUT environment variable, then ./simo-lqr-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Linearize the plant about an operating point and report the
    /// model with its controllability analysis.
    Linearize {
        /// Operating point as comma-separated values (tilt channels in
        /// degrees for the robot), e.g. "0,0,0,0".
        #[arg(long)]
        equilibrium: Option<String>,
    },
    /// Run the linearize + LQR pipeline and print the state-feedback
    /// and PD gains.
    Design,
    /// Run the configured closed-loop scenarios and export one CSV per
    /// scenario plus a settling summary.
    Simulate {
        /// Override the duration of every scenario [s].
        #[arg(long)]
        duration: Option<f64>,
        /// Override the integrator step of every scenario [s].
        #[arg(long)]
        dt: Option<f64>,
        /// Override the sample time of discrete scenarios [s].
        #[arg(long)]
        ts: Option<f64>,
        /// Override the derivative-filter coefficient.
        #[arg(long, value_name = "VAL")]
        filter_n: Option<f64>,
    },
    /// Run the full pipeline and grade it against the published
    /// balancing-robot reference values.
    ReproducePaper {
        /// Integrator step for the experiments [s].
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => ProjectConfig::load(path)?,
        None => ProjectConfig::default_experiment(),
    };
    match cli.command {
        Command::Linearize { equilibrium } => {
            let parsed = equilibrium.map(|s| parse_vector(&s)).transpose()?;
            commands::cmd_linearize(&cfg, cli.out, parsed)
        }
        Command::Design => commands::cmd_design(&cfg, cli.out),
        Command::Simulate {
            duration,
            dt,
            ts,
            filter_n,
        } => commands::cmd_simulate(
            &cfg,
            cli.out,
            SimulateOverrides {
                duration,
                dt,
                ts,
                filter_n,
            },
        ),
        Command::ReproducePaper { dt } => commands::cmd_reproduce_paper(&cfg, dt),
    }
}

fn parse_vector(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad vector component '{s}': {e}")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
