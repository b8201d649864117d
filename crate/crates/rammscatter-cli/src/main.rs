//! `rammscatter` command-line driver.
//!
//! Exit status: 0 on success, 1 on validation errors (bad flags, config or
//! input files), 2 on numerical failures (non-convergence, resonance,
//! violated constraints).

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const LOG_ENV: &str = "RAMMSCATTER_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "rammscatter",
    version,
    about = "Fixed-energy inverse scattering experiments",
    after_help = "Set RAMMSCATTER_LOG (error, warn, info, debug, trace) to control log verbosity on stderr."
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (config key output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed (config key seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Momentum transfer as x,y,z; replaces the config list.
    #[arg(long, global = true, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub xi: Option<[f64; 3]>,
    /// Noise level; replaces noise.deltas.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Harmonic degree of the FarField (config key solver.l).
    #[arg(long = "L", global = true, value_name = "L")]
    pub l: Option<usize>,
    /// Grid edge count of the volume solver (config key solver.grid_n).
    #[arg(long = "grid-n", global = true, value_name = "N")]
    pub grid_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Radial,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Error against noise level with the theoretical envelope.
    Stability,
    /// Interior norm and amplitude distance against height, with a slope -1/2 guide.
    Penetrable,
    /// Reconstruction error against |theta|, with a slope -1 guide.
    Ladder,
    /// Mode-wise DtN comparison.
    Dtn,
    /// Surface traces of the two speeds.
    Trace,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a FarField and report reciprocity, optical and unitarity residuals.
    Simulate {
        #[arg(long, value_enum, default_value_t = Solver::Radial)]
        solver: Solver,
    },
    /// Tabulate phase shifts of the configured radial potential.
    PhaseShifts,
    /// Exact-data reconstruction along a growth ladder.
    InvertExact {
        /// FarField file from `simulate`; computed in-process when absent.
        #[arg(long, value_name = "PATH")]
        farfield: Option<PathBuf>,
    },
    /// Noisy-data reconstruction at each configured noise level.
    InvertNoisy {
        #[arg(long, value_name = "PATH")]
        farfield: Option<PathBuf>,
    },
    /// Error and exterior-field discrepancy across noise levels.
    StabilitySweep {
        #[arg(long, value_name = "PATH")]
        farfield: Option<PathBuf>,
    },
    /// Penetrable-to-sound-soft limit and Lipschitz table.
    ObstacleLimit,
    /// Indicator Fourier transform of the sound-soft sphere from its amplitude.
    ReconstructShape,
    /// Dirichlet-to-Neumann map from the amplitude against the direct map.
    Dtn {
        #[arg(long, value_name = "PATH")]
        farfield: Option<PathBuf>,
    },
    /// Two wave speeds with identical surface traces.
    Nonuniqueness {
        /// Modal truncation per axis.
        #[arg(long, default_value_t = 8)]
        m_trunc: usize,
    },
    /// Half-space lift of a point-source trace, compared with the exact field.
    Lift {
        /// Target point x,y,z with z > 0.
        #[arg(long, value_parser = parse_vec3, default_value = "0,0,1", allow_hyphen_values = true)]
        target: [f64; 3],
        /// Aperture radius on the surface.
        #[arg(long, default_value_t = 30.0)]
        radius: f64,
        /// Depth of the point source below the surface.
        #[arg(long, default_value_t = 2.0)]
        depth: f64,
    },
    /// Render a table written by another subcommand as SVG.
    Plot {
        table: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output file; defaults to the table path with an .svg extension.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("'{p}': {e}"))?;
        if !slot.is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
    }
    Ok(v)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli.common, &cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
