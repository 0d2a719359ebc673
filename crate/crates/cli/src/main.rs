//! `legendrian`: construct, verify and export bounded Legendrian curves and their fronts.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{Outcome, Target};
use config::{MeshFormat, RunConfig, Tolerances};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "legendrian", version, about = "Bounded holomorphic Legendrian curves and their flat fronts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the labyrinth iteration and write a manifest plus curve snapshots.
    Construct {
        /// JSON run configuration; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Distance-solver resolution (overrides the config).
        #[arg(long)]
        resolution: Option<usize>,
        /// Also export the fronts of the final curve in this format.
        #[arg(long, value_enum)]
        format: Option<MeshFormat>,
    },
    /// Check the invariants of a curve snapshot, and optionally a construction manifest.
    Verify {
        snapshot: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Configuration whose tolerances are used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for verify.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the flat or affine front of a snapshot as a mesh with a JSON sidecar.
    Export {
        snapshot: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        target: Target,
        #[arg(long, value_enum, default_value = "obj")]
        format: MeshFormat,
        /// Mesh radii (angles are four times this); defaults to the snapshot grid.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a PGM picture of the labyrinth for N.
    Labyrinth {
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Image side in pixels.
        #[arg(long, default_value_t = 1024)]
        resolution: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn tolerances(config: Option<&PathBuf>) -> anyhow::Result<Tolerances> {
    Ok(RunConfig::load(config.map(|p| p.as_path()))?.tolerances)
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Construct { config, out, resolution, format } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if let Some(r) = resolution {
                cfg.distance_resolution = r;
            }
            if let Some(f) = format {
                if !cfg.formats.contains(&f) {
                    cfg.formats.push(f);
                }
            }
            if out.is_some() {
                cfg.out = out;
            }
            cfg.validate()?;
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
            commands::construct(&cfg, &dir)
        }
        Command::Verify { snapshot, manifest, config, out } => {
            commands::verify(&snapshot, manifest.as_deref(), &tolerances(config.as_ref())?, out.as_deref())
        }
        Command::Export { snapshot, target, format, resolution, config, out } => {
            commands::export(&snapshot, target, format, resolution, &tolerances(config.as_ref())?, &out)
        }
        Command::Labyrinth { n, resolution, out } => commands::labyrinth(n, resolution, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
