use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use meshvio::config::{RawConfig, RunConfig};
use meshvio::pipeline;

#[derive(Parser)]
#[command(
    name = "meshvio",
    about = "Visual-inertial odometry with incremental 3D meshing and planar regularities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full synthetic pipeline and write artifacts.
    Run {
        /// Flat key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pipeline variant: s, sp, or spr.
        #[arg(long)]
        pipeline: Option<String>,
        /// RNG seed for the scene, noise and sampling.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra key=value overrides (repeatable), applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Summarize finished runs into one comparison CSV.
    Compare {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Run directories (each must contain manifest.txt and ate.csv).
        dirs: Vec<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            pipeline: variant,
            seed,
            out,
            set,
        } => {
            let mut raw = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading config {}", path.display()))?;
                    RawConfig::parse(&text)?
                }
                None => RawConfig::default(),
            };
            for entry in &set {
                let Some((k, v)) = entry.split_once('=') else {
                    bail!("--set expects key=value, got '{entry}'");
                };
                raw.set(k, v);
            }
            if let Some(v) = variant {
                raw.set("pipeline", &v);
            }
            if let Some(s) = seed {
                raw.set("seed", &s.to_string());
            }
            if let Some(o) = out {
                raw.set("out", &o.display().to_string());
            }
            let run_config = RunConfig::from_raw(&raw)?;
            let artifacts = pipeline::run_pipeline(&run_config)?;
            println!(
                "done: {} keyframes, ATE median {:.4} m / RMSE {:.4} m, {} mesh faces, {} planes",
                artifacts.timing.len(),
                artifacts.ate.median,
                artifacts.ate.rmse,
                artifacts.final_mesh_faces,
                artifacts.planes_spawned
            );
            println!("artifacts in {}", artifacts.out_dir.display());
            Ok(())
        }
        Command::Compare { out, dirs } => {
            if dirs.is_empty() {
                bail!("compare needs at least one run directory");
            }
            let rows = pipeline::compare_runs(&dirs, &out)?;
            for row in &rows {
                println!(
                    "{}: pipeline={} seed={} ate median {:.4} m rmse {:.4} m{}",
                    row.dir.display(),
                    row.pipeline,
                    row.seed,
                    row.ate_median,
                    row.ate_rmse,
                    if row.scene_mismatch {
                        " [scene mismatch]"
                    } else {
                        ""
                    }
                );
            }
            println!("comparison written to {}", out.display());
            Ok(())
        }
    }
}
