use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use porous_da::diagnostics::v0star_norm;
use porous_da::field::{l2_norm, linf_norm, CellField};
use porous_da::harness::io;
use porous_da::harness::{run_assimilation, run_reference, run_sweep, sweep_csv, RunConfig};
use porous_da::{Error, Result};

#[derive(Parser)]
#[command(name = "porous-da", version, about = "Two-phase flow twin experiments with nudging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reference from zero saturation and store its snapshots.
    Reference {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the nudged model against a stored reference.
    Assimilate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the error at the probe time for each (H, mu) variant.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Norms of the difference of two binary snapshots.
    Norms {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Also report the dual norm, weighted by the permeability snapshot.
        #[arg(long, requires = "k")]
        v0star: bool,
        #[arg(long = "K", id = "k")]
        k: Option<PathBuf>,
    },
    /// Convert a binary snapshot to CSV or legacy VTK, chosen by extension.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
            eprintln!("error kind={} message=\"{msg}\"", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Reference { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let traj = run_reference(&cfg)?;
            let vtk = vtk_steps(&cfg, &traj);
            io::write_trajectory_dir(&out, &traj, &vtk)?;
            fs::write(out.join("config.toml"), cfg.to_toml_string())?;
            println!("steps={} snapshots={} config_hash={}", cfg.total_steps(), traj.snapshots.len(), traj.config_hash);
        }
        Command::Assimilate { config, reference, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let reference = io::read_trajectory_dir(&reference)?;
            let (traj, series) = run_assimilation(&cfg, &reference)?;
            let vtk = vtk_steps(&cfg, &traj);
            io::write_trajectory_dir(&out, &traj, &vtk)?;
            io::write_series(&out.join("series.csv"), &series)?;
            fs::write(out.join("config.toml"), cfg.to_toml_string())?;
            if let (Some(first), Some(last)) = (series.first(), series.last()) {
                println!("l2_initial={:e} l2_final={:e} config_hash={}", first.l2, last.l2, traj.config_hash);
            }
        }
        Command::Sweep { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let rows = run_sweep(&cfg)?;
            let csv = sweep_csv(&rows);
            fs::write(&out, &csv)?;
            print!("{csv}");
        }
        Command::Norms { a, b, v0star, k } => {
            let (fa, _) = io::read_snapshot(&a)?;
            let (fb, _) = io::read_snapshot(&b)?;
            let e = fa.difference(&fb)?;
            print!("l2={:.16e} linf={:.16e}", l2_norm(&e), linf_norm(&e));
            if v0star {
                let perm = read_field(k.as_deref())?;
                print!(" v0star={:.16e}", v0star_norm(&e, &perm, None)?.norm);
            }
            println!();
        }
        Command::Convert { input, out } => {
            let (field, t) = io::read_snapshot(&input)?;
            let text = match out.extension().and_then(|e| e.to_str()) {
                Some("csv") => io::snapshot_csv(&field),
                Some("vtk") => io::snapshot_vtk(&field, "saturation", &format!("saturation t={t}")),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown output extension {other:?}, expected csv or vtk"
                    )))
                }
            };
            fs::write(&out, text)?;
        }
        Command::DefaultConfig => print!("{}", RunConfig::default().to_toml_string()),
    }
    Ok(())
}

fn read_field(path: Option<&Path>) -> Result<CellField> {
    let path = path.ok_or_else(|| Error::InvalidArgument("--K is required with --v0star".into()))?;
    Ok(io::read_snapshot(path)?.0)
}

fn vtk_steps(cfg: &RunConfig, traj: &porous_da::harness::Trajectory) -> Vec<usize> {
    if !cfg.output.vtk {
        return Vec::new();
    }
    let dt = cfg.time.dt;
    traj.snapshots
        .iter()
        .filter(|s| {
            cfg.output.snapshot_times.iter().any(|&t| (t - s.t).abs() < 1e-9 * dt.max(t))
                || Some(s.step) == traj.last().map(|l| l.step)
        })
        .map(|s| s.step)
        .collect()
}
