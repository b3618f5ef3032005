//! Twin-experiment orchestration: configuration, reference and assimilated
//! runs, resolution sweeps and file formats.

pub mod config;
pub mod io;
pub mod permeability;
pub mod run;
pub mod sweep;

pub use config::{RunConfig, Setup};
pub use run::{run_assimilation, run_reference, Snapshot, Trajectory};
pub use sweep::{run_sweep, sweep_csv, SweepRow};
