//! Sweeps over observation resolution and nudging strength.
//!
//! All variants share one reference run up to `t_spin + probe_time` and are
//! evaluated concurrently. A failing variant is reported in its row and does
//! not stop the others.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::{MuPolicy, RunConfig, SweepVariant};
use super::run::{run_assimilation, run_reference, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub mu: f64,
    /// L2 error at the probe time, or the error kind and message.
    pub outcome: std::result::Result<f64, (String, String)>,
}

/// Configuration of one variant: coarse grid of side `h`, fixed `mu`, run
/// until the probe time.
pub fn variant_config(base: &RunConfig, v: &SweepVariant) -> Result<RunConfig> {
    let mut cfg = base.clone();
    let cells = |l: f64| -> Result<usize> {
        let n = (l / v.h).round();
        if !(n >= 1.0) || ((l / n) - v.h).abs() > 1e-9 * v.h {
            return Err(Error::Config(format!("H = {} does not divide the domain side {l}", v.h)));
        }
        Ok(n as usize)
    };
    cfg.grid.coarse_nx = cells(cfg.grid.lx)?;
    cfg.grid.coarse_ny = cells(cfg.grid.ly)?;
    cfg.assimilation.mu = v.mu;
    cfg.assimilation.mu_policy = MuPolicy::Fixed;
    cfg.time.t_end = cfg.time.t_spin + cfg.sweep.probe_time;
    cfg.output.snapshot_times.clear();
    cfg.output.v0star_stride = 0;
    cfg.output.series_stride = 1;
    cfg.validate()?;
    Ok(cfg)
}

/// Reference shared by every variant of `base`.
pub fn sweep_reference(base: &RunConfig) -> Result<Trajectory> {
    let mut cfg = base.clone();
    cfg.time.t_end = cfg.time.t_spin + cfg.sweep.probe_time;
    cfg.output.snapshot_times.clear();
    cfg.validate()?;
    run_reference(&cfg)
}

fn run_variant(base: &RunConfig, reference: &Trajectory, v: &SweepVariant) -> Result<f64> {
    let cfg = variant_config(base, v)?;
    let (_, series) = run_assimilation(&cfg, reference)?;
    let last = series.last().ok_or_else(|| Error::Reference("empty error series".into()))?;
    Ok(last.l2)
}

pub fn run_sweep(base: &RunConfig) -> Result<Vec<SweepRow>> {
    let reference = sweep_reference(base)?;
    Ok(run_sweep_with(base, &reference))
}

pub fn run_sweep_with(base: &RunConfig, reference: &Trajectory) -> Vec<SweepRow> {
    base.sweep
        .variants
        .par_iter()
        .map(|v| SweepRow {
            h: v.h,
            mu: v.mu,
            outcome: run_variant(base, reference, v).map_err(|e| (e.kind().to_string(), e.to_string())),
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "h,mu,l2_error,status";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        match &r.outcome {
            Ok(e) => writeln!(out, "{:.16e},{:.16e},{:.16e},ok", r.h, r.mu, e).unwrap(),
            Err((kind, _)) => writeln!(out, "{:.16e},{:.16e},,failed:{kind}", r.h, r.mu).unwrap(),
        }
    }
    out
}
