//! Reference and assimilation runs.
//!
//! The reference starts from `S = 0` and runs the sequential loop (pressure
//! solve, face fluxes, transport) from `t = 0` to `t_end`. The assimilated
//! run starts at reference time `t_spin`, which is its own `t' = 0`, and at
//! every step nudges toward coarse observations of the stored reference.

use crate::diagnostics::{v0star_norm, ErrorRecord, ErrorSeries, SeriesMeta};
use crate::error::{Error, Result};
use crate::field::{l2_norm, linf_norm, CellField};
use crate::observe::Observer;
use crate::pressure::PressureSystem;
use crate::transport::{apply_nudging, Nudge, NudgingMode, Transport};

use super::config::{InitialState, RunConfig, Setup};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Step index on the run's own clock.
    pub step: usize,
    pub t: f64,
    pub saturation: CellField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub final_pressure: CellField,
    /// Pressure of the step before `start_step`, used to warm-start a run
    /// that continues from the snapshot at `start_step`.
    pub spin_pressure: Option<CellField>,
    pub dt: f64,
    pub start_step: usize,
    pub config_hash: String,
    pub physics_hash: String,
}

impl Trajectory {
    pub fn new(
        snapshots: Vec<Snapshot>,
        final_pressure: CellField,
        spin_pressure: Option<CellField>,
        dt: f64,
        start_step: usize,
        config_hash: String,
        physics_hash: String,
    ) -> Result<Self> {
        let grid = *final_pressure.grid();
        for w in snapshots.windows(2) {
            if !(w[1].step > w[0].step && w[1].t > w[0].t) {
                return Err(Error::Reference(format!(
                    "snapshots out of order: step {} after {}",
                    w[1].step, w[0].step
                )));
            }
        }
        for s in &snapshots {
            grid.ensure_same(s.saturation.grid(), "trajectory snapshot")?;
        }
        if let Some(p) = &spin_pressure {
            grid.ensure_same(p.grid(), "trajectory spin pressure")?;
        }
        Ok(Trajectory { snapshots, final_pressure, spin_pressure, dt, start_step, config_hash, physics_hash })
    }

    pub fn at_step(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.binary_search_by_key(&step, |s| s.step).ok().map(|k| &self.snapshots[k])
    }

    /// Latest snapshot at or before `step`.
    pub fn held(&self, step: usize) -> Option<&Snapshot> {
        match self.snapshots.binary_search_by_key(&step, |s| s.step) {
            Ok(k) => Some(&self.snapshots[k]),
            Err(0) => None,
            Err(k) => Some(&self.snapshots[k - 1]),
        }
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

fn snapshot_steps(times: &[f64], dt: f64) -> Vec<usize> {
    times.iter().filter_map(|&t| super::config::steps_for(t, dt, "").ok()).collect()
}

/// One pressure/flux/transport cycle shared by both runs.
struct Stepper<'a> {
    setup: &'a Setup,
    cfl: f64,
    dt: f64,
}

impl Stepper<'_> {
    fn transport(&self) -> Transport<'_> {
        Transport::new(&self.setup.fluid)
            .with_wells(self.setup.wells.as_ref())
            .with_capillary(self.setup.capillary.as_ref())
    }

    fn pressure(&self, s: &CellField, guess: Option<&CellField>) -> Result<(CellField, crate::field::FaceFlux)> {
        let sys = PressureSystem::assemble(&self.setup.perm, s, &self.setup.fluid)?;
        let q_t = match &self.setup.wells {
            Some(w) => w.sources(s)?.0,
            None => CellField::zeros(*s.grid()),
        };
        let (p, _) = sys.solve_with_guess(&q_t, guess)?;
        let flux = sys.face_fluxes(&p)?;
        Ok((p, flux))
    }
}

pub fn run_reference(cfg: &RunConfig) -> Result<Trajectory> {
    let setup = cfg.setup()?;
    let dt = cfg.time.dt;
    let stepper = Stepper { setup: &setup, cfl: cfg.time.cfl, dt };
    let transport = stepper.transport();
    let k0 = cfg.spin_steps();
    let total = cfg.total_steps();
    let stride = cfg.output.reference_stride;
    let extra = snapshot_steps(&cfg.output.snapshot_times, dt);
    let keep = |k: usize| (k >= k0 && (k - k0) % stride == 0) || k == total || extra.contains(&k);

    let mut s = CellField::zeros(setup.grid);
    let mut p: Option<CellField> = None;
    let mut spin_pressure = None;
    let mut snapshots = Vec::new();
    for k in 0..=total {
        if keep(k) {
            snapshots.push(Snapshot { step: k, t: k as f64 * dt, saturation: s.clone() });
        }
        if k == total {
            break;
        }
        if k == k0 {
            spin_pressure = p.clone();
        }
        let t = k as f64 * dt;
        let (pk, flux) = stepper.pressure(&s, p.as_ref()).map_err(|e| e.at_step(k, t))?;
        let (next, _) = transport.advance(&s, &flux, stepper.dt, stepper.cfl).map_err(|e| e.at_step(k, t))?;
        s = next;
        p = Some(pk);
    }
    let final_pressure = match p {
        Some(p) => p,
        None => stepper.pressure(&s, None)?.0,
    };
    Trajectory::new(snapshots, final_pressure, spin_pressure, dt, k0, cfg.config_hash(), cfg.physics_hash())
}

fn mask_label(cfg: &RunConfig) -> String {
    match cfg.assimilation.mask_rect {
        Some([x0, y0, x1, y1]) => format!("rect:{x0},{y0},{x1},{y1}"),
        None => "full".into(),
    }
}

/// Checks that `reference` was produced by the same physics and holds every
/// snapshot the assimilation will read.
fn check_reference(cfg: &RunConfig, reference: &Trajectory) -> Result<()> {
    if reference.physics_hash != cfg.physics_hash() {
        return Err(Error::Reference(format!(
            "physics hash {} does not match config {}",
            reference.physics_hash,
            cfg.physics_hash()
        )));
    }
    if reference.dt != cfg.time.dt {
        return Err(Error::Reference(format!("reference dt {} differs from {}", reference.dt, cfg.time.dt)));
    }
    let k0 = cfg.spin_steps();
    let end = cfg.total_steps();
    if reference.at_step(k0).is_none() {
        return Err(Error::Reference(format!("no reference snapshot at spin-up step {k0}")));
    }
    match reference.last() {
        Some(last) if last.step >= end => {}
        _ => return Err(Error::Reference(format!("reference ends before step {end}"))),
    }
    Ok(())
}

/// Runs the nudged model against `reference` and records the error to it.
///
/// Observations come from the reference snapshot at the matching step, or
/// the latest earlier one when the reference was stored with a stride. The
/// implicit mode nudges toward the end-of-step observation and the
/// explicit mode toward the start-of-step one.
pub fn run_assimilation(cfg: &RunConfig, reference: &Trajectory) -> Result<(Trajectory, ErrorSeries)> {
    check_reference(cfg, reference)?;
    let setup = cfg.setup()?;
    let observer = cfg.observer()?;
    run_assimilation_with(cfg, &setup, &observer, reference)
}

pub(crate) fn run_assimilation_with(
    cfg: &RunConfig,
    setup: &Setup,
    observer: &Observer,
    reference: &Trajectory,
) -> Result<(Trajectory, ErrorSeries)> {
    let dt = cfg.time.dt;
    let stepper = Stepper { setup, cfl: cfg.time.cfl, dt };
    let transport = stepper.transport();
    let mu = cfg.effective_mu()?;
    let mode = cfg.assimilation.nudging;
    if mode == NudgingMode::Explicit && dt * mu > 1.0 {
        return Err(Error::NudgingStability(dt * mu));
    }
    let k0 = cfg.spin_steps();
    let n_steps = cfg.assimilation_steps();
    let truth0 = &reference
        .at_step(k0)
        .ok_or_else(|| Error::Reference(format!("no reference snapshot at step {k0}")))?
        .saturation;
    let grid = setup.grid;
    grid.ensure_same(truth0.grid(), "reference")?;

    let mut s = match cfg.assimilation.initial {
        InitialState::Zero => CellField::zeros(grid),
        InitialState::Reference => truth0.clone(),
        InitialState::Constant(c) => CellField::constant(grid, c),
    };
    let mut p = match cfg.assimilation.initial {
        InitialState::Reference => reference.spin_pressure.clone(),
        _ => None,
    };

    let mut series = ErrorSeries::new(SeriesMeta { h: observer.resolution(), mu, mask: mask_label(cfg) });
    let v0_stride = cfg.output.v0star_stride;
    let series_stride = cfg.output.series_stride;
    let extra = snapshot_steps(&cfg.output.snapshot_times, dt);
    let mut snapshots = Vec::new();

    for n in 0..=n_steps {
        let t = n as f64 * dt;
        if n % series_stride == 0 || n == n_steps {
            if let Some(truth) = reference.at_step(k0 + n) {
                let e = s.difference(&truth.saturation)?;
                let v0star = if v0_stride > 0 && series.len() % v0_stride == 0 {
                    Some(v0star_norm(&e, &setup.perm, None).map_err(|err| err.at_step(n, t))?.norm)
                } else {
                    None
                };
                series.push(ErrorRecord { t, l2: l2_norm(&e), linf: linf_norm(&e), v0star })?;
            }
        }
        if n == 0 || n == n_steps || extra.contains(&n) {
            snapshots.push(Snapshot { step: n, t, saturation: s.clone() });
        }
        if n == n_steps {
            break;
        }
        let obs_step = match mode {
            NudgingMode::Implicit => k0 + n + 1,
            NudgingMode::Explicit => k0 + n,
        };
        let truth = reference
            .held(obs_step)
            .ok_or_else(|| Error::Reference(format!("no reference snapshot at or before step {obs_step}")))?;
        let observation = observer.project(&truth.saturation)?;
        let nudge = Nudge { observer, observation: &observation, mu, mode };
        let step = || -> Result<(CellField, CellField)> {
            let (pk, flux) = stepper.pressure(&s, p.as_ref())?;
            let (advected, report) = transport.advance(&s, &flux, dt, stepper.cfl)?;
            let (next, _) = apply_nudging(&s, advected, report, dt, &nudge)?;
            Ok((next, pk))
        };
        let (next, pk) = step().map_err(|e| e.at_step(n, t))?;
        s = next;
        p = Some(pk);
    }
    let final_pressure = match p {
        Some(p) => p,
        None => stepper.pressure(&s, None)?.0,
    };
    let traj = Trajectory::new(snapshots, final_pressure, None, dt, 0, cfg.config_hash(), cfg.physics_hash())?;
    Ok((traj, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::WellSpec;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.grid.nx = 8;
        cfg.grid.ny = 8;
        cfg.grid.coarse_nx = 4;
        cfg.grid.coarse_ny = 4;
        cfg.time.dt = 0.05;
        cfg.time.t_spin = 0.5;
        cfg.time.t_end = 1.5;
        cfg.wells = WellSpec::Corners { coefficient: 10.0, length_scale: 100.0 };
        cfg.output.v0star_stride = 5;
        cfg
    }

    #[test]
    fn no_wells_stays_zero() {
        let mut cfg = small();
        cfg.wells = WellSpec::None;
        cfg.time.t_spin = 0.0;
        cfg.time.t_end = 1.0;
        let r = run_reference(&cfg).unwrap();
        assert!(r.snapshots.iter().all(|s| s.saturation.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn reference_stores_requested_steps() {
        let mut cfg = small();
        cfg.output.reference_stride = 4;
        cfg.output.snapshot_times = vec![0.1];
        let r = run_reference(&cfg).unwrap();
        let steps: Vec<usize> = r.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![2, 10, 14, 18, 22, 26, 30]);
        assert!(r.spin_pressure.is_some());
    }

    #[test]
    fn injected_volume_matches_rate() {
        let mut cfg = small();
        cfg.grid.nx = 20;
        cfg.grid.ny = 20;
        let r = run_reference(&cfg).unwrap();
        let last = r.last().unwrap();
        let setup = cfg.setup().unwrap();
        let q = setup.wells.unwrap().rate() * setup.grid.cell_volume();
        let water = last.saturation.integral();
        assert!((water - q * last.t).abs() < 1e-12, "{water} vs {}", q * last.t);
    }

    #[test]
    fn perfect_initialization_is_exact() {
        let mut cfg = small();
        cfg.assimilation.initial = InitialState::Reference;
        let r = run_reference(&cfg).unwrap();
        let (_, series) = run_assimilation(&cfg, &r).unwrap();
        assert_eq!(series.len(), cfg.assimilation_steps() + 1);
        assert!(series.records().iter().all(|e| e.l2 == 0.0));
    }

    #[test]
    fn strided_reference_is_accepted_and_mismatch_refused() {
        let mut cfg = small();
        cfg.output.reference_stride = 2;
        let r = run_reference(&cfg).unwrap();
        let (_, series) = run_assimilation(&cfg, &r).unwrap();
        assert_eq!(series.len(), cfg.assimilation_steps() / 2 + 1);

        let mut other = cfg.clone();
        other.fluid.phi = 0.5;
        assert!(matches!(run_assimilation(&other, &r), Err(Error::Reference(_))));
        let mut longer = cfg.clone();
        longer.time.t_end = 3.0;
        assert!(matches!(run_assimilation(&longer, &r), Err(Error::Reference(_))));
    }

    #[test]
    fn explicit_stability_is_checked() {
        let mut cfg = small();
        cfg.assimilation.nudging = NudgingMode::Explicit;
        let r = run_reference(&cfg).unwrap();
        assert!(matches!(run_assimilation(&cfg, &r), Err(Error::NudgingStability(_))));
        cfg.assimilation.mu = 10.0;
        assert!(run_assimilation(&cfg, &r).is_ok());
    }
}
