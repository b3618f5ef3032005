//! Explicit first-order upwind transport of water saturation in
//! fractional-flow form, optional explicit capillary diffusion, and the
//! nudged update that relaxes the coarse-grid averages of the computed
//! saturation toward observed ones.
//!
//! One step of size `dt` is
//!
//! ```text
//! S'_i = S_i - dt / (phi vol) * sum_f sign * f_w(S_upwind) F_f
//!            + dt / (phi vol) * sum_f T_f^cap (theta(S_j) - theta(S_i))
//!            + dt * q_w,i
//! ```
//!
//! followed by a clamp to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CellField, FaceFlux};
use crate::model::{Capillarity, FluidModel, WellConfig};
use crate::observe::{Observation, Observer};
use crate::pressure::{PressureSystem, SolverSettings};

/// Relative slack accepted on top of the CFL bound. Fluxes come from an
/// iterative solve, so a step sized exactly at the bound can exceed the
/// recomputed bound by the solver residual.
pub const CFL_SLACK: f64 = 1e-6;

/// Diagnostic record of one transport (and possibly nudging) update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub dt: f64,
    /// Number of transport sub-steps taken.
    pub substeps: usize,
    /// `sum S vol` before the update.
    pub water_before: f64,
    /// `sum S' vol` after the update (after clamping).
    pub water_after: f64,
    /// `dt * sum q_w vol` added by the wells.
    pub injected: f64,
    /// Signed volume added by clamping.
    pub clamp_volume: f64,
    /// Largest pointwise change made by clamping.
    pub clamp: f64,
    /// Signed volume added by the nudging correction.
    pub nudge_volume: f64,
    /// L2 norm of the nudging correction.
    pub nudge_l2: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl StepReport {
    /// `water_after - water_before - injected - clamp_volume - nudge_volume`.
    pub fn balance_error(&self) -> f64 {
        self.water_after - self.water_before - self.injected - self.clamp_volume - self.nudge_volume
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NudgingMode {
    /// Backward Euler in the nudging term; unconditionally stable.
    #[default]
    Implicit,
    /// Forward Euler; requires `dt * mu <= 1`.
    Explicit,
}

/// Relaxation toward an observation.
///
/// In explicit mode `observation` must describe the reference at the start
/// of the step, in implicit mode at its end.
#[derive(Debug, Clone, Copy)]
pub struct Nudge<'a> {
    pub observer: &'a Observer,
    pub observation: &'a Observation,
    pub mu: f64,
    pub mode: NudgingMode,
}

/// Explicit capillary diffusion with transmissibilities built from the
/// absolute permeability alone.
#[derive(Debug, Clone)]
pub struct CapillaryDiffusion {
    capillarity: Capillarity,
    ops: PressureSystem,
}

impl CapillaryDiffusion {
    pub fn new(perm: &CellField, capillarity: Capillarity) -> Result<Self> {
        let ops = PressureSystem::from_conductivity(*perm.grid(), perm.values(), SolverSettings::default())?;
        Ok(CapillaryDiffusion { capillarity, ops })
    }

    pub fn capillarity(&self) -> &Capillarity {
        &self.capillarity
    }

    /// Forward-Euler stability bound `min phi vol / (sup b * sum_f T_f)`.
    pub fn stable_dt(&self, phi: f64) -> f64 {
        let vol = self.ops.grid().cell_volume();
        self.rates().filter(|&r| r > 0.0).map(|r| phi * vol / r).fold(f64::INFINITY, f64::min)
    }

    /// Per-cell diffusive rate `sup b * sum_f T_f`.
    fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        let sup = if self.capillarity.is_enabled() { self.capillarity.sup_b() } else { 0.0 };
        self.ops.diagonal().iter().map(move |d| sup * d)
    }
}

/// `cfl * min_i phi vol / (outflow_i * max |f_w'|)`; infinite when nothing
/// leaves any cell.
pub fn cfl_dt(flux: &FaceFlux, fluid: &FluidModel, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidArgument(format!("CFL number must lie in (0, 1], got {cfl}")));
    }
    let vol = flux.grid().cell_volume();
    let slope = fluid.max_fw_slope();
    let bound = flux
        .total_outflow()
        .iter()
        .filter(|&&out| out > 0.0)
        .map(|out| fluid.porosity() * vol / (out * slope))
        .fold(f64::INFINITY, f64::min);
    Ok(cfl * bound)
}

/// Transport problem: fluid, optional wells and optional capillarity.
#[derive(Debug, Clone, Copy)]
pub struct Transport<'a> {
    fluid: &'a FluidModel,
    wells: Option<&'a WellConfig>,
    capillary: Option<&'a CapillaryDiffusion>,
}

impl<'a> Transport<'a> {
    pub fn new(fluid: &'a FluidModel) -> Self {
        Transport { fluid, wells: None, capillary: None }
    }

    pub fn with_wells(mut self, wells: Option<&'a WellConfig>) -> Self {
        self.wells = wells;
        self
    }

    pub fn with_capillary(mut self, capillary: Option<&'a CapillaryDiffusion>) -> Self {
        self.capillary = capillary.filter(|c| c.capillarity.is_enabled());
        self
    }

    /// Largest stable step. With capillarity the advective and diffusive
    /// rates of each cell are added, since both act in the same explicit
    /// update.
    pub fn stable_dt(&self, flux: &FaceFlux, cfl: f64) -> Result<f64> {
        let Some(cap) = self.capillary else {
            return cfl_dt(flux, self.fluid, cfl);
        };
        cfl_dt(flux, self.fluid, cfl)?;
        flux.grid().ensure_same(cap.ops.grid(), "capillary transmissibilities")?;
        let vol = flux.grid().cell_volume();
        let slope = self.fluid.max_fw_slope();
        let bound = flux
            .total_outflow()
            .iter()
            .zip(cap.rates())
            .map(|(out, d)| out * slope + d)
            .filter(|&r| r > 0.0)
            .map(|r| self.fluid.porosity() * vol / r)
            .fold(f64::INFINITY, f64::min);
        Ok(cfl * bound)
    }

    /// One explicit step; `dt` above the stability bound is rejected.
    pub fn step(&self, s: &CellField, flux: &FaceFlux, dt: f64) -> Result<(CellField, StepReport)> {
        s.grid().ensure_same(flux.grid(), "transport step")?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let bound = self.stable_dt(flux, 1.0)?;
        if dt > bound * (1.0 + CFL_SLACK) {
            return Err(Error::Cfl { dt, bound });
        }
        self.update(s, flux, dt)
    }

    /// Advances by `dt` with as many equal sub-steps as the CFL number `cfl`
    /// requires.
    pub fn advance(&self, s: &CellField, flux: &FaceFlux, dt: f64, cfl: f64) -> Result<(CellField, StepReport)> {
        let bound = self.stable_dt(flux, cfl)?;
        let n = if bound.is_finite() { ((dt / bound - CFL_SLACK).ceil() as usize).max(1) } else { 1 };
        let sub = dt / n as f64;
        let (mut cur, mut report) = self.step(s, flux, sub)?;
        for _ in 1..n {
            let (next, r) = self.step(&cur, flux, sub)?;
            report.injected += r.injected;
            report.clamp_volume += r.clamp_volume;
            report.clamp = report.clamp.max(r.clamp);
            report.water_after = r.water_after;
            report.s_min = r.s_min;
            report.s_max = r.s_max;
            cur = next;
        }
        report.dt = dt;
        report.substeps = n;
        Ok((cur, report))
    }

    /// Transport step followed by nudging toward `nudge.observation`. With
    /// `mu == 0` the result is exactly that of [`step`](Self::step).
    pub fn nudged_step(
        &self,
        s: &CellField,
        flux: &FaceFlux,
        dt: f64,
        nudge: &Nudge<'_>,
    ) -> Result<(CellField, StepReport)> {
        check_nudge(s, dt, nudge)?;
        let (advected, report) = self.step(s, flux, dt)?;
        apply_nudging(s, advected, report, dt, nudge)
    }

    fn update(&self, s: &CellField, flux: &FaceFlux, dt: f64) -> Result<(CellField, StepReport)> {
        let grid = *s.grid();
        let vol = grid.cell_volume();
        let coef = dt / (self.fluid.porosity() * vol);
        let sv = s.values();
        let fw: Vec<f64> = sv.iter().map(|&v| self.fluid.fractional_flow(v)).collect();
        let mut next = sv.to_vec();

        flux.for_each_face(|a, b, f| {
            let up = if f >= 0.0 { a } else { b };
            let adv = coef * f * fw[up];
            next[a] -= adv;
            next[b] += adv;
        });

        if let Some(cap) = self.capillary {
            let theta: Vec<f64> = sv.iter().map(|&v| cap.capillarity.theta(v)).collect();
            let nx = grid.nx();
            let tx = cap.ops.x_transmissibilities();
            let ty = cap.ops.y_transmissibilities();
            for j in 0..grid.ny() {
                for i in 0..nx - 1 {
                    let a = j * nx + i;
                    let d = coef * tx[j * (nx - 1) + i] * (theta[a + 1] - theta[a]);
                    next[a] += d;
                    next[a + 1] -= d;
                }
            }
            for (a, t) in ty.iter().enumerate() {
                let d = coef * t * (theta[a + nx] - theta[a]);
                next[a] += d;
                next[a + nx] -= d;
            }
        }

        let mut injected = 0.0;
        if let Some(w) = self.wells {
            let (_, qw) = w.sources(s)?;
            for (n, q) in next.iter_mut().zip(qw.values()) {
                if *q != 0.0 {
                    *n += dt * q;
                    injected += dt * q * vol;
                }
            }
        }

        let water_before = sv.iter().sum::<f64>() * vol;
        let (clamp, clamp_volume) = clamp_unit(&mut next, vol);
        let field = CellField::from_vec_unchecked(grid, next);
        let report = StepReport {
            dt,
            substeps: 1,
            water_before,
            water_after: field.integral(),
            injected,
            clamp_volume,
            clamp,
            nudge_volume: 0.0,
            nudge_l2: 0.0,
            s_min: field.min(),
            s_max: field.max(),
        };
        Ok((field, report))
    }
}

fn check_nudge(s: &CellField, dt: f64, nudge: &Nudge<'_>) -> Result<()> {
    nudge.observer.map().fine().ensure_same(s.grid(), "nudging observer")?;
    if nudge.observation.len() != nudge.observer.map().coarse().num_cells() {
        return Err(Error::GridMismatch(format!(
            "observation has {} entries, observer expects {}",
            nudge.observation.len(),
            nudge.observer.map().coarse().num_cells()
        )));
    }
    if !(nudge.mu.is_finite() && nudge.mu >= 0.0) {
        return Err(Error::InvalidArgument(format!("nudging strength must be >= 0, got {}", nudge.mu)));
    }
    if nudge.mode == NudgingMode::Explicit && dt * nudge.mu > 1.0 {
        return Err(Error::NudgingStability(dt * nudge.mu));
    }
    Ok(())
}

/// Applies the nudging correction to an already transported field.
///
/// `before` is the state at the start of the step (used by explicit mode)
/// and `advected` the transported state. On observed fine cells:
///
/// * explicit: `S' = S* - dt mu (Pi S_before - obs)`
/// * implicit: `S' = S* - dt mu / (1 + dt mu) (Pi S* - obs)`
///
/// The implicit form is the exact backward-Euler solution because `Pi` is a
/// projection onto constants over each coarse cell.
pub fn apply_nudging(
    before: &CellField,
    advected: CellField,
    mut report: StepReport,
    dt: f64,
    nudge: &Nudge<'_>,
) -> Result<(CellField, StepReport)> {
    check_nudge(before, dt, nudge)?;
    if nudge.mu == 0.0 {
        return Ok((advected, report));
    }
    let (projected, gain) = match nudge.mode {
        NudgingMode::Explicit => (nudge.observer.project(before)?, dt * nudge.mu),
        NudgingMode::Implicit => {
            let dm = dt * nudge.mu;
            (nudge.observer.project(&advected)?, dm / (1.0 + dm))
        }
    };
    let grid = *advected.grid();
    let vol = grid.cell_volume();
    let map = nudge.observer.map();
    let mut next = advected.into_values();
    let (mut sq, mut added) = (0.0, 0.0);
    for c in 0..map.coarse().num_cells() {
        let (Some(model), Some(obs)) = (projected.get(c), nudge.observation.get(c)) else {
            continue;
        };
        let corr = gain * (model - obs);
        if corr == 0.0 {
            continue;
        }
        for &k in map.children(c) {
            next[k] -= corr;
        }
        let n = map.children(c).len() as f64;
        sq += corr * corr * n;
        added -= corr * n;
    }
    let (clamp, clamp_volume) = clamp_unit(&mut next, vol);
    let field = CellField::from_vec_unchecked(grid, next);
    report.nudge_volume = added * vol;
    report.nudge_l2 = (sq * vol).sqrt();
    report.clamp = report.clamp.max(clamp);
    report.clamp_volume += clamp_volume;
    report.water_after = field.integral();
    report.s_min = field.min();
    report.s_max = field.max();
    Ok((field, report))
}

fn clamp_unit(values: &mut [f64], vol: f64) -> (f64, f64) {
    let (mut max, mut added) = (0.0f64, 0.0);
    for v in values.iter_mut() {
        let c = v.clamp(0.0, 1.0);
        if c != *v {
            max = max.max((c - *v).abs());
            added += c - *v;
            *v = c;
        }
    }
    (max, added * vol)
}
