//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::CellField;
use crate::grid::{CoarseMap, Grid, Mask};
use crate::model::{Capillarity, CapillaryParams, FluidModel, FluidParams, WellConfig};
use crate::observe::Observer;
use crate::transport::{CapillaryDiffusion, NudgingMode};

use super::permeability;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub coarse_nx: usize,
    pub coarse_ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 100, ny: 100, coarse_nx: 10, coarse_ny: 10, lx: 1.0, ly: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PermeabilitySpec {
    Homogeneous {
        value: f64,
    },
    /// Horizontal bands of equal thickness, listed from `y = 0` upward.
    Layered {
        values: Vec<f64>,
    },
    /// `exp(ln(mean) + sigma * z)` with `z` a unit-variance Gaussian field
    /// smoothed over `correlation_cells` cells.
    Lognormal {
        seed: u64,
        mean: f64,
        sigma: f64,
        correlation_cells: usize,
    },
    /// Raster file: `nx ny` on the first line, then positive values row-major.
    File {
        path: PathBuf,
    },
}

impl Default for PermeabilitySpec {
    fn default() -> Self {
        PermeabilitySpec::Homogeneous { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum WellSpec {
    /// Injector in cell `(0, 0)`, producer in the opposite corner, rate
    /// `coefficient / h^2` with `h` the fine cell side in units where the
    /// domain side is `length_scale`.
    Corners {
        coefficient: f64,
        length_scale: f64,
    },
    Explicit {
        injector: [usize; 2],
        producer: [usize; 2],
        rate: f64,
    },
    None,
}

impl Default for WellSpec {
    fn default() -> Self {
        WellSpec::Corners { coefficient: 10.0, length_scale: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub dt: f64,
    /// Reference horizon; the assimilation window is `t_end - t_spin`.
    pub t_end: f64,
    /// Transport sub-steps are sized to this CFL number.
    pub cfl: f64,
    /// Reference time at which assimilation starts.
    pub t_spin: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec { dt: 0.05, t_end: 125.0, cfl: 1.0, t_spin: 25.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuPolicy {
    #[default]
    Fixed,
    /// `mu = mu0 / H`.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Zero,
    /// Start from the reference state at `t_spin`.
    Reference,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssimilationSpec {
    pub mu: f64,
    pub mu_policy: MuPolicy,
    pub mu0: f64,
    /// Observed rectangle `[x0, y0, x1, y1]`; absent means the full domain.
    pub mask_rect: Option<[f64; 4]>,
    pub nudging: NudgingMode,
    pub initial: InitialState,
}

impl Default for AssimilationSpec {
    fn default() -> Self {
        AssimilationSpec {
            mu: 200.0,
            mu_policy: MuPolicy::Fixed,
            mu0: 20.0,
            mask_rect: None,
            nudging: NudgingMode::Implicit,
            initial: InitialState::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Extra snapshot times (reference clock for `reference`, assimilation
    /// clock for `assimilate`).
    pub snapshot_times: Vec<f64>,
    /// Record the error every `series_stride` assimilation steps.
    pub series_stride: usize,
    /// Evaluate the dual norm on every `v0star_stride`-th record; 0 disables.
    pub v0star_stride: usize,
    /// Store the reference every `reference_stride` steps from `t_spin`;
    /// values above 1 make the assimilation hold the last observation.
    pub reference_stride: usize,
    pub vtk: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { snapshot_times: Vec::new(), series_stride: 1, v0star_stride: 20, reference_stride: 1, vtk: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepVariant {
    pub h: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Assimilation time at which each variant's error is reported.
    pub probe_time: f64,
    pub variants: Vec<SweepVariant>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            probe_time: 10.0,
            variants: vec![
                SweepVariant { h: 0.2, mu: 100.0 },
                SweepVariant { h: 0.1, mu: 200.0 },
                SweepVariant { h: 0.05, mu: 400.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub fluid: FluidParams,
    pub capillary: CapillaryParams,
    pub permeability: PermeabilitySpec,
    pub wells: WellSpec,
    pub time: TimeSpec,
    pub assimilation: AssimilationSpec,
    pub output: OutputSpec,
    pub sweep: SweepSpec,
}

/// Fields that determine the reference dynamics.
#[derive(Serialize)]
struct PhysicsKey<'a> {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    fluid: &'a FluidParams,
    capillary: &'a CapillaryParams,
    permeability: &'a PermeabilitySpec,
    wells: &'a WellSpec,
    dt: f64,
    cfl: f64,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            Error::Parse { location, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        // raster paths are relative to the config file
        if let PermeabilitySpec::File { path: raster } = &mut cfg.permeability {
            if raster.is_relative() {
                if let Some(dir) = path.parent() {
                    *raster = dir.join(&*raster);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return bad(format!("time.dt must be positive, got {}", t.dt));
        }
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            return bad(format!("time.cfl must lie in (0, 1], got {}", t.cfl));
        }
        if !(t.t_spin >= 0.0 && t.t_spin < t.t_end) {
            return bad(format!("need 0 <= t_spin < t_end, got {} and {}", t.t_spin, t.t_end));
        }
        steps_for(t.t_spin, t.dt, "time.t_spin")?;
        steps_for(t.t_end, t.dt, "time.t_end")?;
        let a = &self.assimilation;
        if !(a.mu.is_finite() && a.mu >= 0.0) {
            return bad(format!("assimilation.mu must be >= 0, got {}", a.mu));
        }
        if !(a.mu0.is_finite() && a.mu0 >= 0.0) {
            return bad(format!("assimilation.mu0 must be >= 0, got {}", a.mu0));
        }
        if let InitialState::Constant(v) = a.initial {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("assimilation.initial constant must lie in [0, 1], got {v}"));
            }
        }
        let o = &self.output;
        if o.series_stride == 0 || o.reference_stride == 0 {
            return bad("output strides must be positive".into());
        }
        if !(self.sweep.probe_time > 0.0) {
            return bad("sweep.probe_time must be positive".into());
        }
        steps_for(self.sweep.probe_time, t.dt, "sweep.probe_time")?;
        self.coarse_map()?;
        if let Some([x0, y0, x1, y1]) = a.mask_rect {
            Mask::rect(&self.coarse_map()?, x0, y0, x1, y1).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn fine_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.nx, g.ny, g.lx, g.ly).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn coarse_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.coarse_nx, g.coarse_ny, g.lx, g.ly).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn coarse_map(&self) -> Result<CoarseMap> {
        CoarseMap::new(self.fine_grid()?, self.coarse_grid()?).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn observer(&self) -> Result<Observer> {
        let map = self.coarse_map()?;
        let mask = match self.assimilation.mask_rect {
            Some([x0, y0, x1, y1]) => Mask::rect(&map, x0, y0, x1, y1)?,
            None => Mask::full(&map),
        };
        Observer::new(map, mask)
    }

    /// Nudging strength after applying the policy.
    pub fn effective_mu(&self) -> Result<f64> {
        let a = &self.assimilation;
        Ok(match a.mu_policy {
            MuPolicy::Fixed => a.mu,
            MuPolicy::Scaled => a.mu0 / self.coarse_grid()?.hx(),
        })
    }

    pub fn spin_steps(&self) -> usize {
        steps_for(self.time.t_spin, self.time.dt, "").unwrap_or(0)
    }

    pub fn total_steps(&self) -> usize {
        steps_for(self.time.t_end, self.time.dt, "").unwrap_or(0)
    }

    pub fn assimilation_steps(&self) -> usize {
        self.total_steps() - self.spin_steps()
    }

    /// Hex SHA-256 of the full configuration.
    pub fn config_hash(&self) -> String {
        hex_digest(self.to_toml_string().as_bytes())
    }

    /// Hex SHA-256 of the fields that determine the reference dynamics.
    pub fn physics_hash(&self) -> String {
        let key = PhysicsKey {
            nx: self.grid.nx,
            ny: self.grid.ny,
            lx: self.grid.lx,
            ly: self.grid.ly,
            fluid: &self.fluid,
            capillary: &self.capillary,
            permeability: &self.permeability,
            wells: &self.wells,
            dt: self.time.dt,
            cfl: self.time.cfl,
        };
        hex_digest(toml::to_string(&key).expect("physics key serializes").as_bytes())
    }

    /// Materializes grids, models, permeability and wells.
    pub fn setup(&self) -> Result<Setup> {
        self.validate()?;
        let grid = self.fine_grid()?;
        let fluid = FluidModel::new(self.fluid)?;
        let capillarity = Capillarity::new(self.capillary)?;
        let perm = permeability::build(&self.permeability, &grid)?;
        let wells = match &self.wells {
            WellSpec::None => None,
            WellSpec::Corners { coefficient, length_scale } => {
                Some(WellConfig::corners(&grid, *coefficient, *length_scale)?)
            }
            WellSpec::Explicit { injector, producer, rate } => {
                for [i, j] in [injector, producer] {
                    if *i >= grid.nx() || *j >= grid.ny() {
                        return Err(Error::Config(format!("well cell ({i}, {j}) outside the grid")));
                    }
                }
                Some(WellConfig::new(
                    &grid,
                    grid.index(injector[0], injector[1]),
                    grid.index(producer[0], producer[1]),
                    *rate,
                )?)
            }
        };
        let capillary =
            if capillarity.is_enabled() { Some(CapillaryDiffusion::new(&perm, capillarity)?) } else { None };
        Ok(Setup { grid, fluid, perm, wells, capillary })
    }
}

/// Materialized physical setup shared by reference and assimilation runs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid,
    pub fluid: FluidModel,
    pub perm: CellField,
    pub wells: Option<WellConfig>,
    pub capillary: Option<CapillaryDiffusion>,
}

/// Number of whole `dt` steps in `t`; errors if `t` is not a multiple of `dt`.
pub(crate) fn steps_for(t: f64, dt: f64, what: &str) -> Result<usize> {
    let n = (t / dt).round();
    if !(n >= 0.0) || (n * dt - t).abs() > 1e-9 * dt.max(t.abs()) {
        return Err(Error::Config(format!("{what} = {t} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.spin_steps(), 500);
        assert_eq!(cfg.total_steps(), 2500);
        assert_eq!(cfg.assimilation_steps(), 2000);
        assert_eq!(cfg.effective_mu().unwrap(), 200.0);
    }

    #[test]
    fn nested_keys_parse() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [grid]
            nx = 20
            ny = 20
            coarse_nx = 4
            coarse_ny = 4

            [permeability]
            kind = "lognormal"
            seed = 3
            mean = 1.0
            sigma = 0.5
            correlation_cells = 3

            [wells]
            mode = "explicit"
            injector = [0, 19]
            producer = [19, 0]
            rate = 2.5

            [assimilation]
            mu_policy = "scaled"
            mu0 = 20.0
            mask_rect = [0.0, 0.0, 0.5, 0.5]
            nudging = "explicit"
            initial = { constant = 0.25 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.grid.nx, 20);
        assert!(matches!(cfg.permeability, PermeabilitySpec::Lognormal { seed: 3, .. }));
        assert_eq!(cfg.assimilation.initial, InitialState::Constant(0.25));
        assert!((cfg.effective_mu().unwrap() - 80.0).abs() < 1e-12);
        assert_eq!(cfg.observer().unwrap().mask().count(), 4);
        let setup = cfg.setup().unwrap();
        assert_eq!(setup.wells.unwrap().injector(), setup.grid.index(0, 19));
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in [
            "bogus = 1",
            "[grid]\nnz = 3",
            "[permeability]\nkind = \"homogeneous\"\nvalue = 1.0\nextra = 2",
            "[wells]\nmode = \"sideways\"",
            "[time]\ndt = 0.1\ndtt = 0.2",
        ] {
            let err = RunConfig::from_toml_str(text).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{text}: {err}");
        }
    }

    #[test]
    fn invalid_values_are_errors() {
        for text in [
            "[time]\ndt = -1.0",
            "[time]\nt_spin = 200.0",
            "[time]\nt_spin = 0.03",
            "[grid]\ncoarse_nx = 7",
            "[assimilation]\nmu = -2.0",
            "[assimilation]\nmask_rect = [0.5, 0.0, 0.5, 1.0]",
            "[output]\nseries_stride = 0",
        ] {
            assert!(RunConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hashes_track_relevant_fields() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.assimilation.mu = 5.0;
        assert_eq!(a.physics_hash(), b.physics_hash());
        assert_ne!(a.config_hash(), b.config_hash());
        b.time.dt = 0.025;
        assert_ne!(a.physics_hash(), b.physics_hash());
        assert_eq!(a.config_hash(), RunConfig::default().config_hash());
    }

    #[test]
    fn serialized_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.assimilation.mask_rect = Some([0.0, 0.0, 0.25, 0.25]);
        cfg.assimilation.initial = InitialState::Constant(0.5);
        cfg.wells = WellSpec::None;
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
