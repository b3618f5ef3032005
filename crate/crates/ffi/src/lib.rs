//! C ABI over `porous_da`.
//!
//! Objects cross the boundary as opaque handles created by `pda_*_new`,
//! `pda_run_*` or `pda_*_read` functions and released with the matching
//! `pda_*_free`. Every fallible function returns a [`PdaStatus`]; on failure
//! [`pda_last_error_message`] describes the error for the calling thread.
//! Panics are caught and reported as [`PdaStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use porous_da::diagnostics::{fit_decay, v0star_norm, ErrorSeries, Metric};
use porous_da::harness::config::InitialState;
use porous_da::harness::{io, run_assimilation, run_reference, RunConfig, Trajectory};
use porous_da::{CellField, Error, Grid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Grid = 3,
    GridMismatch = 4,
    Assembly = 5,
    Solvability = 6,
    Solver = 7,
    Cfl = 8,
    NudgingStability = 9,
    Config = 10,
    Parse = 11,
    Reference = 12,
    Io = 13,
    OutOfRange = 14,
    BufferTooSmall = 15,
    Utf8 = 16,
    Panic = 99,
}

impl From<&Error> for PdaStatus {
    fn from(e: &Error) -> Self {
        match e.kind() {
            "grid" => PdaStatus::Grid,
            "grid_mismatch" => PdaStatus::GridMismatch,
            "assembly" => PdaStatus::Assembly,
            "solvability" => PdaStatus::Solvability,
            "solver" => PdaStatus::Solver,
            "cfl" => PdaStatus::Cfl,
            "nudging_stability" => PdaStatus::NudgingStability,
            "config" => PdaStatus::Config,
            "parse" => PdaStatus::Parse,
            "reference" => PdaStatus::Reference,
            "io" => PdaStatus::Io,
            _ => PdaStatus::InvalidArgument,
        }
    }
}

/// Norm selector for decay fits.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdaMetric {
    L2 = 0,
    Linf = 1,
    V0Star = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PdaErrorRecord {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    /// Meaningful only when `has_v0star` is true.
    pub v0star: f64,
    pub has_v0star: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PdaDecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Run configuration.
pub struct PdaConfig(RunConfig);

/// Stored saturation snapshots of a run.
pub struct PdaTrajectory(Trajectory);

/// Error records of an assimilation run.
pub struct PdaSeries(ErrorSeries);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PdaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PdaStatus::from(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> PdaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            PdaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PdaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(PdaStatus::Utf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult {
    let slot = as_mut(out, "output pointer")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn field(nx: usize, ny: usize, lx: f64, ly: f64, values: *const f64, what: &str) -> Result<CellField, Failure> {
    let grid = Grid::new(nx, ny, lx, ly)?;
    if values.is_null() {
        return Err(null(what));
    }
    let data = std::slice::from_raw_parts(values, grid.num_cells()).to_vec();
    Ok(CellField::new(grid, data)?)
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pda_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pda_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn pda_config_new(out: *mut *mut PdaConfig) -> PdaStatus {
    guard(|| put(out, PdaConfig(RunConfig::default())))
}

/// Parses a TOML configuration document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pda_config_from_toml(toml: *const c_char, out: *mut *mut PdaConfig) -> PdaStatus {
    guard(|| {
        let cfg = RunConfig::from_toml_str(as_str(toml, "toml")?)?;
        put(out, PdaConfig(cfg))
    })
}

/// Reads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pda_config_read(path: *const c_char, out: *mut *mut PdaConfig) -> PdaStatus {
    guard(|| {
        let cfg = RunConfig::from_file(Path::new(as_str(path, "path")?))?;
        put(out, PdaConfig(cfg))
    })
}

/// Serializes the configuration to TOML. Free the result with
/// [`pda_string_free`]; NULL on failure.
///
/// # Safety
/// `cfg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pda_config_to_toml(cfg: *const PdaConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => into_c_string(c.0.to_toml_string()),
        None => ptr::null_mut(),
    }
}

/// Hex SHA-256 of the configuration. Free with [`pda_string_free`].
///
/// # Safety
/// `cfg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pda_config_hash(cfg: *const PdaConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => into_c_string(c.0.config_hash()),
        None => ptr::null_mut(),
    }
}

fn validated(cfg: &mut RunConfig, edit: impl FnOnce(&mut RunConfig)) -> FfiResult {
    let mut next = cfg.clone();
    edit(&mut next);
    next.validate()?;
    *cfg = next;
    Ok(())
}

/// Sets a fixed nudging strength.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pda_config_set_mu(cfg: *mut PdaConfig, mu: f64) -> PdaStatus {
    guard(|| {
        let c = as_mut(cfg, "config")?;
        validated(&mut c.0, |c| {
            c.assimilation.mu = mu;
            c.assimilation.mu_policy = porous_da::harness::config::MuPolicy::Fixed;
        })
    })
}

/// Sets `dt`, the spin-up time and the reference horizon.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pda_config_set_time(cfg: *mut PdaConfig, dt: f64, t_spin: f64, t_end: f64) -> PdaStatus {
    guard(|| {
        let c = as_mut(cfg, "config")?;
        validated(&mut c.0, |c| {
            c.time.dt = dt;
            c.time.t_spin = t_spin;
            c.time.t_end = t_end;
        })
    })
}

/// Sets fine and coarse cell counts.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pda_config_set_grid(
    cfg: *mut PdaConfig,
    nx: usize,
    ny: usize,
    coarse_nx: usize,
    coarse_ny: usize,
) -> PdaStatus {
    guard(|| {
        let c = as_mut(cfg, "config")?;
        validated(&mut c.0, |c| {
            c.grid.nx = nx;
            c.grid.ny = ny;
            c.grid.coarse_nx = coarse_nx;
            c.grid.coarse_ny = coarse_ny;
        })
    })
}

/// Restricts observations to the rectangle `[x0, x1] x [y0, y1]`; pass
/// `observe_all = true` to observe the whole domain instead.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pda_config_set_mask(
    cfg: *mut PdaConfig,
    observe_all: bool,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
) -> PdaStatus {
    guard(|| {
        let c = as_mut(cfg, "config")?;
        validated(&mut c.0, |c| {
            c.assimilation.mask_rect = if observe_all { None } else { Some([x0, y0, x1, y1]) };
        })
    })
}

/// Starts the assimilated run from the reference state instead of zero.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pda_config_set_start_from_reference(cfg: *mut PdaConfig, enabled: bool) -> PdaStatus {
    guard(|| {
        let c = as_mut(cfg, "config")?;
        c.0.assimilation.initial = if enabled { InitialState::Reference } else { InitialState::Zero };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pda_config_free(cfg: *mut PdaConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the reference from zero saturation.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pda_run_reference(cfg: *const PdaConfig, out: *mut *mut PdaTrajectory) -> PdaStatus {
    guard(|| {
        let c = as_ref(cfg, "config")?;
        let traj = run_reference(&c.0)?;
        put(out, PdaTrajectory(traj))
    })
}

/// Runs the nudged model against `reference`. Either output pointer may be
/// NULL when that result is not wanted.
///
/// # Safety
/// `cfg` and `reference` must be live handles; non-NULL outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pda_run_assimilation(
    cfg: *const PdaConfig,
    reference: *const PdaTrajectory,
    out_trajectory: *mut *mut PdaTrajectory,
    out_series: *mut *mut PdaSeries,
) -> PdaStatus {
    guard(|| {
        let c = as_ref(cfg, "config")?;
        let r = as_ref(reference, "reference")?;
        let (traj, series) = run_assimilation(&c.0, &r.0)?;
        if !out_trajectory.is_null() {
            put(out_trajectory, PdaTrajectory(traj))?;
        }
        if !out_series.is_null() {
            put(out_series, PdaSeries(series))?;
        }
        Ok(())
    })
}

/// Number of stored snapshots; 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pda_trajectory_len(traj: *const PdaTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.snapshots.len())
}

/// Fine grid cell counts.
///
/// # Safety
/// `traj` must be a live handle; `nx` and `ny` writable.
#[no_mangle]
pub unsafe extern "C" fn pda_trajectory_dims(traj: *const PdaTrajectory, nx: *mut usize, ny: *mut usize) -> PdaStatus {
    guard(|| {
        let g = *as_ref(traj, "trajectory")?.0.final_pressure.grid();
        *as_mut(nx, "nx")? = g.nx();
        *as_mut(ny, "ny")? = g.ny();
        Ok(())
    })
}

/// Copies snapshot `index` into `values` (row-major, `len >= nx * ny`) and
/// reports its step and time.
///
/// # Safety
/// `traj` must be a live handle; `step` and `t` writable; `values` must
/// hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pda_trajectory_snapshot(
    traj: *const PdaTrajectory,
    index: usize,
    step: *mut usize,
    t: *mut f64,
    values: *mut f64,
    len: usize,
) -> PdaStatus {
    guard(|| {
        let tr = &as_ref(traj, "trajectory")?.0;
        let snap = tr
            .snapshots
            .get(index)
            .ok_or_else(|| Failure(PdaStatus::OutOfRange, format!("snapshot {index} of {}", tr.snapshots.len())))?;
        let data = snap.saturation.values();
        if len < data.len() {
            return Err(Failure(
                PdaStatus::BufferTooSmall,
                format!("buffer holds {len} values, snapshot has {}", data.len()),
            ));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        std::slice::from_raw_parts_mut(values, data.len()).copy_from_slice(data);
        *as_mut(step, "step")? = snap.step;
        *as_mut(t, "t")? = snap.t;
        Ok(())
    })
}

/// Writes the trajectory directory (manifest plus binary snapshots).
///
/// # Safety
/// `traj` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pda_trajectory_write(traj: *const PdaTrajectory, dir: *const c_char) -> PdaStatus {
    guard(|| {
        let tr = as_ref(traj, "trajectory")?;
        io::write_trajectory_dir(Path::new(as_str(dir, "dir")?), &tr.0, &[])?;
        Ok(())
    })
}

/// Reads a trajectory directory written by [`pda_trajectory_write`].
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pda_trajectory_read(dir: *const c_char, out: *mut *mut PdaTrajectory) -> PdaStatus {
    guard(|| {
        let tr = io::read_trajectory_dir(Path::new(as_str(dir, "dir")?))?;
        put(out, PdaTrajectory(tr))
    })
}

/// # Safety
/// `traj` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pda_trajectory_free(traj: *mut PdaTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of records; 0 for NULL.
///
/// # Safety
/// `series` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pda_series_len(series: *const PdaSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `series` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pda_series_get(series: *const PdaSeries, index: usize, out: *mut PdaErrorRecord) -> PdaStatus {
    guard(|| {
        let s = &as_ref(series, "series")?.0;
        let r = s
            .records()
            .get(index)
            .ok_or_else(|| Failure(PdaStatus::OutOfRange, format!("record {index} of {}", s.len())))?;
        *as_mut(out, "record")? = PdaErrorRecord {
            t: r.t,
            l2: r.l2,
            linf: r.linf,
            v0star: r.v0star.unwrap_or(0.0),
            has_v0star: r.v0star.is_some(),
        };
        Ok(())
    })
}

/// Writes the series as CSV with header `t,l2,linf,v0star`.
///
/// # Safety
/// `series` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pda_series_write_csv(series: *const PdaSeries, path: *const c_char) -> PdaStatus {
    guard(|| {
        let s = as_ref(series, "series")?;
        io::write_series(Path::new(as_str(path, "path")?), &s.0)?;
        Ok(())
    })
}

/// Least-squares decay rate of `ln(metric)` over `[t_a, t_b]`.
///
/// # Safety
/// `series` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pda_series_fit_decay(
    series: *const PdaSeries,
    metric: PdaMetric,
    t_a: f64,
    t_b: f64,
    out: *mut PdaDecayFit,
) -> PdaStatus {
    guard(|| {
        let s = as_ref(series, "series")?;
        let m = match metric {
            PdaMetric::L2 => Metric::L2,
            PdaMetric::Linf => Metric::Linf,
            PdaMetric::V0Star => Metric::V0Star,
        };
        let fit = fit_decay(&s.0, m, (t_a, t_b))?;
        *as_mut(out, "fit")? = PdaDecayFit { rate: fit.rate, r_squared: fit.r_squared, points: fit.points };
        Ok(())
    })
}

/// # Safety
/// `series` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pda_series_free(series: *mut PdaSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Dual norm of `e` through the permeability-weighted Green operator, on an
/// `nx` by `ny` grid of extent `lx` by `ly`.
///
/// # Safety
/// `e` and `perm` must each hold `nx * ny` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pda_v0star_norm(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    e: *const f64,
    perm: *const f64,
    out: *mut f64,
) -> PdaStatus {
    guard(|| {
        let e = field(nx, ny, lx, ly, e, "e")?;
        let k = field(nx, ny, lx, ly, perm, "perm")?;
        *as_mut(out, "out")? = v0star_norm(&e, &k, None)?.norm;
        Ok(())
    })
}
