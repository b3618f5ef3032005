//! Rock and fluid constitutive laws: power-law relative permeabilities,
//! phase mobilities, the water fractional flow, the capillary function
//! `theta(S) = int_0^S b`, and corner-well source terms.
//!
//! Saturation always means water saturation. Inputs outside `[0, 1]` are
//! clamped before evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CellField;
use crate::grid::Grid;

const SAMPLES: usize = 10_001;

#[inline]
fn clamp01(s: f64) -> f64 {
    s.clamp(0.0, 1.0)
}

/// Viscosities, porosity and power-law relative permeability parameters:
/// `k_rw = c_w * S^(1 + xi_w)`, `k_ro = c_o * (1 - S)^(1 + xi_o)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidParams {
    pub mu_w: f64,
    pub mu_o: f64,
    pub phi: f64,
    pub xi_w: f64,
    pub xi_o: f64,
    pub c_w: f64,
    pub c_o: f64,
}

impl Default for FluidParams {
    /// Quadratic relative permeabilities, unit viscosities and porosity.
    fn default() -> Self {
        FluidParams { mu_w: 1.0, mu_o: 1.0, phi: 1.0, xi_w: 1.0, xi_o: 1.0, c_w: 1.0, c_o: 1.0 }
    }
}

impl FluidParams {
    /// Linear relative permeabilities with equal viscosities, so `f_w(S) = S`.
    pub fn linear() -> Self {
        FluidParams { xi_w: 0.0, xi_o: 0.0, ..Self::default() }
    }
}

/// Validated fluid model with cached mobility bounds and flux-slope bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidModel {
    params: FluidParams,
    kappa_min: f64,
    kappa_max: f64,
    max_slope: f64,
}

/// Phase and total mobilities at one saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobilities {
    pub water: f64,
    pub oil: f64,
    pub total: f64,
}

impl FluidModel {
    pub fn new(params: FluidParams) -> Result<Self> {
        let p = params;
        let positive = [p.mu_w, p.mu_o, p.phi, p.c_w, p.c_o];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "viscosities, porosity and rel-perm amplitudes must be positive: {p:?}"
            )));
        }
        if !(p.xi_w.is_finite() && p.xi_o.is_finite() && p.xi_w >= 0.0 && p.xi_o >= 0.0) {
            return Err(Error::InvalidArgument(format!("rel-perm exponents must be non-negative: {p:?}")));
        }
        let mut model = FluidModel { params, kappa_min: 0.0, kappa_max: 0.0, max_slope: 0.0 };
        let total = |s: f64| model.mobilities(s).total;
        let kappa_min = -maximize(|s| -total(s));
        let kappa_max = maximize(total);
        if !(kappa_min > 0.0 && kappa_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "total mobility is not bounded away from zero (min {kappa_min})"
            )));
        }
        let max_slope = maximize(|s| model.fractional_flow_slope(s).abs());
        model.kappa_min = kappa_min;
        model.kappa_max = kappa_max;
        model.max_slope = max_slope;
        Ok(model)
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn porosity(&self) -> f64 {
        self.params.phi
    }

    pub fn mobilities(&self, s: f64) -> Mobilities {
        let p = &self.params;
        let s = clamp01(s);
        let water = p.c_w * s.powf(1.0 + p.xi_w) / (p.phi * p.mu_w);
        let oil = p.c_o * (1.0 - s).powf(1.0 + p.xi_o) / (p.phi * p.mu_o);
        Mobilities { water, oil, total: water + oil }
    }

    pub fn total_mobility(&self, s: f64) -> f64 {
        self.mobilities(s).total
    }

    pub fn fractional_flow(&self, s: f64) -> f64 {
        let m = self.mobilities(s);
        m.water / m.total
    }

    /// Analytic `d f_w / dS`.
    pub fn fractional_flow_slope(&self, s: f64) -> f64 {
        let p = &self.params;
        let s = clamp01(s);
        let m = self.mobilities(s);
        let dw = (1.0 + p.xi_w) * p.c_w * s.powf(p.xi_w) / (p.phi * p.mu_w);
        let d_o = -(1.0 + p.xi_o) * p.c_o * (1.0 - s).powf(p.xi_o) / (p.phi * p.mu_o);
        (dw * m.oil - m.water * d_o) / (m.total * m.total)
    }

    /// `max |f_w'(S)|` over `[0, 1]`.
    pub fn max_fw_slope(&self) -> f64 {
        self.max_slope
    }

    /// Lower bound of the total mobility on `[0, 1]`.
    pub fn kappa_min(&self) -> f64 {
        self.kappa_min
    }

    /// Upper bound of the total mobility on `[0, 1]`.
    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }
}

/// Dense sampling on `[0, 1]` followed by golden-section refinement around
/// the best sample.
fn maximize(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / (SAMPLES - 1) as f64;
    let (mut best_k, mut best) = (0, f(0.0));
    for k in 1..SAMPLES {
        let v = f(k as f64 * h);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let mut a = (best_k as f64 - 1.0).max(0.0) * h;
    let mut b = (best_k as f64 + 1.0).min((SAMPLES - 1) as f64) * h;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    best.max(fc).max(fd)
}

/// Capillary integrand `b(S) = amplitude * S^tau_w * (1 - S)^tau_o`.
/// An amplitude of zero disables capillarity (`theta = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapillaryParams {
    pub amplitude: f64,
    pub tau_w: f64,
    pub tau_o: f64,
    /// Number of table intervals used to tabulate `theta`.
    pub resolution: usize,
}

impl Default for CapillaryParams {
    fn default() -> Self {
        CapillaryParams { amplitude: 0.0, tau_w: 1.0, tau_o: 1.0, resolution: 4096 }
    }
}

/// Tabulated capillary function: uniform nodes, composite midpoint
/// quadrature between nodes and linear interpolation inside an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Capillarity {
    params: CapillaryParams,
    table: Vec<f64>,
    sup_b: f64,
}

impl Capillarity {
    pub fn new(params: CapillaryParams) -> Result<Self> {
        let p = params;
        if !(p.amplitude.is_finite() && p.amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!("capillary amplitude {} < 0", p.amplitude)));
        }
        if !(p.tau_w >= 0.0 && p.tau_o >= 0.0 && p.tau_w.is_finite() && p.tau_o.is_finite()) {
            return Err(Error::InvalidArgument("capillary exponents must be non-negative".into()));
        }
        if p.resolution < 2 {
            return Err(Error::InvalidArgument("capillary table needs at least 2 intervals".into()));
        }
        let mut cap = Capillarity { params, table: Vec::new(), sup_b: 0.0 };
        if cap.is_enabled() {
            let n = p.resolution;
            let h = 1.0 / n as f64;
            let mut table = Vec::with_capacity(n + 1);
            let mut acc = 0.0;
            table.push(0.0);
            for k in 0..n {
                acc += h * cap.b((k as f64 + 0.5) * h);
                table.push(acc);
            }
            cap.table = table;
            cap.sup_b = maximize(|s| cap.b(s));
        }
        Ok(cap)
    }

    pub fn disabled() -> Self {
        Capillarity { params: CapillaryParams::default(), table: Vec::new(), sup_b: 0.0 }
    }

    pub fn is_enabled(&self) -> bool {
        self.params.amplitude > 0.0
    }

    pub fn params(&self) -> &CapillaryParams {
        &self.params
    }

    /// The integrand `b(S)`.
    pub fn b(&self, s: f64) -> f64 {
        let p = &self.params;
        let s = clamp01(s);
        p.amplitude * s.powf(p.tau_w) * (1.0 - s).powf(p.tau_o)
    }

    /// `sup b` over `[0, 1]`, the Lipschitz constant of `theta`.
    pub fn sup_b(&self) -> f64 {
        self.sup_b
    }

    /// Degeneracy exponent `max(tau_w, tau_o)`.
    pub fn tau(&self) -> f64 {
        self.params.tau_w.max(self.params.tau_o)
    }

    pub fn theta(&self, s: f64) -> f64 {
        if !self.is_enabled() {
            return 0.0;
        }
        let n = self.table.len() - 1;
        let x = clamp01(s) * n as f64;
        let k = (x.floor() as usize).min(n - 1);
        let w = x - k as f64;
        self.table[k] * (1.0 - w) + self.table[k + 1] * w
    }
}

/// One injector and one producer with equal rate magnitude `rate`
/// (volume per time per unit bulk volume of the well cell).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellConfig {
    injector: usize,
    producer: usize,
    rate: f64,
}

impl WellConfig {
    pub fn new(grid: &Grid, injector: usize, producer: usize, rate: f64) -> Result<Self> {
        let n = grid.num_cells();
        if injector >= n || producer >= n {
            return Err(Error::InvalidArgument(format!(
                "well cell out of range: injector {injector}, producer {producer}, {n} cells"
            )));
        }
        if injector == producer {
            return Err(Error::InvalidArgument("injector and producer share a cell".into()));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!("well rate must be positive, got {rate}")));
        }
        Ok(WellConfig { injector, producer, rate })
    }

    /// Injector in the origin-corner cell, producer in the opposite corner,
    /// each with rate `coefficient / h^2` where `h` is the fine cell side
    /// measured in units where the domain is `length_scale` times larger.
    pub fn corners(grid: &Grid, coefficient: f64, length_scale: f64) -> Result<Self> {
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::InvalidArgument(format!("length scale must be positive, got {length_scale}")));
        }
        let h2 = grid.cell_volume() * length_scale * length_scale;
        Self::new(grid, 0, grid.num_cells() - 1, coefficient / h2)
    }

    pub fn injector(&self) -> usize {
        self.injector
    }

    pub fn producer(&self) -> usize {
        self.producer
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Total and water source densities for the current saturation. The
    /// producer removes water at `S(producer) * rate`.
    pub fn sources(&self, s: &CellField) -> Result<(CellField, CellField)> {
        let grid = *s.grid();
        if self.injector >= grid.num_cells() || self.producer >= grid.num_cells() {
            return Err(Error::InvalidArgument("well cell out of range for field".into()));
        }
        let mut qt = vec![0.0; grid.num_cells()];
        let mut qw = vec![0.0; grid.num_cells()];
        qt[self.injector] = self.rate;
        qt[self.producer] = -self.rate;
        qw[self.injector] = self.rate;
        qw[self.producer] = -clamp01(s.get(self.producer)) * self.rate;
        Ok((CellField::from_vec_unchecked(grid, qt), CellField::from_vec_unchecked(grid, qw)))
    }
}
