//! Cell-centered scalar fields, interior face fluxes, and the discrete
//! norms/mean used throughout. All integrals use one-point (midpoint)
//! quadrature per cell.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// One finite value per cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at cell {pos}")));
        }
        Ok(CellField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        CellField { grid, values: vec![c; grid.num_cells()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.num_cells())
            .map(|idx| {
                let (x, y) = grid.center(idx);
                f(x, y)
            })
            .collect();
        CellField { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_cells());
        CellField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum(f_i * vol)`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> CellField {
        CellField { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self - other` on a shared grid.
    pub fn difference(&self, other: &CellField) -> Result<CellField> {
        self.grid.ensure_same(&other.grid, "difference")?;
        Ok(CellField { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() })
    }
}

pub fn l2_norm(f: &CellField) -> f64 {
    (f.values.iter().map(|v| v * v).sum::<f64>() * f.grid.cell_volume()).sqrt()
}

pub fn linf_norm(f: &CellField) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Discrete `L^p` norm; `p = f64::INFINITY` selects the max norm.
pub fn lp_norm(f: &CellField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("L^p exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(linf_norm(f));
    }
    if p == 2.0 {
        return Ok(l2_norm(f));
    }
    let sum: f64 = f.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * f.grid.cell_volume()).powf(1.0 / p))
}

/// Domain average.
pub fn mean(f: &CellField) -> f64 {
    f.integral() / f.grid.area()
}

/// `f - mean(f)`.
pub fn zero_mean(f: &CellField) -> CellField {
    let m = mean(f);
    CellField { grid: f.grid, values: f.values.iter().map(|v| v - m).collect() }
}

pub fn inner(f: &CellField, g: &CellField) -> Result<f64> {
    f.grid.ensure_same(&g.grid, "inner product")?;
    Ok(dot(&f.values, &g.values) * f.grid.cell_volume())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Signed volumetric flux through each interior face. Positive values flow
/// in `+x` (x-faces) or `+y` (y-faces). Boundary faces are closed and carry
/// no storage.
///
/// x-face `j * (nx - 1) + i` separates cells `(i, j)` and `(i + 1, j)`;
/// y-face `j * nx + i` separates cells `(i, j)` and `(i, j + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceFlux {
    pub fn zeros(grid: Grid) -> Self {
        FaceFlux { grid, x: vec![0.0; grid.num_x_faces()], y: vec![0.0; grid.num_y_faces()] }
    }

    pub fn new(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.num_x_faces() || y.len() != grid.num_y_faces() {
            return Err(Error::InvalidArgument(format!(
                "flux has {}+{} faces, grid has {}+{}",
                x.len(),
                y.len(),
                grid.num_x_faces(),
                grid.num_y_faces()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite face flux".into()));
        }
        Ok(FaceFlux { grid, x, y })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn len(&self) -> usize {
        self.x.len() + self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scaled(&self, c: f64) -> FaceFlux {
        FaceFlux {
            grid: self.grid,
            x: self.x.iter().map(|v| c * v).collect(),
            y: self.y.iter().map(|v| c * v).collect(),
        }
    }

    /// Visits every interior face as `(left_or_lower, right_or_upper, flux)`.
    pub fn for_each_face(&self, mut visit: impl FnMut(usize, usize, f64)) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        for j in 0..ny {
            for i in 0..nx - 1 {
                let c = j * nx + i;
                visit(c, c + 1, self.x[j * (nx - 1) + i]);
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let c = j * nx + i;
                visit(c, c + nx, self.y[c]);
            }
        }
    }

    /// Net outflow per cell: outgoing minus incoming flux.
    pub fn net_outflow(&self) -> Vec<f64> {
        let mut div = vec![0.0; self.grid.num_cells()];
        self.for_each_face(|a, b, f| {
            div[a] += f;
            div[b] -= f;
        });
        div
    }

    /// Sum of fluxes leaving each cell through its faces.
    pub fn total_outflow(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.num_cells()];
        self.for_each_face(|a, b, f| {
            if f > 0.0 {
                out[a] += f;
            } else {
                out[b] -= f;
            }
        });
        out
    }
}
