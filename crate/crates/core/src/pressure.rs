//! Zero-mean Neumann pressure problem `-div(lambda_t(S) K grad P) = q_t`
//! discretized with two-point flux approximation (TPFA) on the structured
//! grid, solved by conjugate gradients with a modified incomplete Cholesky
//! preconditioner on the zero-mean subspace, plus conservative face-flux
//! reconstruction.
//!
//! The assembled operator is `(A u)_i = sum_f T_f (u_i - u_j)` and the
//! discrete system is `A P = q_t * vol`. Flux from cell `i` to `j` across
//! face `f` is `T_f (P_i - P_j)`.

use crate::error::{Error, Result};
use crate::field::{dot, l2_norm, CellField, FaceFlux};
use crate::grid::Grid;
use crate::model::FluidModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop when `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Source imbalance tolerance, relative to `||q|| * |Omega|`.
    pub balance_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { rel_tol: 1e-10, max_iter: 50_000, balance_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// TPFA operator with per-face transmissibilities.
#[derive(Debug, Clone)]
pub struct PressureSystem {
    grid: Grid,
    tx: Vec<f64>,
    ty: Vec<f64>,
    diag: Vec<f64>,
    settings: SolverSettings,
}

/// Relaxation of the modified incomplete Cholesky preconditioner. Full
/// modification (1.0) makes the last pivot vanish for the singular Neumann
/// operator.
const MIC_OMEGA: f64 = 0.95;

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl PressureSystem {
    /// Assembles with cell conductivity `K_i * lambda_t(S_i)`.
    pub fn assemble(perm: &CellField, s: &CellField, fluid: &FluidModel) -> Result<Self> {
        perm.grid().ensure_same(s.grid(), "pressure assembly")?;
        let cond: Vec<f64> =
            perm.values().iter().zip(s.values()).map(|(&k, &sat)| k * fluid.total_mobility(sat)).collect();
        Self::from_conductivity(*perm.grid(), &cond, SolverSettings::default())
    }

    /// Assembles directly from a positive cellwise conductivity.
    pub fn from_conductivity(grid: Grid, cond: &[f64], settings: SolverSettings) -> Result<Self> {
        if cond.len() != grid.num_cells() {
            return Err(Error::Assembly(format!("{} conductivities for {} cells", cond.len(), grid.num_cells())));
        }
        if let Some(pos) = cond.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Assembly(format!("non-positive conductivity {} at cell {pos}", cond[pos])));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let gx = grid.hy() / grid.hx();
        let gy = grid.hx() / grid.hy();
        let mut tx = Vec::with_capacity(grid.num_x_faces());
        for j in 0..ny {
            for i in 0..nx - 1 {
                let c = j * nx + i;
                tx.push(gx * harmonic(cond[c], cond[c + 1]));
            }
        }
        let mut ty = Vec::with_capacity(grid.num_y_faces());
        for j in 0..ny - 1 {
            for i in 0..nx {
                let c = j * nx + i;
                ty.push(gy * harmonic(cond[c], cond[c + nx]));
            }
        }
        let mut diag = vec![0.0; grid.num_cells()];
        for j in 0..ny {
            for i in 0..nx - 1 {
                let t = tx[j * (nx - 1) + i];
                diag[j * nx + i] += t;
                diag[j * nx + i + 1] += t;
            }
        }
        for (c, &t) in ty.iter().enumerate() {
            diag[c] += t;
            diag[c + nx] += t;
        }
        Ok(PressureSystem { grid, tx, ty, diag, settings })
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn x_transmissibilities(&self) -> &[f64] {
        &self.tx
    }

    pub fn y_transmissibilities(&self) -> &[f64] {
        &self.ty
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `out = A u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        for (o, (&d, &v)) in out.iter_mut().zip(self.diag.iter().zip(u)) {
            *o = d * v;
        }
        for j in 0..ny {
            let row = j * nx;
            let trow = j * (nx - 1);
            for i in 0..nx - 1 {
                let t = self.tx[trow + i];
                let (a, b) = (row + i, row + i + 1);
                out[a] -= t * u[b];
                out[b] -= t * u[a];
            }
        }
        for (a, &t) in self.ty.iter().enumerate() {
            let b = a + nx;
            out[a] -= t * u[b];
            out[b] -= t * u[a];
        }
    }

    pub fn apply_field(&self, u: &CellField) -> Result<CellField> {
        self.grid.ensure_same(u.grid(), "operator application")?;
        let mut out = vec![0.0; self.grid.num_cells()];
        self.apply(u.values(), &mut out);
        Ok(CellField::from_vec_unchecked(self.grid, out))
    }

    /// Zero-mean solution of `A P = q_t * vol`.
    pub fn solve(&self, q_t: &CellField) -> Result<CellField> {
        self.solve_with_guess(q_t, None).map(|(p, _)| p)
    }

    /// As [`solve`](Self::solve), starting from `guess` when given.
    pub fn solve_with_guess(&self, q_t: &CellField, guess: Option<&CellField>) -> Result<(CellField, SolveStats)> {
        self.grid.ensure_same(q_t.grid(), "pressure right-hand side")?;
        let vol = self.grid.cell_volume();
        let imbalance = q_t.integral();
        let tolerance = self.settings.balance_tol * l2_norm(q_t) * self.grid.area();
        if imbalance.abs() > tolerance {
            return Err(Error::Solvability { imbalance, tolerance });
        }
        let mut b: Vec<f64> = q_t.values().iter().map(|q| q * vol).collect();
        project_zero_sum(&mut b);
        let mut x = match guess {
            Some(g) => {
                self.grid.ensure_same(g.grid(), "pressure guess")?;
                g.values().to_vec()
            }
            None => vec![0.0; b.len()],
        };
        project_zero_sum(&mut x);
        let stats = self.pcg(&b, &mut x)?;
        Ok((CellField::from_vec_unchecked(self.grid, x), stats))
    }

    fn pcg(&self, b: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        let n = b.len();
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
        }
        let target = self.settings.rel_tol * b_norm;

        let mut r = vec![0.0; n];
        let mut ap = vec![0.0; n];
        self.apply(x, &mut ap);
        for k in 0..n {
            r[k] = b[k] - ap[k];
        }
        project_zero_sum(&mut r);
        let mut res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok(SolveStats { iterations: 0, relative_residual: res / b_norm });
        }
        let pivots = self.mic_pivots();
        let mut z = self.precondition(pivots.as_deref(), &r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);

        for it in 1..=self.settings.max_iter {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Solver { iterations: it, residual: res / b_norm });
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            project_zero_sum(x);
            project_zero_sum(&mut r);
            res = dot(&r, &r).sqrt();
            if res <= target {
                // Confirm against the true residual before accepting.
                self.apply(x, &mut ap);
                let mut true_r: Vec<f64> = b.iter().zip(&ap).map(|(bb, a)| bb - a).collect();
                project_zero_sum(&mut true_r);
                let true_res = dot(&true_r, &true_r).sqrt();
                if true_res <= target {
                    return Ok(SolveStats { iterations: it, relative_residual: true_res / b_norm });
                }
                r = true_r;
                res = true_res;
            }
            z = self.precondition(pivots.as_deref(), &r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::Solver { iterations: self.settings.max_iter, residual: res / b_norm })
    }

    /// Pivots of the modified incomplete Cholesky factorization
    /// `M = (D + L) D^-1 (D + L^T)` with `L` the strict lower triangle of the
    /// operator in row-major order. `None` when a pivot is not positive.
    fn mic_pivots(&self) -> Option<Vec<f64>> {
        let nx = self.grid.nx();
        let n = self.diag.len();
        let mut d = vec![0.0; n];
        for c in 0..n {
            let (i, j) = (c % nx, c / nx);
            let mut v = self.diag[c];
            if i > 0 {
                let t = self.tx[j * (nx - 1) + i - 1];
                let up = if c - 1 + nx < n { self.ty[c - 1] } else { 0.0 };
                v -= t * (t + MIC_OMEGA * up) / d[c - 1];
            }
            if j > 0 {
                let t = self.ty[c - nx];
                let right = if i + 1 < nx { self.tx[(j - 1) * (nx - 1) + i] } else { 0.0 };
                v -= t * (t + MIC_OMEGA * right) / d[c - nx];
            }
            if !(v > 0.0) {
                return None;
            }
            d[c] = v;
        }
        Some(d)
    }

    /// Applies `M^-1`, or Jacobi scaling without pivots, then projects back
    /// onto zero-sum vectors.
    fn precondition(&self, pivots: Option<&[f64]>, r: &[f64]) -> Vec<f64> {
        let Some(d) = pivots else {
            let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(v, d)| v / d).collect();
            project_zero_sum(&mut z);
            return z;
        };
        let nx = self.grid.nx();
        let n = r.len();
        let mut z = vec![0.0; n];
        for c in 0..n {
            let (i, j) = (c % nx, c / nx);
            let mut v = r[c];
            if i > 0 {
                v += self.tx[j * (nx - 1) + i - 1] * z[c - 1];
            }
            if j > 0 {
                v += self.ty[c - nx] * z[c - nx];
            }
            z[c] = v / d[c];
        }
        for c in (0..n).rev() {
            let (i, j) = (c % nx, c / nx);
            let mut v = 0.0;
            if i + 1 < nx {
                v += self.tx[j * (nx - 1) + i] * z[c + 1];
            }
            if c + nx < n {
                v += self.ty[c] * z[c + nx];
            }
            z[c] += v / d[c];
        }
        project_zero_sum(&mut z);
        z
    }

    /// Total-velocity fluxes from a pressure field.
    pub fn face_fluxes(&self, p: &CellField) -> Result<FaceFlux> {
        self.grid.ensure_same(p.grid(), "face fluxes")?;
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let pv = p.values();
        let mut fx = Vec::with_capacity(self.tx.len());
        for j in 0..ny {
            for i in 0..nx - 1 {
                let c = j * nx + i;
                fx.push(self.tx[j * (nx - 1) + i] * (pv[c] - pv[c + 1]));
            }
        }
        let fy = self.ty.iter().enumerate().map(|(c, t)| t * (pv[c] - pv[c + nx])).collect();
        FaceFlux::new(self.grid, fx, fy)
    }
}

fn project_zero_sum(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}
