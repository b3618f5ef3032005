use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::CellField;
use crate::grid::Grid;

use super::config::PermeabilitySpec;
use super::io;

pub fn build(spec: &PermeabilitySpec, grid: &Grid) -> Result<CellField> {
    let field = match spec {
        PermeabilitySpec::Homogeneous { value } => CellField::constant(*grid, *value),
        PermeabilitySpec::Layered { values } => layered(grid, values)?,
        PermeabilitySpec::Lognormal { seed, mean, sigma, correlation_cells } => {
            lognormal(grid, *seed, *mean, *sigma, *correlation_cells)?
        }
        PermeabilitySpec::File { path } => io::read_permeability_raster(path, grid)?,
    };
    if let Some(pos) = field.values().iter().position(|k| !(k.is_finite() && *k > 0.0)) {
        return Err(Error::Config(format!("permeability must be positive, got {} at cell {pos}", field.get(pos))));
    }
    Ok(field)
}

fn layered(grid: &Grid, values: &[f64]) -> Result<CellField> {
    if values.is_empty() {
        return Err(Error::Config("layered permeability needs at least one value".into()));
    }
    let n = values.len();
    let ny = grid.ny();
    let v = (0..grid.num_cells())
        .map(|idx| {
            let (_, j) = grid.coords(idx);
            values[(j * n / ny).min(n - 1)]
        })
        .collect();
    CellField::new(*grid, v)
}

/// Log-normal field: white Gaussian noise smoothed by three passes of a box
/// filter of half-width `correlation_cells` (reflecting at the boundary),
/// rescaled to unit variance.
fn lognormal(grid: &Grid, seed: u64, mean: f64, sigma: f64, correlation_cells: usize) -> Result<CellField> {
    if !(mean > 0.0 && mean.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!(
            "lognormal permeability needs mean > 0 and sigma >= 0, got {mean}, {sigma}"
        )));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<f64> = (0..nx * ny).map(|_| StandardNormal.sample(&mut rng)).collect();
    if correlation_cells > 0 {
        for _ in 0..3 {
            z = box_blur(&z, nx, ny, correlation_cells);
        }
    }
    let n = z.len() as f64;
    let m = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let ln_mean = mean.ln();
    let values = z.iter().map(|v| (ln_mean + sigma * (v - m) / sd).exp()).collect();
    CellField::new(*grid, values)
}

fn reflect(k: isize, n: usize) -> usize {
    let n = n as isize;
    let mut k = k;
    loop {
        if k < 0 {
            k = -k - 1;
        } else if k >= n {
            k = 2 * n - k - 1;
        } else {
            return k as usize;
        }
    }
}

fn box_blur(src: &[f64], nx: usize, ny: usize, r: usize) -> Vec<f64> {
    let r = r as isize;
    let width = (2 * r + 1) as f64;
    let mut tmp = vec![0.0; src.len()];
    for j in 0..ny {
        for i in 0..nx {
            let s: f64 = (-r..=r).map(|d| src[j * nx + reflect(i as isize + d, nx)]).sum();
            tmp[j * nx + i] = s / width;
        }
    }
    let mut out = vec![0.0; src.len()];
    for j in 0..ny {
        for i in 0..nx {
            let s: f64 = (-r..=r).map(|d| tmp[reflect(j as isize + d, ny) * nx + i]).sum();
            out[j * nx + i] = s / width;
        }
    }
    out
}
