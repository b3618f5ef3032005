//! Independent oracles shared by the integration tests and the acceptance
//! gate.
#![allow(dead_code)]

use porous_da::diagnostics::v0star_norm;
use porous_da::field::{l2_norm, zero_mean};
use porous_da::pressure::SolverSettings;
use porous_da::transport::Nudge;
use porous_da::{
    CellField, CoarseMap, FaceFlux, FluidModel, FluidParams, Grid, NudgingMode, Observer, PressureSystem, Transport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: Grid, rng: &mut impl Rng, lo: f64, hi: f64) -> CellField {
    let v = (0..grid.num_cells()).map(|_| rng.gen_range(lo..hi)).collect();
    CellField::new(grid, v).unwrap()
}

/// Divergence-free fluxes from a stream function on the grid nodes, zero on
/// the boundary so that the closed-boundary condition holds exactly.
pub fn stream_flux(grid: Grid, rng: &mut impl Rng, amplitude: f64) -> FaceFlux {
    let (nx, ny) = (grid.nx(), grid.ny());
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut psi = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 1..ny {
        for i in 1..nx {
            psi[node(i, j)] = rng.gen_range(-amplitude..amplitude);
        }
    }
    flux_from_stream(grid, &psi)
}

/// Fluxes of a smooth cellular flow `psi = a sin(pi x) sin(pi y)`.
pub fn cellular_flux(grid: Grid, amplitude: f64) -> FaceFlux {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut psi = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (i as f64 * grid.hx(), j as f64 * grid.hy());
            psi[j * (nx + 1) + i] = amplitude * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
        }
    }
    // exact zeros on the boundary
    for j in 0..=ny {
        psi[j * (nx + 1)] = 0.0;
        psi[j * (nx + 1) + nx] = 0.0;
    }
    for i in 0..=nx {
        psi[i] = 0.0;
        psi[ny * (nx + 1) + i] = 0.0;
    }
    flux_from_stream(grid, &psi)
}

fn flux_from_stream(grid: Grid, psi: &[f64]) -> FaceFlux {
    let (nx, ny) = (grid.nx(), grid.ny());
    let node = |i: usize, j: usize| psi[j * (nx + 1) + i];
    let mut x = Vec::with_capacity(grid.num_x_faces());
    for j in 0..ny {
        for i in 0..nx - 1 {
            x.push(node(i + 1, j + 1) - node(i + 1, j));
        }
    }
    let mut y = Vec::with_capacity(grid.num_y_faces());
    for j in 0..ny - 1 {
        for i in 0..nx {
            y.push(-(node(i + 1, j + 1) - node(i, j + 1)));
        }
    }
    FaceFlux::new(grid, x, y).unwrap()
}

/// Single cell, no flow, relaxed from 1 toward the observation 0.5 with the
/// given nudging mode. Returns the largest deviation from
/// `0.5 + 0.5 exp(-mu t)` over `[0, t_end]`.
pub fn nudging_oracle_error(dt: f64, mu: f64, t_end: f64, mode: NudgingMode) -> f64 {
    let g = Grid::unit_square(1).unwrap();
    let observer = Observer::full(CoarseMap::new(g, g).unwrap());
    let obs = observer.project(&CellField::constant(g, 0.5)).unwrap();
    let fluid = FluidModel::new(FluidParams::default()).unwrap();
    let transport = Transport::new(&fluid);
    let nudge = Nudge { observer: &observer, observation: &obs, mu, mode };
    let flux = FaceFlux::zeros(g);
    let steps = (t_end / dt).round() as usize;
    let mut s = CellField::constant(g, 1.0);
    let mut worst: f64 = 0.0;
    for n in 1..=steps {
        s = transport.nudged_step(&s, &flux, dt, &nudge).unwrap().0;
        let exact = 0.5 + 0.5 * (-mu * n as f64 * dt).exp();
        worst = worst.max((s.get(0) - exact).abs());
    }
    worst
}

/// Advances `s0` to `t_end` with `steps` equal transport steps on a fixed
/// flux field.
pub fn transport_to(fluid: &FluidModel, s0: &CellField, flux: &FaceFlux, t_end: f64, steps: usize) -> CellField {
    let transport = Transport::new(fluid);
    let dt = t_end / steps as f64;
    let mut s = s0.clone();
    for _ in 0..steps {
        s = transport.step(&s, flux, dt).unwrap().0;
    }
    s
}

/// Step-halving ratio `|S_dt - S_dt/2| / |S_dt/2 - S_dt/4|` for smooth
/// transport by a cellular flow at fixed space resolution.
pub fn transport_richardson_ratio() -> f64 {
    let g = Grid::unit_square(32).unwrap();
    let fluid = FluidModel::new(FluidParams::default()).unwrap();
    let flux = cellular_flux(g, 0.05);
    let s0 = CellField::from_fn(g, |x, y| {
        0.5 + 0.3 * (2.0 * std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).sin()
    });
    let t_end = 0.5;
    let dt_max = Transport::new(&fluid).stable_dt(&flux, 1.0).unwrap();
    let base = ((t_end / dt_max).ceil() as usize).max(1);
    let coarse = transport_to(&fluid, &s0, &flux, t_end, base);
    let mid = transport_to(&fluid, &s0, &flux, t_end, 2 * base);
    let fine = transport_to(&fluid, &s0, &flux, t_end, 4 * base);
    l2_norm(&coarse.difference(&mid).unwrap()) / l2_norm(&mid.difference(&fine).unwrap())
}

/// L2 error of the unit-conductivity solve against `cos(pi x) cos(pi y)` on
/// an `n x n` grid.
pub fn manufactured_pressure_error(n: usize) -> f64 {
    use std::f64::consts::PI;
    let g = Grid::unit_square(n).unwrap();
    let sys = PressureSystem::from_conductivity(g, &vec![1.0; g.num_cells()], SolverSettings::default()).unwrap();
    let exact = CellField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos());
    let q = exact.scaled(2.0 * PI * PI);
    let p = sys.solve(&zero_mean(&q)).unwrap();
    l2_norm(&p.difference(&zero_mean(&exact)).unwrap())
}

/// `||e||_{V0*} / ||e||` for `cos(pi x)` on `n` cells of a unit strip.
pub fn cosine_ratio(n: usize) -> f64 {
    let g = Grid::new(n, 1, 1.0, 1.0).unwrap();
    let e = CellField::from_fn(g, |x, _| (std::f64::consts::PI * x).cos());
    v0star_norm(&e, &CellField::constant(g, 1.0), None).unwrap().norm / l2_norm(&e)
}
