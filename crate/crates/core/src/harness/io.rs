//! File formats.
//!
//! * Binary snapshot: `b"CDA1"`, little-endian `u32 nx, ny`, `f64 lx, ly, t`,
//!   then `nx * ny` `f64` values row-major.
//! * CSV grid snapshot: `ny` lines of `nx` comma-separated values, row `j`
//!   on line `j`.
//! * Legacy VTK `STRUCTURED_POINTS` with one point per cell center.
//! * Error series CSV: header `t,l2,linf,v0star`, `v0star` blank when not
//!   sampled.
//! * Permeability raster: `nx ny` on the first line, then positive values
//!   row-major, whitespace separated.
//! * Trajectory directory: `manifest.toml` plus one binary snapshot per
//!   stored step.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ErrorRecord, ErrorSeries};
use crate::error::{Error, Result};
use crate::field::CellField;
use crate::grid::Grid;

use super::run::{Snapshot, Trajectory};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CDA1";
pub const SERIES_HEADER: &str = "t,l2,linf,v0star";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 * 3;

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { location: location.into(), message: message.into() }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode_snapshot(field: &CellField, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * field.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    for v in [g.lx(), g.ly(), t] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(CellField, f64)> {
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(format!("offset {}", bytes.len()), "truncated snapshot header"));
    }
    if &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(parse_err("offset 0", "bad magic, expected CDA1"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (nx, ny) = (u32_at(4), u32_at(8));
    let (lx, ly, t) = (f64_at(12), f64_at(20), f64_at(28));
    let grid = Grid::new(nx, ny, lx, ly).map_err(|e| parse_err("offset 4", e.to_string()))?;
    let expected = HEADER_LEN + 8 * grid.num_cells();
    if bytes.len() != expected {
        return Err(parse_err(
            format!("offset {}", bytes.len().min(expected)),
            format!("snapshot length {} differs from expected {expected}", bytes.len()),
        ));
    }
    let values = (0..grid.num_cells()).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
    let field = CellField::new(grid, values).map_err(|e| parse_err(format!("offset {HEADER_LEN}"), e.to_string()))?;
    Ok((field, t))
}

pub fn write_snapshot(path: &Path, field: &CellField, t: f64) -> Result<()> {
    fs::write(path, encode_snapshot(field, t))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(CellField, f64)> {
    decode_snapshot(&fs::read(path)?).map_err(|e| match e {
        Error::Parse { location, message } => {
            Error::Parse { location: format!("{}: {location}", path.display()), message }
        }
        other => other,
    })
}

pub fn snapshot_csv(field: &CellField) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(field.len() * 24);
    for j in 0..g.ny() {
        let row = &field.values()[j * g.nx()..(j + 1) * g.nx()];
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses a CSV grid snapshot on the domain `[0, lx] x [0, ly]`.
pub fn parse_snapshot_csv(text: &str, lx: f64, ly: f64) -> Result<CellField> {
    let mut values = Vec::new();
    let mut nx = None;
    let mut ny = 0;
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("line {}", k + 1), e.to_string()))?;
        match nx {
            None => nx = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(parse_err(format!("line {}", k + 1), format!("expected {n} values, found {}", row.len())))
            }
            _ => {}
        }
        values.extend(row);
        ny += 1;
    }
    let nx = nx.ok_or_else(|| parse_err("line 1", "empty CSV snapshot"))?;
    let grid = Grid::new(nx, ny, lx, ly)?;
    CellField::new(grid, values)
}

/// Legacy VTK structured-points dataset with the field as point scalars at
/// cell centers.
pub fn snapshot_vtk(field: &CellField, name: &str, title: &str) -> String {
    let g = field.grid();
    let mut out = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "{title}").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET STRUCTURED_POINTS").unwrap();
    writeln!(out, "DIMENSIONS {} {} 1", g.nx(), g.ny()).unwrap();
    writeln!(out, "ORIGIN {} {} 0", num(0.5 * g.hx()), num(0.5 * g.hy())).unwrap();
    writeln!(out, "SPACING {} {} 1", num(g.hx()), num(g.hy())).unwrap();
    writeln!(out, "POINT_DATA {}", g.num_cells()).unwrap();
    writeln!(out, "SCALARS {name} double 1").unwrap();
    writeln!(out, "LOOKUP_TABLE default").unwrap();
    for row in field.values().chunks(g.nx()) {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

pub fn series_csv(series: &ErrorSeries) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for r in series.records() {
        let v0 = r.v0star.map(num).unwrap_or_default();
        writeln!(out, "{},{},{},{}", num(r.t), num(r.l2), num(r.linf), v0).unwrap();
    }
    out
}

pub fn write_series(path: &Path, series: &ErrorSeries) -> Result<()> {
    fs::write(path, series_csv(series))?;
    Ok(())
}

pub fn parse_series_csv(text: &str) -> Result<ErrorSeries> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SERIES_HEADER => {}
        other => {
            return Err(parse_err(
                "line 1",
                format!("expected header {SERIES_HEADER:?}, found {:?}", other.unwrap_or("")),
            ))
        }
    }
    let mut series = ErrorSeries::default();
    for (k, line) in lines.enumerate() {
        let loc = format!("line {}", k + 2);
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(parse_err(loc, format!("expected 4 columns, found {}", cols.len())));
        }
        let p = |s: &str| s.parse::<f64>().map_err(|e| parse_err(format!("line {}", k + 2), e.to_string()));
        let v0star = if cols[3].is_empty() { None } else { Some(p(cols[3])?) };
        series
            .push(ErrorRecord { t: p(cols[0])?, l2: p(cols[1])?, linf: p(cols[2])?, v0star })
            .map_err(|e| parse_err(loc, e.to_string()))?;
    }
    Ok(series)
}

pub fn parse_permeability_raster(text: &str, grid: &Grid) -> Result<CellField> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| parse_err("line 1", "empty raster"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(format!("line {}", hl + 1), e.to_string()))?;
    if dims.len() != 2 {
        return Err(parse_err(format!("line {}", hl + 1), "header must be `nx ny`"));
    }
    if dims[0] != grid.nx() || dims[1] != grid.ny() {
        return Err(parse_err(
            format!("line {}", hl + 1),
            format!("raster is {}x{}, grid is {}x{}", dims[0], dims[1], grid.nx(), grid.ny()),
        ));
    }
    let mut values = Vec::with_capacity(grid.num_cells());
    for (k, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e: std::num::ParseFloatError| parse_err(format!("line {}", k + 1), e.to_string()))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(parse_err(format!("line {}", k + 1), format!("permeability {v} is not positive")));
            }
            values.push(v);
        }
    }
    if values.len() != grid.num_cells() {
        return Err(parse_err("end of file", format!("expected {} values, found {}", grid.num_cells(), values.len())));
    }
    CellField::new(*grid, values)
}

pub fn read_permeability_raster(path: &Path, grid: &Grid) -> Result<CellField> {
    parse_permeability_raster(&fs::read_to_string(path)?, grid)
}

pub fn permeability_raster(field: &CellField) -> String {
    let g = field.grid();
    let mut out = format!("{} {}\n", g.nx(), g.ny());
    for row in field.values().chunks(g.nx()) {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config_hash: String,
    pub physics_hash: String,
    pub dt: f64,
    /// Step index of the first assimilation step in the reference clock.
    pub start_step: usize,
    pub steps: Vec<usize>,
    pub has_spin_pressure: bool,
}

pub const MANIFEST: &str = "manifest.toml";

fn snapshot_name(step: usize) -> String {
    format!("snap_{step:07}.cda")
}

/// Writes every stored snapshot of a trajectory, its pressures and a
/// manifest, optionally with VTK copies of selected steps.
pub fn write_trajectory_dir(dir: &Path, traj: &Trajectory, vtk_steps: &[usize]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in &traj.snapshots {
        write_snapshot(&dir.join(snapshot_name(s.step)), &s.saturation, s.t)?;
        if vtk_steps.contains(&s.step) {
            let text = snapshot_vtk(&s.saturation, "saturation", &format!("saturation t={}", s.t));
            fs::write(dir.join(format!("snap_{:07}.vtk", s.step)), text)?;
        }
    }
    let t_final = traj.snapshots.last().map_or(0.0, |s| s.t);
    write_snapshot(&dir.join("final_pressure.cda"), &traj.final_pressure, t_final)?;
    if let Some(p) = &traj.spin_pressure {
        write_snapshot(&dir.join("spin_pressure.cda"), p, 0.0)?;
    }
    let manifest = Manifest {
        config_hash: traj.config_hash.clone(),
        physics_hash: traj.physics_hash.clone(),
        dt: traj.dt,
        start_step: traj.start_step,
        steps: traj.snapshots.iter().map(|s| s.step).collect(),
        has_spin_pressure: traj.spin_pressure.is_some(),
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    let mut f = fs::File::create(dir.join(MANIFEST))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_trajectory_dir(dir: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| parse_err(MANIFEST, e.message().to_string()))?;
    let mut snapshots = Vec::with_capacity(manifest.steps.len());
    for &step in &manifest.steps {
        let (saturation, t) = read_snapshot(&dir.join(snapshot_name(step)))?;
        snapshots.push(Snapshot { step, t, saturation });
    }
    let (final_pressure, _) = read_snapshot(&dir.join("final_pressure.cda"))?;
    let spin_pressure =
        if manifest.has_spin_pressure { Some(read_snapshot(&dir.join("spin_pressure.cda"))?.0) } else { None };
    Trajectory::new(
        snapshots,
        final_pressure,
        spin_pressure,
        manifest.dt,
        manifest.start_step,
        manifest.config_hash,
        manifest.physics_hash,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snapshot_rejects_corruption() {
        let g = Grid::new(3, 2, 1.0, 0.5).unwrap();
        let f = CellField::from_fn(g, |x, y| x + y);
        let bytes = encode_snapshot(&f, 1.5);
        assert_eq!(bytes.len(), HEADER_LEN + 48);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshot(&bad), Err(Error::Parse { .. })));
        assert!(matches!(decode_snapshot(&bytes[..bytes.len() - 3]), Err(Error::Parse { .. })));
        assert!(matches!(decode_snapshot(&bytes[..10]), Err(Error::Parse { .. })));
    }

    #[test]
    fn series_header_is_exact() {
        let mut s = ErrorSeries::default();
        s.push(ErrorRecord { t: 0.0, l2: 0.5, linf: 1.0, v0star: Some(0.1) }).unwrap();
        s.push(ErrorRecord { t: 0.05, l2: 0.25, linf: 0.5, v0star: None }).unwrap();
        let text = series_csv(&s);
        assert!(text.starts_with("t,l2,linf,v0star\n"));
        let second = text.lines().nth(2).unwrap();
        assert!(second.ends_with(','));
        assert_eq!(parse_series_csv(&text).unwrap(), s);
        assert!(parse_series_csv("t,l2,linf\n").is_err());
        assert!(matches!(
            parse_series_csv("t,l2,linf,v0star\n0,1,x,\n"),
            Err(Error::Parse { location, .. }) if location == "line 2"
        ));
    }

    #[test]
    fn raster_parsing() {
        let g = Grid::new(3, 2, 1.0, 1.0).unwrap();
        let k = parse_permeability_raster("3 2\n1 2 3\n4 5 6\n", &g).unwrap();
        assert_eq!(k.get(g.index(0, 1)), 4.0);
        assert!(parse_permeability_raster("2 2\n1 2 3 4\n", &g).is_err());
        assert!(parse_permeability_raster("3 2\n1 2 3\n4 5\n", &g).is_err());
        assert!(parse_permeability_raster("3 2\n1 2 3\n4 -5 6\n", &g).is_err());
        let again = parse_permeability_raster(&permeability_raster(&k), &g).unwrap();
        assert_eq!(again, k);
    }

    #[test]
    fn csv_snapshot_shape_errors() {
        assert!(parse_snapshot_csv("1,2\n3\n", 1.0, 1.0).is_err());
        assert!(parse_snapshot_csv("", 1.0, 1.0).is_err());
        assert!(parse_snapshot_csv("1,a\n", 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn binary_snapshot_round_trip_is_bitwise(
            nx in 1usize..6, ny in 1usize..6, t in -1e6f64..1e6,
            seed in prop::collection::vec(-1e300f64..1e300, 36)
        ) {
            let g = Grid::new(nx, ny, 0.3, 7.0).unwrap();
            let f = CellField::new(g, seed[..nx * ny].to_vec()).unwrap();
            let (back, tb) = decode_snapshot(&encode_snapshot(&f, t)).unwrap();
            prop_assert_eq!(tb.to_bits(), t.to_bits());
            prop_assert_eq!(back.grid(), f.grid());
            for (a, b) in back.values().iter().zip(f.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn csv_snapshot_round_trip(
            nx in 1usize..5, ny in 1usize..5,
            seed in prop::collection::vec(-1e3f64..1e3, 16)
        ) {
            let g = Grid::new(nx, ny, 1.0, 2.0).unwrap();
            let f = CellField::new(g, seed[..nx * ny].to_vec()).unwrap();
            let back = parse_snapshot_csv(&snapshot_csv(&f), 1.0, 2.0).unwrap();
            for (a, b) in back.values().iter().zip(f.values()) {
                prop_assert!((a - b).abs() <= 1e-15 * b.abs());
            }
        }
    }
}
