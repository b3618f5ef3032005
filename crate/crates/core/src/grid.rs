//! Structured rectangular cell-centered meshes, the fine-to-coarse cell
//! relation, and subdomain masks over coarse cells.
//!
//! Cells are indexed row-major: `idx = j * nx + i`, with `i` running along
//! x and `j` along y. The origin corner `(0, 0)` is cell `0`.

use crate::error::{Error, Result};

/// Relative tolerance used when comparing extents and mask edges.
const GEOM_EPS: f64 = 1e-9;

/// Axis-aligned rectangular domain `[0, lx] x [0, ly]` split into
/// `nx * ny` equal cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Grid(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::Grid(format!("extents must be positive, got {lx}x{ly}")));
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// Measure of the whole domain.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn center(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.coords(idx);
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// Interior faces normal to x: `(nx - 1) * ny`.
    pub fn num_x_faces(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    /// Interior faces normal to y: `nx * (ny - 1)`.
    pub fn num_y_faces(&self) -> usize {
        self.nx * (self.ny - 1)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && close(self.lx, other.lx) && close(self.ly, other.ly)
    }

    pub(crate) fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}x{} [{}x{}] vs {}x{} [{}x{}]",
                self.nx, self.ny, self.lx, self.ly, other.nx, other.ny, other.lx, other.ly
            )))
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= GEOM_EPS * a.abs().max(b.abs())
}

/// Fine/coarse pair where every coarse cell is an `r x r` block of fine cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseMap {
    fine: Grid,
    coarse: Grid,
    ratio: usize,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl CoarseMap {
    pub fn new(fine: Grid, coarse: Grid) -> Result<Self> {
        if !close(fine.lx, coarse.lx) || !close(fine.ly, coarse.ly) {
            return Err(Error::Grid(format!(
                "fine and coarse extents differ: {}x{} vs {}x{}",
                fine.lx, fine.ly, coarse.lx, coarse.ly
            )));
        }
        if fine.nx % coarse.nx != 0 || fine.ny % coarse.ny != 0 {
            return Err(Error::Grid(format!(
                "coarse {}x{} does not divide fine {}x{}",
                coarse.nx, coarse.ny, fine.nx, fine.ny
            )));
        }
        let ratio = fine.nx / coarse.nx;
        if fine.ny / coarse.ny != ratio {
            return Err(Error::Grid(format!(
                "anisotropic refinement {}:{} is not supported",
                ratio,
                fine.ny / coarse.ny
            )));
        }

        let mut parent = Vec::with_capacity(fine.num_cells());
        let mut children = vec![Vec::with_capacity(ratio * ratio); coarse.num_cells()];
        for idx in 0..fine.num_cells() {
            let (i, j) = fine.coords(idx);
            let c = coarse.index(i / ratio, j / ratio);
            parent.push(c);
            children[c].push(idx);
        }
        Ok(CoarseMap { fine, coarse, ratio, parent, children })
    }

    pub fn fine(&self) -> &Grid {
        &self.fine
    }

    pub fn coarse(&self) -> &Grid {
        &self.coarse
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    /// Coarse cell enclosing fine cell `idx`.
    pub fn parent(&self, idx: usize) -> usize {
        self.parent[idx]
    }

    /// Fine cells owned by coarse cell `c`, in increasing index order.
    pub fn children(&self, c: usize) -> &[usize] {
        &self.children[c]
    }
}

/// Per-coarse-cell observed/unobserved flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    flags: Vec<bool>,
}

impl Mask {
    pub fn full(map: &CoarseMap) -> Self {
        Mask { flags: vec![true; map.coarse.num_cells()] }
    }

    pub fn from_flags(map: &CoarseMap, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != map.coarse.num_cells() {
            return Err(Error::InvalidArgument(format!(
                "mask has {} entries, coarse grid has {} cells",
                flags.len(),
                map.coarse.num_cells()
            )));
        }
        Ok(Mask { flags })
    }

    /// Flags every coarse cell whose closed rectangle lies inside
    /// `[x0, x1] x [y0, y1]` (boundary ties count as inside).
    pub fn rect(map: &CoarseMap, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let g = map.coarse;
        let ok = [x0, y0, x1, y1].iter().all(|v| v.is_finite())
            && x0 >= 0.0
            && y0 >= 0.0
            && x0 < x1
            && y0 < y1
            && x1 <= g.lx * (1.0 + GEOM_EPS)
            && y1 <= g.ly * (1.0 + GEOM_EPS);
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "degenerate or out-of-domain rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        let tol_x = GEOM_EPS * g.hx();
        let tol_y = GEOM_EPS * g.hy();
        let flags = (0..g.num_cells())
            .map(|c| {
                let (i, j) = g.coords(c);
                let (cx0, cx1) = (i as f64 * g.hx(), (i + 1) as f64 * g.hx());
                let (cy0, cy1) = (j as f64 * g.hy(), (j + 1) as f64 * g.hy());
                cx0 >= x0 - tol_x && cx1 <= x1 + tol_x && cy0 >= y0 - tol_y && cy1 <= y1 + tol_y
            })
            .collect();
        Ok(Mask { flags })
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_set(&self, c: usize) -> bool {
        self.flags[c]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_full(&self) -> bool {
        self.flags.iter().all(|&f| f)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_grid_examples() {
        let g = Grid::new(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(g.hx(), 1.0);
        assert_eq!(g.num_cells(), 1);

        let g = Grid::new(100, 100, 1.0, 1.0).unwrap();
        assert!((g.hx() - 0.01).abs() < 1e-15);
        assert_eq!(g.num_cells(), 10_000);

        let g = Grid::new(10, 10, 1.0, 1.0).unwrap();
        assert!((g.hx() - 0.1).abs() < 1e-15);
        assert_eq!(g.num_cells(), 100);
    }

    #[test]
    fn build_grid_rejects_nonpositive() {
        assert!(Grid::new(0, 1, 1.0, 1.0).is_err());
        assert!(Grid::new(1, 0, 1.0, 1.0).is_err());
        assert!(Grid::new(1, 1, 0.0, 1.0).is_err());
        assert!(Grid::new(1, 1, 1.0, -2.0).is_err());
        assert!(Grid::new(1, 1, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn index_is_bijective() {
        let g = Grid::new(7, 5, 2.0, 1.0).unwrap();
        for idx in 0..g.num_cells() {
            let (i, j) = g.coords(idx);
            assert_eq!(g.index(i, j), idx);
        }
        let (x, y) = g.center(g.index(3, 2));
        assert!((x - 3.5 * 2.0 / 7.0).abs() < 1e-15);
        assert!((y - 2.5 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn coarsen_block_structure() {
        let fine = Grid::unit_square(4).unwrap();
        let coarse = Grid::unit_square(2).unwrap();
        let map = CoarseMap::new(fine, coarse).unwrap();
        assert_eq!(map.ratio(), 2);
        assert_eq!(map.parent(fine.index(0, 0)), coarse.index(0, 0));
        assert_eq!(map.parent(fine.index(3, 3)), coarse.index(1, 1));
        assert_eq!(map.children(0), &[0, 1, 4, 5]);
    }

    #[test]
    fn coarsen_partition_counts() {
        let map = CoarseMap::new(Grid::unit_square(100).unwrap(), Grid::unit_square(10).unwrap()).unwrap();
        assert_eq!(map.ratio(), 10);
        let mut seen = vec![0usize; 10_000];
        for c in 0..100 {
            assert_eq!(map.children(c).len(), 100);
            for &f in map.children(c) {
                seen[f] += 1;
                assert_eq!(map.parent(f), c);
            }
        }
        assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn coarsen_rejects_incompatible() {
        let fine = Grid::unit_square(4).unwrap();
        assert!(CoarseMap::new(fine, Grid::unit_square(3).unwrap()).is_err());
        assert!(CoarseMap::new(fine, Grid::new(2, 2, 2.0, 1.0).unwrap()).is_err());
        assert!(CoarseMap::new(fine, Grid::new(2, 4, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn rect_mask_examples() {
        let map = CoarseMap::new(Grid::unit_square(100).unwrap(), Grid::unit_square(10).unwrap()).unwrap();
        assert!(Mask::rect(&map, 0.0, 0.0, 1.0, 1.0).unwrap().is_full());
        assert_eq!(Mask::rect(&map, 0.0, 0.0, 0.5, 0.5).unwrap().count(), 25);
        assert_eq!(Mask::rect(&map, 0.0, 0.0, 0.5, 1.0).unwrap().count(), 50);
        assert_eq!(Mask::rect(&map, 0.0, 0.0, 0.25, 0.25).unwrap().count(), 4);
    }

    #[test]
    fn rect_mask_rejects_degenerate() {
        let map = CoarseMap::new(Grid::unit_square(4).unwrap(), Grid::unit_square(2).unwrap()).unwrap();
        assert!(Mask::rect(&map, 0.5, 0.0, 0.5, 1.0).is_err());
        assert!(Mask::rect(&map, 0.0, 0.7, 1.0, 0.2).is_err());
        assert!(Mask::rect(&map, -0.1, 0.0, 1.0, 1.0).is_err());
        assert!(Mask::rect(&map, 0.0, 0.0, 1.5, 1.0).is_err());
    }
}
