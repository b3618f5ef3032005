//! Coarse-grid interpolant observable: the volume-average projection onto
//! piecewise constants over coarse cells, restricted to a mask of observed
//! coarse cells.
//!
//! `prolong(project(u))` is the masked L2 projection. It is self-adjoint,
//! idempotent and non-expansive.

use crate::error::{Error, Result};
use crate::field::{l2_norm, CellField};
use crate::grid::{CoarseMap, Mask};

/// Coarse observation vector. `None` marks an unobserved coarse cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    values: Vec<Option<f64>>,
}

impl Observation {
    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, c: usize) -> Option<f64> {
        self.values[c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observer {
    map: CoarseMap,
    mask: Mask,
}

impl Observer {
    pub fn new(map: CoarseMap, mask: Mask) -> Result<Self> {
        if mask.len() != map.coarse().num_cells() {
            return Err(Error::InvalidArgument(format!(
                "mask has {} entries for {} coarse cells",
                mask.len(),
                map.coarse().num_cells()
            )));
        }
        Ok(Observer { map, mask })
    }

    pub fn full(map: CoarseMap) -> Self {
        let mask = Mask::full(&map);
        Observer { map, mask }
    }

    pub fn map(&self) -> &CoarseMap {
        &self.map
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Coarse cell side (the observation resolution `H`), taken along x.
    pub fn resolution(&self) -> f64 {
        self.map.coarse().hx()
    }

    /// Whether fine cell `idx` lies in an observed coarse cell.
    pub fn observes(&self, idx: usize) -> bool {
        self.mask.is_set(self.map.parent(idx))
    }

    /// Mean of the owned fine values on each observed coarse cell.
    pub fn project(&self, u: &CellField) -> Result<Observation> {
        self.map.fine().ensure_same(u.grid(), "observation")?;
        let v = u.values();
        let values = (0..self.map.coarse().num_cells())
            .map(|c| {
                self.mask.is_set(c).then(|| {
                    let kids = self.map.children(c);
                    kids.iter().map(|&k| v[k]).sum::<f64>() / kids.len() as f64
                })
            })
            .collect();
        Ok(Observation { values })
    }

    /// Piecewise-constant fine field from an observation; zero under
    /// unobserved coarse cells.
    pub fn prolong(&self, obs: &Observation) -> Result<CellField> {
        if obs.len() != self.map.coarse().num_cells() {
            return Err(Error::InvalidArgument(format!(
                "observation has {} entries for {} coarse cells",
                obs.len(),
                self.map.coarse().num_cells()
            )));
        }
        let fine = *self.map.fine();
        let values = (0..fine.num_cells()).map(|k| obs.values[self.map.parent(k)].unwrap_or(0.0)).collect();
        Ok(CellField::from_vec_unchecked(fine, values))
    }

    /// `prolong(project(u))`.
    pub fn apply(&self, u: &CellField) -> Result<CellField> {
        self.prolong(&self.project(u)?)
    }

    /// `||u - Pi_H u||` for a fully observed domain.
    pub fn approximation_gap(&self, u: &CellField) -> Result<f64> {
        if !self.mask.is_full() {
            return Err(Error::InvalidArgument("approximation gap requires a full observation mask".into()));
        }
        Ok(l2_norm(&u.difference(&self.apply(u)?)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::inner;
    use crate::grid::Grid;

    fn map(fine: usize, coarse: usize) -> CoarseMap {
        CoarseMap::new(Grid::unit_square(fine).unwrap(), Grid::unit_square(coarse).unwrap()).unwrap()
    }

    #[test]
    fn project_constant() {
        let obs = Observer::full(map(8, 2));
        let o = obs.project(&CellField::constant(Grid::unit_square(8).unwrap(), 0.3)).unwrap();
        assert!(o.values().iter().all(|v| (v.unwrap() - 0.3).abs() < 1e-15));
    }

    #[test]
    fn project_block_average() {
        let obs = Observer::full(map(4, 2));
        let g = Grid::unit_square(4).unwrap();
        let u = CellField::new(g, (1..=16).map(f64::from).collect()).unwrap();
        let o = obs.project(&u).unwrap();
        assert_eq!(o.get(0), Some(3.5));
        assert_eq!(o.get(3), Some(13.5));
    }

    #[test]
    fn masked_cells_carry_no_data() {
        let m = map(4, 2);
        let mask = Mask::from_flags(&m, vec![true, false, true, true]).unwrap();
        let obs = Observer::new(m, mask).unwrap();
        let g = Grid::unit_square(4).unwrap();
        let u = CellField::constant(g, 2.0);
        let o = obs.project(&u).unwrap();
        assert_eq!(o.get(1), None);
        let back = obs.prolong(&o).unwrap();
        assert_eq!(back.get(g.index(2, 0)), 0.0);
        assert_eq!(back.get(g.index(0, 0)), 2.0);
        assert!(!obs.observes(g.index(3, 1)));
        assert!(obs.observes(g.index(3, 3)));
    }

    #[test]
    fn prolong_rejects_wrong_length() {
        let obs = Observer::full(map(4, 2));
        let other = Observer::full(map(4, 4));
        let o = other.project(&CellField::zeros(Grid::unit_square(4).unwrap())).unwrap();
        assert!(obs.prolong(&o).is_err());
        assert!(obs.project(&CellField::zeros(Grid::unit_square(5).unwrap())).is_err());
    }

    #[test]
    fn full_mask_constant_roundtrip() {
        let obs = Observer::full(map(6, 3));
        let g = Grid::unit_square(6).unwrap();
        let u = CellField::constant(g, -1.25);
        assert_eq!(obs.apply(&u).unwrap(), u);
        assert_eq!(obs.approximation_gap(&u).unwrap(), 0.0);
    }

    #[test]
    fn gap_requires_full_mask() {
        let m = map(4, 2);
        let mask = Mask::from_flags(&m, vec![true, false, true, true]).unwrap();
        let obs = Observer::new(m, mask).unwrap();
        assert!(obs.approximation_gap(&CellField::zeros(Grid::unit_square(4).unwrap())).is_err());
    }

    #[test]
    fn adjoint_on_structured_fields() {
        let m = map(8, 4);
        let mask = Mask::rect(&m, 0.0, 0.0, 0.5, 1.0).unwrap();
        let obs = Observer::new(m, mask).unwrap();
        let g = Grid::unit_square(8).unwrap();
        let u = CellField::from_fn(g, |x, y| (3.0 * x).sin() + y * y);
        let v = CellField::from_fn(g, |x, y| x * y - (5.0 * y).cos());
        let lhs = inner(&obs.apply(&u).unwrap(), &v).unwrap();
        let rhs = inner(&u, &obs.apply(&v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0));
    }
}
