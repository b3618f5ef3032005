//! Error metrics between reference and assimilated states: L2, max norm,
//! the dual norm of zero-mean H1 through the K-weighted Green operator,
//! exponential decay fitting and plateau detection.

use crate::error::{Error, Result};
use crate::field::{inner, mean, zero_mean, CellField};
use crate::pressure::{PressureSystem, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub v0star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L2,
    Linf,
    V0Star,
}

impl ErrorRecord {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::L2 => Some(self.l2),
            Metric::Linf => Some(self.linf),
            Metric::V0Star => self.v0star,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesMeta {
    /// Coarse observation resolution.
    pub h: f64,
    pub mu: f64,
    pub mask: String,
}

/// Time-ordered error records of one assimilation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorSeries {
    records: Vec<ErrorRecord>,
    pub meta: SeriesMeta,
}

impl ErrorSeries {
    pub fn new(meta: SeriesMeta) -> Self {
        ErrorSeries { records: Vec::new(), meta }
    }

    pub fn push(&mut self, rec: ErrorRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return Err(Error::InvalidArgument(format!("series times must increase: {} after {}", rec.t, last.t)));
            }
        }
        let finite = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite(rec.l2) && finite(rec.linf) && rec.v0star.map_or(true, finite)) {
            return Err(Error::InvalidArgument(format!("invalid error record {rec:?}")));
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[ErrorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&ErrorRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&ErrorRecord> {
        self.records.last()
    }

    /// Record with time closest to `t`.
    pub fn at(&self, t: f64) -> Option<&ErrorRecord> {
        self.records.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualNorm {
    pub norm: f64,
    /// Mean removed from the input before solving.
    pub removed_mean: f64,
}

/// `||e||_{V0*} = sqrt((e, G e))` where `G e` is the zero-mean solution of
/// `-div(lam K grad G) = (I - pi) e` with no-flow boundaries.
pub fn v0star_norm(e: &CellField, perm: &CellField, weight: Option<&CellField>) -> Result<DualNorm> {
    e.grid().ensure_same(perm.grid(), "dual norm permeability")?;
    let cond: Vec<f64> = match weight {
        Some(w) => {
            e.grid().ensure_same(w.grid(), "dual norm weight")?;
            perm.values().iter().zip(w.values()).map(|(k, l)| k * l).collect()
        }
        None => perm.values().to_vec(),
    };
    let removed_mean = mean(e);
    let centred = zero_mean(e);
    let sys = PressureSystem::from_conductivity(*e.grid(), &cond, SolverSettings::default())?;
    let g = sys.solve(&centred)?;
    let norm = inner(&centred, &g)?.max(0.0).sqrt();
    Ok(DualNorm { norm, removed_mean })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Negated slope of `ln(metric)` versus time; positive means decay.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `ln(metric)` against `t` over `[t_a, t_b]`.
pub fn fit_decay(series: &ErrorSeries, metric: Metric, window: (f64, f64)) -> Result<DecayFit> {
    let (t_a, t_b) = window;
    let mut pts = Vec::new();
    for r in series.records().iter().filter(|r| r.t >= t_a && r.t <= t_b) {
        let Some(v) = r.metric(metric) else { continue };
        if !(v > 0.0) {
            return Err(Error::InvalidArgument(format!("non-positive {metric:?} value {v} at t = {}", r.t)));
        }
        pts.push((r.t, v.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "decay fit needs at least 3 points in [{t_a}, {t_b}], found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - ym - slope * (p.0 - tm)).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit { rate: -slope, r_squared, points: pts.len() })
}

/// Earliest time after which the metric never exceeds `floor_factor` times
/// its minimum over the series; `None` if no such time exists.
pub fn plateau_time(series: &ErrorSeries, metric: Metric, floor_factor: f64) -> Result<Option<f64>> {
    if !(floor_factor > 1.0) {
        return Err(Error::InvalidArgument(format!("floor factor must exceed 1, got {floor_factor}")));
    }
    let pts: Vec<(f64, f64)> = series.records().iter().filter_map(|r| r.metric(metric).map(|v| (r.t, v))).collect();
    if pts.is_empty() {
        return Err(Error::InvalidArgument("plateau detection on an empty series".into()));
    }
    let floor = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ceiling = floor_factor * floor;
    let mut start = None;
    for &(t, v) in pts.iter().rev() {
        if v > ceiling {
            break;
        }
        start = Some(t);
    }
    Ok(start)
}
