use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ErrorMetric, RefineError, Result};
use crate::geometry;
use crate::mesh::{CellLocator, Tessellation};
use crate::model::ModelOracle;
use crate::pool::WorkerPool;

pub const HISTOGRAM_BINS: usize = 64;
pub const HISTOGRAM_MIN: f64 = 1e-6;
pub const HISTOGRAM_MAX: f64 = 1e1;

/// Where errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probes {
    Barycenters,
    Random { count: usize, seed: u64 },
}

impl fmt::Display for Probes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probes::Barycenters => f.write_str("barycenters"),
            Probes::Random { count, seed } => write!(f, "random:{count}:{seed}"),
        }
    }
}

impl FromStr for Probes {
    type Err = RefineError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || RefineError::InvalidInput(format!("bad probe spec `{s}` (barycenters or random:COUNT:SEED)"));
        if s == "barycenters" {
            return Ok(Probes::Barycenters);
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["random", count, seed] => {
                Ok(Probes::Random { count: count.parse().map_err(|_| bad())?, seed: seed.parse().map_err(|_| bad())? })
            }
            _ => Err(bad()),
        }
    }
}

/// Log-spaced error histogram with underflow and overflow bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub underflow: u64,
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self { underflow: 0, counts: vec![0; HISTOGRAM_BINS], overflow: 0 }
    }

    /// Lower edge of bin `i`; `edge(HISTOGRAM_BINS)` is the upper limit.
    pub fn edge(i: usize) -> f64 {
        let decades = (HISTOGRAM_MAX / HISTOGRAM_MIN).log10();
        HISTOGRAM_MIN * 10f64.powf(decades * i as f64 / HISTOGRAM_BINS as f64)
    }

    pub fn add(&mut self, err: f64) {
        if err < HISTOGRAM_MIN {
            self.underflow += 1;
        } else if err >= HISTOGRAM_MAX || !err.is_finite() {
            self.overflow += 1;
        } else {
            let decades = (HISTOGRAM_MAX / HISTOGRAM_MIN).log10();
            let pos = (err / HISTOGRAM_MIN).log10() / decades * HISTOGRAM_BINS as f64;
            let bin = (pos.floor() as usize).min(HISTOGRAM_BINS - 1);
            self.counts[bin] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.counts.iter().sum::<u64>()
    }
}

impl Default for Histogram {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub probes: usize,
    pub mean: f64,
    pub rms: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64]) -> Self {
        let mut b = StatsBuilder::new();
        b.extend(errors);
        b.finish()
    }
}

/// Streaming accumulator behind `ErrorStats`.
#[derive(Debug, Clone, Default)]
pub struct StatsBuilder {
    count: usize,
    sum: f64,
    sum_sq: f64,
    max: f64,
    histogram: Histogram,
}

impl StatsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, errors: &[f64]) {
        for &e in errors {
            self.sum += e;
            self.sum_sq += e * e;
            self.max = self.max.max(e);
            self.histogram.add(e);
        }
        self.count += errors.len();
    }

    pub fn finish(self) -> ErrorStats {
        let n = self.count.max(1) as f64;
        ErrorStats {
            probes: self.count,
            mean: self.sum / n,
            rms: (self.sum_sq / n).sqrt(),
            max: self.max,
            histogram: self.histogram,
        }
    }
}

/// Probe points and the interpolated value at each, in probe order.
fn probe_points(t: &Tessellation, probes: Probes, pool: &WorkerPool) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    match probes {
        Probes::Barycenters => {
            let ids: Vec<usize> = t.live_ids().collect();
            let points = pool.map(&ids, |&id| t.barycenter(id));
            let values = pool.map(&ids, |&id| t.barycenter_value(id));
            Ok((points, values))
        }
        Probes::Random { count, seed } => {
            let locator = CellLocator::build(t)?;
            let dom = t.domain();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points: Vec<Vec<f64>> = (0..count)
                .map(|_| (0..t.dim()).map(|ax| dom.mins[ax] + rng.random::<f64>() * dom.extent(ax)).collect())
                .collect();
            let values = pool.try_map(&points, |p| -> Result<f64> {
                let id = locator.locate(t, p)?;
                Ok(geometry::interpolate(&t.simplex_vertices(id), &t.simplex_values(id), p)
                    .map_err(crate::mesh::MeshError::from)?)
            })?;
            Ok((points, values))
        }
    }
}

/// Per-probe interpolation errors against the oracle.
pub fn probe_errors(
    oracle: &dyn ModelOracle,
    t: &Tessellation,
    metric: &ErrorMetric,
    probes: Probes,
    pool: &WorkerPool,
) -> Result<Vec<f64>> {
    let (points, interp) = probe_points(t, probes, pool)?;
    let model = oracle.evaluate_batch(pool, &points)?;
    Ok(model.iter().zip(&interp).map(|(&f, &i)| metric.error(f, i)).collect())
}

pub fn error_stats(
    oracle: &dyn ModelOracle,
    t: &Tessellation,
    metric: &ErrorMetric,
    probes: Probes,
    pool: &WorkerPool,
) -> Result<ErrorStats> {
    Ok(ErrorStats::from_errors(&probe_errors(oracle, t, metric, probes, pool)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::kuhn_triangulate;
    use crate::model::{sample_to_grid, AnalyticModel, DomainBox, GridImage, GridSpec, ModelError};
    use crate::refine::MetricKind;

    struct Square;

    impl ModelOracle for Square {
        fn name(&self) -> &str {
            "square"
        }
        fn domain(&self) -> &DomainBox {
            static D: std::sync::OnceLock<DomainBox> = std::sync::OnceLock::new();
            D.get_or_init(|| DomainBox::unit(1))
        }
        fn evaluate(&self, p: &[f64]) -> std::result::Result<f64, ModelError> {
            Ok(p[0] * p[0])
        }
    }

    #[test]
    fn affine_has_zero_error() {
        let m = AnalyticModel::affine(3);
        let spec = GridSpec::new(vec![4, 3, 5], m.domain().clone()).unwrap();
        let t = kuhn_triangulate(&sample_to_grid(&m, &spec, &WorkerPool::single()).unwrap()).unwrap();
        for probes in [Probes::Barycenters, Probes::Random { count: 1000, seed: 3 }] {
            let s = error_stats(&m, &t, &ErrorMetric::default(), probes, &WorkerPool::single()).unwrap();
            assert!(s.max < 1e-12, "{s:?}");
            assert_eq!(s.histogram.total(), s.probes as u64);
        }
    }

    #[test]
    fn one_dimensional_square_at_midpoint() {
        let g = GridImage::new(vec![2], vec![0.0], vec![1.0], vec![0.0, 1.0], None).unwrap();
        let t = kuhn_triangulate(&g).unwrap();
        let expect = [(MetricKind::Absolute, 0.25), (MetricKind::Relative, 0.5), (MetricKind::MinRelAbs, 0.25)];
        for (kind, want) in expect {
            let metric = ErrorMetric::new(kind, 0.05).unwrap();
            let s = error_stats(&Square, &t, &metric, Probes::Barycenters, &WorkerPool::single()).unwrap();
            assert_eq!(s.probes, 1);
            assert_eq!(s.max, want);
            assert_eq!(s.mean, want);
        }
    }

    #[test]
    fn histogram_bins() {
        let mut h = Histogram::new();
        for e in [0.0, 5e-7, 1e-6, 1e-3, 9.99, 10.0, 1e5] {
            h.add(e);
        }
        assert_eq!(h.underflow, 2);
        assert_eq!(h.overflow, 2);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[HISTOGRAM_BINS - 1], 1);
        assert_eq!(h.total(), 7);
        assert!((Histogram::edge(HISTOGRAM_BINS) - HISTOGRAM_MAX).abs() < 1e-9);
    }

    #[test]
    fn probe_spec_parsing() {
        assert_eq!("barycenters".parse::<Probes>().unwrap(), Probes::Barycenters);
        assert_eq!("random:100:7".parse::<Probes>().unwrap(), Probes::Random { count: 100, seed: 7 });
        assert!("random:x:7".parse::<Probes>().is_err());
        assert_eq!(Probes::Random { count: 5, seed: 1 }.to_string(), "random:5:1");
    }

    #[test]
    fn random_probes_are_seeded() {
        let m = AnalyticModel::imh_like();
        let spec = GridSpec::new(vec![4; 3], m.domain().clone()).unwrap();
        let t = kuhn_triangulate(&sample_to_grid(&m, &spec, &WorkerPool::single()).unwrap()).unwrap();
        let metric = ErrorMetric::default();
        let a = probe_errors(&m, &t, &metric, Probes::Random { count: 500, seed: 9 }, &WorkerPool::new(1)).unwrap();
        let b = probe_errors(&m, &t, &metric, Probes::Random { count: 500, seed: 9 }, &WorkerPool::new(3)).unwrap();
        assert_eq!(a, b);
    }
}
