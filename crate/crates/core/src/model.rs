//! Model oracles: the expensive-function contract, analytic stand-ins, the
//! lattice-backed [`GridImage`], and the exact-key evaluation cache.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::pool::WorkerPool;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown model `{0}` (expected imh-like, reh-like, affine, constant)")]
    UnknownModel(String),
    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },
    #[error("model evaluation failed: {0}")]
    Evaluation(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Axis-aligned box `[mins, maxs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl DomainBox {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self> {
        if mins.is_empty() || mins.len() != maxs.len() {
            return Err(ModelError::InvalidInput(format!(
                "box needs matching non-empty bounds, got {} mins and {} maxs",
                mins.len(),
                maxs.len()
            )));
        }
        for (ax, (lo, hi)) in mins.iter().zip(&maxs).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(ModelError::InvalidInput(format!("axis {ax} has invalid bounds [{lo}, {hi}]")));
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn unit(dim: usize) -> Self {
        Self { mins: vec![0.0; dim], maxs: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn volume(&self) -> f64 {
        self.mins.iter().zip(&self.maxs).map(|(a, b)| b - a).product()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.maxs[axis] - self.mins[axis]
    }

    /// Inclusive containment with a per-axis slack of `rel_tol × extent`.
    pub fn contains(&self, p: &[f64], rel_tol: f64) -> bool {
        p.len() == self.dim()
            && p.iter().enumerate().all(|(ax, &x)| {
                let slack = rel_tol * self.extent(ax);
                x >= self.mins[ax] - slack && x <= self.maxs[ax] + slack
            })
    }

    pub fn contains_box(&self, other: &DomainBox, rel_tol: f64) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|ax| {
                let slack = rel_tol * self.extent(ax);
                other.mins[ax] >= self.mins[ax] - slack && other.maxs[ax] <= self.maxs[ax] + slack
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostClass {
    Cheap,
    Expensive,
}

/// A deterministic scalar function over a box.
pub trait ModelOracle: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> &DomainBox;

    fn dimension(&self) -> usize {
        self.domain().dim()
    }

    fn cost_class(&self) -> CostClass {
        CostClass::Cheap
    }

    fn evaluate(&self, p: &[f64]) -> Result<f64>;

    /// Order-preserving batch evaluation on the given pool.
    fn evaluate_batch(&self, pool: &WorkerPool, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        pool.try_map(points, |p| self.evaluate(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum AnalyticKind {
    ImhLike,
    RehLike,
    Affine { coefficients: Vec<f64>, offset: f64 },
    Constant(f64),
}

/// Closed-form stand-in models.
///
/// * `imh-like`: `(1+y)·e^(−4x)·(10⁻³ + z)^(−0.8)`, positive, four decades.
/// * `reh-like`: `(1+y)·e^(−4x)·sin(2πz)`, changes sign at `z = ½`.
/// * `affine[:dim]`: `1 + 2x − y + 3z …`, reproduced exactly by linear interpolation.
/// * `constant[:value[:dim]]`: a constant (default 1 in 3D).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticModel {
    name: String,
    kind: AnalyticKind,
    domain: DomainBox,
}

const AFFINE_COEFFICIENTS: [f64; 8] = [2.0, -1.0, 3.0, -2.0, 0.5, 1.5, -0.25, 4.0];

impl AnalyticModel {
    pub fn imh_like() -> Self {
        Self { name: "imh-like".into(), kind: AnalyticKind::ImhLike, domain: DomainBox::unit(3) }
    }

    pub fn reh_like() -> Self {
        Self { name: "reh-like".into(), kind: AnalyticKind::RehLike, domain: DomainBox::unit(3) }
    }

    pub fn affine(dim: usize) -> Self {
        let dim = dim.clamp(1, AFFINE_COEFFICIENTS.len());
        Self {
            name: if dim == 3 { "affine".into() } else { format!("affine:{dim}") },
            kind: AnalyticKind::Affine { coefficients: AFFINE_COEFFICIENTS[..dim].to_vec(), offset: 1.0 },
            domain: DomainBox::unit(dim),
        }
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            name: format!("constant:{value}:{dim}"),
            kind: AnalyticKind::Constant(value),
            domain: DomainBox::unit(dim.max(1)),
        }
    }
}

/// Looks up a built-in model by name.
pub fn analytic_model(name: &str) -> Result<AnalyticModel> {
    let mut parts = name.split(':');
    let head = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|d| (1..=AFFINE_COEFFICIENTS.len()).contains(d))
            .ok_or_else(|| ModelError::InvalidInput(format!("bad dimension `{s}` in `{name}`")))
    };
    match (head, args.as_slice()) {
        ("imh-like", []) => Ok(AnalyticModel::imh_like()),
        ("reh-like", []) => Ok(AnalyticModel::reh_like()),
        ("affine", []) => Ok(AnalyticModel::affine(3)),
        ("affine", [d]) => Ok(AnalyticModel::affine(parse_dim(d)?)),
        ("constant", rest) if rest.len() <= 2 => {
            let value = match rest.first() {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ModelError::InvalidInput(format!("bad value in `{name}`")))?,
                None => 1.0,
            };
            let dim = match rest.get(1) {
                Some(d) => parse_dim(d)?,
                None => 3,
            };
            let mut m = AnalyticModel::constant(value, dim);
            m.name = name.to_string();
            Ok(m)
        }
        _ => Err(ModelError::UnknownModel(name.to_string())),
    }
}

impl ModelOracle for AnalyticModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }

    fn evaluate(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.domain.dim() {
            return Err(ModelError::InvalidInput(format!(
                "{} expects {} coordinates, got {}",
                self.name,
                self.domain.dim(),
                p.len()
            )));
        }
        Ok(match &self.kind {
            AnalyticKind::ImhLike => (1.0 + p[1]) * (-4.0 * p[0]).exp() * (1e-3 + p[2]).powf(-0.8),
            AnalyticKind::RehLike => (1.0 + p[1]) * (-4.0 * p[0]).exp() * (2.0 * std::f64::consts::PI * p[2]).sin(),
            AnalyticKind::Affine { coefficients, offset } => {
                offset + coefficients.iter().zip(p).map(|(a, x)| a * x).sum::<f64>()
            }
            AnalyticKind::Constant(c) => *c,
        })
    }
}

/// Adds a fixed busy-wait to every evaluation of the wrapped oracle.
pub struct WithLatency<M> {
    inner: M,
    latency: Duration,
}

impl<M: ModelOracle> WithLatency<M> {
    pub fn new(inner: M, latency: Duration) -> Self {
        Self { inner, latency }
    }
}

impl<M: ModelOracle> ModelOracle for WithLatency<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn domain(&self) -> &DomainBox {
        self.inner.domain()
    }

    fn cost_class(&self) -> CostClass {
        if self.latency.is_zero() {
            self.inner.cost_class()
        } else {
            CostClass::Expensive
        }
    }

    fn evaluate(&self, p: &[f64]) -> Result<f64> {
        let v = self.inner.evaluate(p)?;
        if !self.latency.is_zero() {
            let start = Instant::now();
            while start.elapsed() < self.latency {
                std::hint::spin_loop();
            }
        }
        Ok(v)
    }
}

/// Regular Cartesian lattice of scalar samples.
///
/// Samples are stored with axis 0 varying fastest; the coordinate of index
/// `i` on axis `a` is `mins[a] + i·spacings[a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    sizes: Vec<usize>,
    mins: Vec<f64>,
    spacings: Vec<f64>,
    samples: Vec<f64>,
    labels: Option<Vec<String>>,
    domain: DomainBox,
}

impl GridImage {
    pub fn new(
        sizes: Vec<usize>,
        mins: Vec<f64>,
        spacings: Vec<f64>,
        samples: Vec<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let dim = sizes.len();
        if dim == 0 || mins.len() != dim || spacings.len() != dim {
            return Err(ModelError::InvalidInput(format!(
                "grid needs one size, min and spacing per axis (got {}, {}, {})",
                dim,
                mins.len(),
                spacings.len()
            )));
        }
        if let Some(ax) = sizes.iter().position(|&s| s < 2) {
            return Err(ModelError::InvalidInput(format!("axis {ax} has {} samples, need at least 2", sizes[ax])));
        }
        if spacings.iter().any(|s| !s.is_finite() || *s <= 0.0) || mins.iter().any(|m| !m.is_finite()) {
            return Err(ModelError::InvalidInput("spacings must be positive and finite".into()));
        }
        let count: usize = sizes.iter().product();
        if samples.len() != count {
            return Err(ModelError::InvalidInput(format!("{} samples for a lattice of {count} points", samples.len())));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidInput("grid samples must be finite".into()));
        }
        if let Some(l) = &labels {
            if l.len() != dim {
                return Err(ModelError::InvalidInput(format!("{} labels for {dim} axes", l.len())));
            }
        }
        let maxs = (0..dim).map(|a| mins[a] + (sizes[a] - 1) as f64 * spacings[a]).collect();
        let domain = DomainBox { mins: mins.clone(), maxs };
        Ok(Self { sizes, mins, spacings, samples, labels, domain })
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn bounds(&self) -> &DomainBox {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        self.mins[axis] + index as f64 * self.spacings[axis]
    }

    /// Lattice multi-index of a linear sample index.
    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        self.sizes
            .iter()
            .map(|&s| {
                let i = linear % s;
                linear /= s;
                i
            })
            .collect()
    }

    pub fn point(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear).into_iter().enumerate().map(|(ax, i)| self.coord(ax, i)).collect()
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Multilinear interpolation on the lattice cell containing `p`.
    pub fn interpolate(&self, p: &[f64]) -> Result<f64> {
        let dim = self.dim();
        if p.len() != dim {
            return Err(ModelError::InvalidInput(format!("point has {} coordinates, grid has {dim} axes", p.len())));
        }
        if !self.domain.contains(p, 1e-12) {
            return Err(ModelError::OutOfDomain { point: p.to_vec() });
        }
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0; dim];
        for ax in 0..dim {
            let t = (p[ax] - self.mins[ax]) / self.spacings[ax];
            let cell = (t.floor().max(0.0) as usize).min(self.sizes[ax] - 2);
            base[ax] = cell;
            frac[ax] = (t - cell as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut linear = 0;
            let mut stride = 1;
            for ax in 0..dim {
                let up = corner >> ax & 1 == 1;
                weight *= if up { frac[ax] } else { 1.0 - frac[ax] };
                linear += (base[ax] + up as usize) * stride;
                stride *= self.sizes[ax];
            }
            if weight != 0.0 {
                acc += weight * self.samples[linear];
            }
        }
        Ok(acc)
    }
}

impl ModelOracle for GridImage {
    fn name(&self) -> &str {
        "grid"
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }

    fn evaluate(&self, p: &[f64]) -> Result<f64> {
        self.interpolate(p)
    }
}

/// Sampling lattice: sizes and inclusive bounds per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    pub bounds: DomainBox,
}

impl GridSpec {
    pub fn new(sizes: Vec<usize>, bounds: DomainBox) -> Result<Self> {
        if sizes.len() != bounds.dim() {
            return Err(ModelError::InvalidInput(format!(
                "{} sizes for a {}-dimensional box",
                sizes.len(),
                bounds.dim()
            )));
        }
        if let Some(ax) = sizes.iter().position(|&s| s < 2) {
            return Err(ModelError::InvalidInput(format!("axis {ax} needs at least 2 samples")));
        }
        Ok(Self { sizes, bounds })
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.sizes.iter().enumerate().map(|(ax, &s)| self.bounds.extent(ax) / (s - 1) as f64).collect()
    }
}

/// Evaluates the oracle once per lattice point.
pub fn sample_to_grid(model: &dyn ModelOracle, spec: &GridSpec, pool: &WorkerPool) -> Result<GridImage> {
    if spec.bounds.dim() != model.dimension() {
        return Err(ModelError::InvalidInput(format!(
            "{}-dimensional grid for a {}-dimensional model",
            spec.bounds.dim(),
            model.dimension()
        )));
    }
    if !model.domain().contains_box(&spec.bounds, 1e-12) {
        return Err(ModelError::InvalidInput(format!(
            "grid box {:?}..{:?} exceeds the model domain",
            spec.bounds.mins, spec.bounds.maxs
        )));
    }
    let spacings = spec.spacings();
    let count: usize = spec.sizes.iter().product();
    let probe = GridImage {
        sizes: spec.sizes.clone(),
        mins: spec.bounds.mins.clone(),
        spacings: spacings.clone(),
        samples: Vec::new(),
        labels: None,
        domain: spec.bounds.clone(),
    };
    let points: Vec<Vec<f64>> = (0..count).map(|i| probe.point(i)).collect();
    let samples = model.evaluate_batch(pool, &points)?;
    GridImage::new(spec.sizes.clone(), spec.bounds.mins.clone(), spacings, samples, None)
}

/// Wall time split of one cached batch evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalTiming {
    /// Time inside the oracle.
    pub model: Duration,
    /// Key hashing, cache lookups and result marshalling.
    pub model_io: Duration,
}

fn key_of(p: &[f64]) -> Vec<u64> {
    p.iter().map(|x| x.to_bits()).collect()
}

/// Memoizes oracle values by exact coordinate bit pattern so that no point
/// is evaluated twice.
pub struct CachedOracle<'a> {
    oracle: &'a dyn ModelOracle,
    cache: HashMap<Vec<u64>, f64>,
    calls: u64,
    requests: u64,
}

impl<'a> CachedOracle<'a> {
    pub fn new(oracle: &'a dyn ModelOracle) -> Self {
        Self { oracle, cache: HashMap::new(), calls: 0, requests: 0 }
    }

    pub fn oracle(&self) -> &'a dyn ModelOracle {
        self.oracle
    }

    /// Number of points actually sent to the oracle.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Number of point lookups, including cache hits.
    pub fn requests(&self) -> u64 {
        self.requests
    }

    pub fn cached(&self, p: &[f64]) -> Option<f64> {
        self.cache.get(&key_of(p)).copied()
    }

    pub fn evaluate(&mut self, pool: &WorkerPool, points: &[Vec<f64>]) -> Result<(Vec<f64>, EvalTiming)> {
        let io_start = Instant::now();
        self.requests += points.len() as u64;
        let keys: Vec<Vec<u64>> = points.iter().map(|p| key_of(p)).collect();
        let mut pending: HashMap<&[u64], usize> = HashMap::new();
        let mut missing: Vec<Vec<f64>> = Vec::new();
        for (p, k) in points.iter().zip(&keys) {
            if !self.cache.contains_key(k) && !pending.contains_key(k.as_slice()) {
                pending.insert(k.as_slice(), missing.len());
                missing.push(p.clone());
            }
        }
        let mut model_io = io_start.elapsed();

        let model_start = Instant::now();
        let fresh = self.oracle.evaluate_batch(pool, &missing)?;
        let model = model_start.elapsed();

        let io_start = Instant::now();
        self.calls += missing.len() as u64;
        for (k, slot) in pending {
            self.cache.insert(k.to_vec(), fresh[slot]);
        }
        let values = keys.iter().map(|k| self.cache[k]).collect();
        model_io += io_start.elapsed();
        Ok((values, EvalTiming { model, model_io }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::Mutex;

    struct Counting<M> {
        inner: M,
        calls: Mutex<usize>,
    }

    impl<M: ModelOracle> ModelOracle for Counting<M> {
        fn name(&self) -> &str {
            self.inner.name()
        }
        fn domain(&self) -> &DomainBox {
            self.inner.domain()
        }
        fn evaluate(&self, p: &[f64]) -> Result<f64> {
            *self.calls.lock().unwrap() += 1;
            self.inner.evaluate(p)
        }
    }

    fn spec(sizes: &[usize], lo: f64, hi: f64) -> GridSpec {
        let d = sizes.len();
        GridSpec::new(sizes.to_vec(), DomainBox::new(vec![lo; d], vec![hi; d]).unwrap()).unwrap()
    }

    #[test]
    fn constant_grid() {
        let m = analytic_model("constant:7").unwrap();
        let g = sample_to_grid(&m, &spec(&[3, 3, 3], 0.0, 1.0), &WorkerPool::single()).unwrap();
        assert_eq!(g.len(), 27);
        assert!(g.samples().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn grid_of_reference_size_has_expected_point_count() {
        let m = Counting { inner: AnalyticModel::imh_like(), calls: Mutex::new(0) };
        let g = sample_to_grid(&m, &spec(&[41, 13, 81], 0.0, 1.0), &WorkerPool::new(4)).unwrap();
        assert_eq!(g.len(), 43_173);
        assert_eq!(*m.calls.lock().unwrap(), 43_173);
    }

    #[test]
    fn affine_grid_corners() {
        let m = AnalyticModel::affine(3);
        let g = sample_to_grid(&m, &spec(&[2, 2, 2], 0.0, 1.0), &WorkerPool::single()).unwrap();
        for i in 0..8 {
            let p = g.point(i);
            assert_eq!(g.samples()[i], m.evaluate(&p).unwrap());
        }
        // (1,0,0) is linear index 1 with axis 0 fastest.
        assert_eq!(g.samples()[1], 3.0);
    }

    #[test]
    fn sample_rejects_box_outside_domain() {
        let m = AnalyticModel::imh_like();
        assert!(sample_to_grid(&m, &spec(&[3, 3, 3], 0.0, 2.0), &WorkerPool::single()).is_err());
    }

    #[test]
    fn grid_interpolation_examples() {
        let g = GridImage::new(vec![2], vec![0.0], vec![1.0], vec![0.0, 1.0], None).unwrap();
        assert_eq!(g.interpolate(&[0.25]).unwrap(), 0.25);
        assert_eq!(g.interpolate(&[1.0]).unwrap(), 1.0);
        assert!(matches!(g.interpolate(&[1.5]), Err(ModelError::OutOfDomain { .. })));

        let c = GridImage::new(vec![3, 3], vec![0.0, 0.0], vec![0.5, 0.5], vec![4.0; 9], None).unwrap();
        assert_eq!(c.interpolate(&[0.25, 0.75]).unwrap(), 4.0);
    }

    #[test]
    fn grid_is_exact_at_lattice_points() {
        let m = AnalyticModel::imh_like();
        let s =
            GridSpec::new(vec![5, 4, 6], DomainBox::new(vec![0.1, 0.0, 0.2], vec![0.9, 0.6, 1.0]).unwrap()).unwrap();
        let g = sample_to_grid(&m, &s, &WorkerPool::single()).unwrap();
        for i in 0..g.len() {
            let v = g.interpolate(&g.point(i)).unwrap();
            assert_relative_eq!(v, g.samples()[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn grid_reproduces_affine_oracle() {
        let m = AnalyticModel::affine(3);
        let g = sample_to_grid(&m, &spec(&[4, 5, 3], 0.0, 1.0), &WorkerPool::single()).unwrap();
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let p = [next(), next(), next()];
            assert_relative_eq!(g.interpolate(&p).unwrap(), m.evaluate(&p).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn analytic_values() {
        let a = AnalyticModel::imh_like();
        let v = a.evaluate(&[0.0, 0.0, 0.0]).unwrap();
        // 10^2.4 to 10 significant digits.
        assert_relative_eq!(v, 251.188_643_2, max_relative = 1e-9);
        let b = AnalyticModel::reh_like();
        for &(x, y) in &[(0.0, 0.0), (0.3, 0.7), (1.0, 1.0)] {
            assert!(b.evaluate(&[x, y, 0.5]).unwrap().abs() < 1e-15);
        }
        assert_relative_eq!(b.evaluate(&[0.0, 1.0, 0.75]).unwrap(), -2.0, epsilon = 1e-15);
    }

    #[test]
    fn unknown_model_is_rejected() {
        assert!(matches!(analytic_model("gpdgk16"), Err(ModelError::UnknownModel(_))));
        assert!(analytic_model("affine:0").is_err());
        assert_eq!(analytic_model("affine:2").unwrap().dimension(), 2);
        assert_eq!(analytic_model("constant:2.5:1").unwrap().evaluate(&[0.3]).unwrap(), 2.5);
    }

    #[test]
    fn cache_never_evaluates_a_point_twice() {
        let m = Counting { inner: AnalyticModel::imh_like(), calls: Mutex::new(0) };
        let mut c = CachedOracle::new(&m);
        let pool = WorkerPool::new(3);
        let pts = vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6], vec![0.1, 0.2, 0.3]];
        let (v1, _) = c.evaluate(&pool, &pts).unwrap();
        assert_eq!(v1[0], v1[2]);
        let (v2, _) = c.evaluate(&pool, &pts[..2]).unwrap();
        assert_eq!(v2, v1[..2].to_vec());
        assert_eq!(c.calls(), 2);
        assert_eq!(c.requests(), 5);
        assert_eq!(*m.calls.lock().unwrap(), 2);
    }

    #[test]
    fn latency_wrapper_preserves_values() {
        let m = WithLatency::new(AnalyticModel::reh_like(), Duration::from_micros(50));
        let p = [0.2, 0.4, 0.1];
        let t = Instant::now();
        let v = m.evaluate(&p).unwrap();
        assert!(t.elapsed() >= Duration::from_micros(50));
        assert_eq!(v, AnalyticModel::reh_like().evaluate(&p).unwrap());
        assert_eq!(m.cost_class(), CostClass::Expensive);
    }
}
