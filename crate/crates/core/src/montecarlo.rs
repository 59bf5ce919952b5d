//! Event generation from a tessellated lookup table.
//!
//! Simplices are selected by inverting a normalized cumulative table of
//! per-simplex weights (linear-interpolant integrals or volumes) and points
//! are drawn uniformly inside the selected simplex.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry;
use crate::mesh::{MeshError, Tessellation};
use crate::pool::WorkerPool;

pub const DEFAULT_BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("simplex {id} has negative integral {integral:e}; use absolute densities to sample it")]
    NegativeDensity { id: usize, integral: f64 },
    #[error("total density is zero")]
    EmptyDensity,
    #[error("cumulative table is stale: {0}")]
    Stale(String),
    #[error("{requested} sampling needs a {needed} table, got {found}")]
    ModeMismatch { requested: SamplingMode, needed: DensityMode, found: DensityMode },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub type Result<T> = std::result::Result<T, McError>;

/// What the cumulative table is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DensityMode {
    /// Integral of the linear interpolant over each simplex.
    Importance,
    /// Simplex volume.
    Volume,
}

impl DensityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DensityMode::Importance => "importance",
            DensityMode::Volume => "volume",
        }
    }
}

impl fmt::Display for DensityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityMode {
    type Err = McError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "importance" => Ok(DensityMode::Importance),
            "volume" => Ok(DensityMode::Volume),
            other => Err(McError::InvalidInput(format!("unknown density mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// Points uniform over the domain, weighted by the interpolated value.
    Uniform,
    /// Points distributed like the interpolant, unit (or sign) weight.
    Importance,
}

impl SamplingMode {
    pub fn table_mode(self) -> DensityMode {
        match self {
            SamplingMode::Uniform => DensityMode::Volume,
            SamplingMode::Importance => DensityMode::Importance,
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Uniform => "uniform",
            SamplingMode::Importance => "importance",
        })
    }
}

impl FromStr for SamplingMode {
    type Err = McError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplingMode::Uniform),
            "importance" => Ok(SamplingMode::Importance),
            other => Err(McError::InvalidInput(format!("unknown sampling mode `{other}`"))),
        }
    }
}

/// Exact integral of the linear interpolant over a live simplex.
pub fn simplex_integral(t: &Tessellation, id: usize) -> Result<f64> {
    t.check_live(id)?;
    Ok(t.volume(id) * t.barycenter_value(id))
}

/// Normalized cumulative sums of per-simplex weights over the live
/// simplices in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeTable {
    mode: DensityMode,
    absolute: bool,
    ids: Vec<usize>,
    integrals: Vec<f64>,
    cumulative: Vec<f64>,
    revision: u64,
}

fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(McError::EmptyDensity);
    }
    let mut acc = 0.0;
    let mut f: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc / total
        })
        .collect();
    // Exact top so every u < 1 resolves; trailing zero-weight entries share it.
    let last_positive = weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1);
    for x in &mut f[last_positive..] {
        *x = 1.0;
    }
    Ok(f)
}

/// Builds the selection table. In importance mode negative integrals are an
/// error unless `absolute` is set, in which case `|I_k|` is used.
pub fn build_cumulative(t: &Tessellation, mode: DensityMode, absolute: bool) -> Result<CumulativeTable> {
    let ids: Vec<usize> = t.live_ids().collect();
    let mut integrals = Vec::with_capacity(ids.len());
    for &id in &ids {
        let w = match mode {
            DensityMode::Importance => simplex_integral(t, id)?,
            DensityMode::Volume => t.volume(id),
        };
        if w < 0.0 && !absolute {
            return Err(McError::NegativeDensity { id, integral: w });
        }
        integrals.push(w);
    }
    let weights: Vec<f64> = integrals.iter().map(|w| w.abs()).collect();
    let cumulative = normalize(&weights)?;
    Ok(CumulativeTable { mode, absolute, ids, integrals, cumulative, revision: t.revision() })
}

impl CumulativeTable {
    /// Reassembles a stored table for `t`, checking that it matches the
    /// tessellation's live simplices and is a valid distribution.
    pub fn from_parts(
        t: &Tessellation,
        mode: DensityMode,
        absolute: bool,
        integrals: Vec<f64>,
        cumulative: Vec<f64>,
    ) -> Result<Self> {
        let ids: Vec<usize> = t.live_ids().collect();
        if integrals.len() != ids.len() || cumulative.len() != ids.len() {
            return Err(McError::Stale(format!(
                "table has {} entries for {} live simplices",
                integrals.len(),
                ids.len()
            )));
        }
        if cumulative.windows(2).any(|w| w[1] < w[0]) || cumulative.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(McError::InvalidInput("cumulative sums are not a non-decreasing sequence in [0, 1]".into()));
        }
        if cumulative.last().is_some_and(|l| (l - 1.0).abs() > 1e-12) {
            return Err(McError::InvalidInput("cumulative sums do not end at 1".into()));
        }
        Ok(Self { mode, absolute, ids, integrals, cumulative, revision: t.revision() })
    }

    pub fn mode(&self) -> DensityMode {
        self.mode
    }

    pub fn absolute(&self) -> bool {
        self.absolute
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Signed per-simplex weights `I_k` (volumes in volume mode).
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    /// `F_1..F_Ns`; `F_0 = 0` is implicit.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total(&self) -> f64 {
        self.integrals.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Position `k` with `F_{k-1} <= u < F_k`.
    pub fn select_index(&self, u: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&u) {
            return Err(McError::InvalidInput(format!("u = {u} is outside [0, 1)")));
        }
        Ok(self.cumulative.partition_point(|&f| f <= u))
    }

    pub fn check_current(&self, t: &Tessellation) -> Result<()> {
        if t.revision() != self.revision || t.live_count() != self.ids.len() {
            return Err(McError::Stale(format!(
                "built at revision {} for {} simplices, tessellation is at revision {} with {}",
                self.revision,
                self.ids.len(),
                t.revision(),
                t.live_count()
            )));
        }
        Ok(())
    }
}

/// Simplex id selected by `u`.
pub fn select_simplex(c: &CumulativeTable, u: f64) -> Result<usize> {
    Ok(c.ids[c.select_index(u)?])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub point: Vec<f64>,
    pub weight: f64,
    pub simplex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    /// Rejection-sample the linear interpolant inside each simplex instead
    /// of drawing uniformly (importance mode only).
    pub exact_density: bool,
    pub batch_size: usize,
}

impl Default for EventOptions {
    fn default() -> Self {
        Self { exact_density: false, batch_size: DEFAULT_BATCH }
    }
}

/// Generates `n` events in batch-major order. Batch `b` draws from the
/// ChaCha8 stream `b` of `seed`, so the output does not depend on the pool.
pub fn generate_events(
    t: &Tessellation,
    table: &CumulativeTable,
    n: usize,
    mode: SamplingMode,
    seed: u64,
    options: EventOptions,
    pool: &WorkerPool,
) -> Result<Vec<Event>> {
    table.check_current(t)?;
    if table.mode != mode.table_mode() {
        return Err(McError::ModeMismatch { requested: mode, needed: mode.table_mode(), found: table.mode });
    }
    if options.exact_density && mode == SamplingMode::Uniform {
        return Err(McError::InvalidInput("exact density applies to importance sampling only".into()));
    }
    if options.batch_size == 0 {
        return Err(McError::InvalidInput("batch size must be positive".into()));
    }
    let batches: Vec<usize> = (0..n.div_ceil(options.batch_size)).collect();
    let out = pool.map(&batches, |&b| {
        let count = options.batch_size.min(n - b * options.batch_size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        (0..count).map(|_| draw(t, table, mode, options.exact_density, &mut rng)).collect::<Vec<_>>()
    });
    Ok(out.into_iter().flatten().collect())
}

fn draw(t: &Tessellation, table: &CumulativeTable, mode: SamplingMode, exact: bool, rng: &mut ChaCha8Rng) -> Event {
    let d = t.dim();
    let mut z = vec![0.0; d];
    loop {
        let u: f64 = rng.random();
        let k = table.cumulative.partition_point(|&f| f <= u);
        let id = table.ids[k];
        for zi in &mut z {
            *zi = rng.random::<f64>();
        }
        let coeffs = geometry::coefficients_from_uniforms(&z);
        let verts = t.simplex_vertices(id);
        let values = t.simplex_values(id);
        let point = geometry::combine(&verts, &coeffs);
        let f: f64 = coeffs.iter().zip(&values).map(|(c, v)| c * v).sum();
        if exact {
            let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rng.random::<f64>() * bound >= f.abs() {
                continue;
            }
        }
        let weight = match mode {
            SamplingMode::Uniform => f,
            SamplingMode::Importance if table.absolute => {
                let s = if exact { f } else { table.integrals[k] };
                if s < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            SamplingMode::Importance => 1.0,
        };
        return Event { point, weight, simplex: id };
    }
}

/// Speedup of table-based generation over direct model evaluation:
/// `n·t_model / (t_pipeline + n·t_mc)`. Times must be positive.
pub fn speedup_estimate(n_events: f64, t_model_per_event: f64, t_pipeline: f64, t_mc_per_event: f64) -> f64 {
    n_events * t_model_per_event / (t_pipeline + n_events * t_mc_per_event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::INSIDE_TOL;
    use crate::mesh::kuhn_triangulate;
    use crate::model::{sample_to_grid, AnalyticModel, GridImage, GridSpec, ModelOracle};
    use approx::assert_relative_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn line(values: &[f64]) -> Tessellation {
        let g = GridImage::new(vec![values.len()], vec![0.0], vec![1.0], values.to_vec(), None).unwrap();
        kuhn_triangulate(&g).unwrap()
    }

    fn model_mesh(model: &dyn ModelOracle, sizes: &[usize]) -> Tessellation {
        let spec = GridSpec::new(sizes.to_vec(), model.domain().clone()).unwrap();
        kuhn_triangulate(&sample_to_grid(model, &spec, &WorkerPool::single()).unwrap()).unwrap()
    }

    fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
        let n: u64 = counts.iter().sum();
        let mut stat = 0.0;
        let mut dof = 0;
        for (&c, &p) in counts.iter().zip(probs) {
            if p > 0.0 {
                let e = p * n as f64;
                stat += (c as f64 - e).powi(2) / e;
                dof += 1;
            } else {
                assert_eq!(c, 0);
            }
        }
        1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat)
    }

    #[test]
    fn integral_examples() {
        let t = line(&[2.0, 2.0, 2.0]);
        assert_eq!(simplex_integral(&t, 0).unwrap(), 2.0);
        let g = GridImage::new(vec![2, 2, 2], vec![0.0; 3], vec![1.0; 3], vec![0.0; 8], None).unwrap();
        let t = kuhn_triangulate(&g).unwrap();
        assert_eq!(simplex_integral(&t, 0).unwrap(), 0.0);
        let tet = Tessellation::from_simplices(
            crate::model::DomainBox::unit(3),
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0, 1, 2, 3],
            1e-15,
        )
        .unwrap();
        assert_relative_eq!(simplex_integral(&tet, 0).unwrap(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn dead_simplex_integral_is_stale() {
        let mut t = line(&[1.0, 1.0]);
        t.insert_barycenter(0, 1.0).unwrap();
        assert!(matches!(simplex_integral(&t, 0), Err(McError::Mesh(MeshError::Stale(0)))));
    }

    #[test]
    fn cumulative_examples() {
        let t = line(&[1.0, 1.0, 5.0]);
        let c = build_cumulative(&t, DensityMode::Importance, false).unwrap();
        assert_eq!(c.integrals(), &[1.0, 3.0]);
        assert_eq!(c.cumulative(), &[0.25, 1.0]);
        assert_eq!(select_simplex(&c, 0.1).unwrap(), 0);
        assert_eq!(select_simplex(&c, 0.25).unwrap(), 1);
        assert_eq!(select_simplex(&c, 0.9999).unwrap(), 1);
        assert!(select_simplex(&c, 1.0).is_err());
        assert!(select_simplex(&c, -1e-9).is_err());

        let single = build_cumulative(&line(&[1.0, 3.0]), DensityMode::Importance, false).unwrap();
        assert_eq!(single.cumulative(), &[1.0]);

        let neg = line(&[-3.0, 1.0, 3.0]);
        assert_eq!(
            build_cumulative(&neg, DensityMode::Importance, false).unwrap_err(),
            McError::NegativeDensity { id: 0, integral: -1.0 }
        );
        let abs = build_cumulative(&neg, DensityMode::Importance, true).unwrap();
        assert_relative_eq!(abs.cumulative()[0], 1.0 / 3.0);
        assert_eq!(
            build_cumulative(&line(&[0.0, 0.0, 0.0]), DensityMode::Importance, false).unwrap_err(),
            McError::EmptyDensity
        );
        let vol = build_cumulative(&neg, DensityMode::Volume, false).unwrap();
        assert_eq!(vol.cumulative(), &[0.5, 1.0]);
    }

    #[test]
    fn zero_measure_simplices_are_never_selected() {
        let t = line(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let c = build_cumulative(&t, DensityMode::Importance, false).unwrap();
        let zero: Vec<usize> = (0..c.len()).filter(|&k| c.integrals()[k] == 0.0).collect();
        assert!(!zero.is_empty());
        for i in 0..10_000 {
            let k = c.select_index(i as f64 / 10_000.0).unwrap();
            assert!(!zero.contains(&k));
        }
    }

    #[test]
    fn affine_integral_matches_analytic() {
        let t = model_mesh(&AnalyticModel::affine(3), &[5, 4, 6]);
        let c = build_cumulative(&t, DensityMode::Importance, false).unwrap();
        // ∫ (1 + 2x − y + 3z) over the unit cube.
        assert_relative_eq!(c.total(), 3.0, max_relative = 1e-10);
    }

    #[test]
    fn selection_frequencies_within_four_sigma() {
        let values: Vec<f64> = (0..11).map(|i| 1.0 + (i * 7 % 5) as f64).collect();
        let c = build_cumulative(&line(&values), DensityMode::Importance, false).unwrap();
        assert_eq!(c.len(), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let mut counts = [0u64; 10];
        for _ in 0..n {
            counts[c.select_index(rng.random::<f64>()).unwrap()] += 1;
        }
        for (k, &count) in counts.iter().enumerate() {
            let p = c.integrals()[k] / c.total();
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - n as f64 * p).abs() < 4.0 * sigma, "{k}");
        }
    }

    #[test]
    fn constant_function_modes_agree_with_volume_fractions() {
        let t = model_mesh(&AnalyticModel::constant(2.5, 3), &[3, 2, 2]);
        let n = 1_000_000;
        let pool = WorkerPool::new(4);
        for mode in [SamplingMode::Uniform, SamplingMode::Importance] {
            let c = build_cumulative(&t, mode.table_mode(), false).unwrap();
            let ev = generate_events(&t, &c, n, mode, 17, EventOptions::default(), &pool).unwrap();
            let mut counts = vec![0u64; t.slot_count()];
            for e in &ev {
                counts[e.simplex] += 1;
            }
            for id in t.live_ids() {
                let p = t.volume(id) / t.total_volume();
                let sigma = (n as f64 * p * (1.0 - p)).sqrt();
                assert!((counts[id] as f64 - n as f64 * p).abs() < 3.0 * sigma, "{mode} {id}");
            }
        }
    }

    #[test]
    fn importance_counts_follow_integrals() {
        let m = AnalyticModel::imh_like();
        let t = model_mesh(&m, &[4, 4, 4]);
        let c = build_cumulative(&t, DensityMode::Importance, false).unwrap();
        let ev = generate_events(
            &t,
            &c,
            1_000_000,
            SamplingMode::Importance,
            3,
            EventOptions::default(),
            &WorkerPool::new(4),
        )
        .unwrap();
        let mut counts = vec![0u64; c.len()];
        for e in &ev {
            counts[e.simplex] += 1;
            assert_eq!(e.weight, 1.0);
        }
        let probs: Vec<f64> = c.integrals().iter().map(|i| i / c.total()).collect();
        assert!(chi_square_p(&counts, &probs) > 0.001);
    }

    #[test]
    fn events_are_deterministic_and_contained() {
        let m = AnalyticModel::reh_like();
        let t = model_mesh(&m, &[4, 4, 4]);
        let c = build_cumulative(&t, DensityMode::Importance, true).unwrap();
        let opts = EventOptions { exact_density: false, batch_size: 1000 };
        let a = generate_events(&t, &c, 10_500, SamplingMode::Importance, 8, opts, &WorkerPool::new(1)).unwrap();
        let b = generate_events(&t, &c, 10_500, SamplingMode::Importance, 8, opts, &WorkerPool::new(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10_500);
        assert!(a.iter().any(|e| e.weight == -1.0) && a.iter().any(|e| e.weight == 1.0));
        for e in &a {
            let w = geometry::barycentric_weights(&t.simplex_vertices(e.simplex), &e.point).unwrap();
            assert!(w.is_inside(INSIDE_TOL));
        }
    }

    #[test]
    fn uniform_estimator_matches_table_integral() {
        let m = AnalyticModel::imh_like();
        let t = model_mesh(&m, &[5, 5, 5]);
        let vol = build_cumulative(&t, DensityMode::Volume, false).unwrap();
        let imp = build_cumulative(&t, DensityMode::Importance, false).unwrap();
        let n = 200_000;
        let ev = generate_events(&t, &vol, n, SamplingMode::Uniform, 21, EventOptions::default(), &WorkerPool::new(4))
            .unwrap();
        let mean = ev.iter().map(|e| e.weight).sum::<f64>() / n as f64;
        let var = ev.iter().map(|e| (e.weight - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt() * t.domain().volume();
        let estimate = mean * t.domain().volume();
        assert!((estimate - imp.total()).abs() < 3.0 * se, "{estimate} vs {}", imp.total());
    }

    #[test]
    fn exact_density_follows_linear_interpolant() {
        // Density 2x on [0, 1]: mean 2/3, variance 1/18.
        let t = line(&[0.0, 1.0]);
        let c = build_cumulative(&t, DensityMode::Importance, false).unwrap();
        let n = 100_000;
        let opts = EventOptions { exact_density: true, ..EventOptions::default() };
        let ev = generate_events(&t, &c, n, SamplingMode::Importance, 4, opts, &WorkerPool::single()).unwrap();
        let mean = ev.iter().map(|e| e.point[0]).sum::<f64>() / n as f64;
        let se = (1.0 / 18.0 / n as f64).sqrt();
        assert!((mean - 2.0 / 3.0).abs() < 3.0 * se, "{mean}");
        let plain =
            generate_events(&t, &c, n, SamplingMode::Importance, 4, EventOptions::default(), &WorkerPool::single())
                .unwrap();
        let mean = plain.iter().map(|e| e.point[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * (1.0 / 12.0 / n as f64).sqrt());
    }

    #[test]
    fn misuse_is_rejected() {
        let mut t = line(&[1.0, 2.0, 3.0]);
        let vol = build_cumulative(&t, DensityMode::Volume, false).unwrap();
        let pool = WorkerPool::single();
        assert!(generate_events(&t, &vol, 0, SamplingMode::Uniform, 1, EventOptions::default(), &pool)
            .unwrap()
            .is_empty());
        assert!(matches!(
            generate_events(&t, &vol, 5, SamplingMode::Importance, 1, EventOptions::default(), &pool),
            Err(McError::ModeMismatch { .. })
        ));
        let exact = EventOptions { exact_density: true, ..EventOptions::default() };
        assert!(generate_events(&t, &vol, 5, SamplingMode::Uniform, 1, exact, &pool).is_err());
        t.insert_barycenter(0, 1.5).unwrap();
        assert!(matches!(
            generate_events(&t, &vol, 5, SamplingMode::Uniform, 1, EventOptions::default(), &pool),
            Err(McError::Stale(_))
        ));
    }

    #[test]
    fn speedup_examples() {
        let s = speedup_estimate(1e7, 50_997.0 / 1e7, 2_142.0, 9.2 / 1e7);
        assert!((s - 23.7).abs() < 0.1, "{s}");
        let s = speedup_estimate(1e10, 50_997.0 / 1e7, 2_142.0, 9.2 / 1e7);
        assert!((s - 4_496.0).abs() < 10.0, "{s}");
        let s = speedup_estimate(1e10, 2_694.0 / 1e7, 309.0, 2.4 / 1e7);
        assert!((s - 994.0).abs() < 5.0, "{s}");
    }
}
