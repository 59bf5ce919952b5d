use std::collections::HashMap;
use std::time::{Duration, Instant};

use super::splitting::{apply_barycenters, apply_bisections, distinct_edges, plan_edges, SplitCount};
use super::{ErrorMetric, RefineError, Result, SplitRule};
use crate::mesh::{Edge, Tessellation};
use crate::model::{CachedOracle, EvalTiming, ModelError, ModelOracle};
use crate::pool::WorkerPool;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub metric: ErrorMetric,
    pub max_iterations: usize,
    pub split_rule: SplitRule,
    /// Refinement stops after the iteration that brings the vertex count to
    /// this limit.
    pub max_vertices: usize,
}

pub const DEFAULT_MAX_VERTICES: usize = 2_000_000;

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            metric: ErrorMetric::default(),
            max_iterations: 50,
            split_rule: SplitRule::default(),
            max_vertices: DEFAULT_MAX_VERTICES,
        }
    }
}

/// Wall time per pipeline step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTimings {
    pub meshing_io: Duration,
    pub meshing: Duration,
    pub kinematics: Duration,
    pub model: Duration,
    pub model_io: Duration,
    pub update_weights: Duration,
    /// Includes the linear interpolation at each probe.
    pub compute_error: Duration,
}

impl StepTimings {
    pub const NAMES: [&'static str; 7] =
        ["Meshing IO", "Meshing", "Kinematics", "Model", "Model IO", "Update Weights", "Compute Error"];

    pub fn as_array(&self) -> [Duration; 7] {
        [
            self.meshing_io,
            self.meshing,
            self.kinematics,
            self.model,
            self.model_io,
            self.update_weights,
            self.compute_error,
        ]
    }

    pub fn total(&self) -> Duration {
        self.as_array().iter().sum()
    }

    fn add_eval(&mut self, e: EvalTiming) {
        self.model += e.model;
        self.model_io += e.model_io;
    }
}

/// Statistics of one check-and-split iteration. Counts and errors describe
/// the mesh as checked; `vertices_added` is the growth from the split.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub vertices: usize,
    pub simplices: usize,
    pub checked: usize,
    pub violators: usize,
    pub vertices_added: usize,
    pub degenerate_splits: usize,
    /// Cumulative oracle calls at the end of the iteration.
    pub oracle_calls: u64,
    pub mean_err: f64,
    pub rms_err: f64,
    pub max_err: f64,
    /// Fraction of live simplices that are satisfied after the check.
    pub coverage: f64,
    pub timings: StepTimings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineStatus {
    Converged,
    Partial { remaining: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementState {
    pub metric: ErrorMetric,
    pub split_rule: SplitRule,
    /// Per simplex slot: error met the threshold.
    pub satisfied: Vec<bool>,
    /// Per simplex slot: last measured barycenter error, NaN if never checked.
    pub errors: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    /// Simplex ids checked in each iteration.
    pub checked: Vec<Vec<usize>>,
    pub status: RefineStatus,
    pub initial_vertices: usize,
    /// Distinct points sent to the oracle.
    pub oracle_calls: u64,
    /// Point lookups including cache hits.
    pub oracle_requests: u64,
    /// Checks of simplices that were already satisfied; zero by construction.
    pub satisfied_rechecks: u64,
}

impl RefinementState {
    fn new(config: &RefineConfig, t: &Tessellation) -> Self {
        Self {
            metric: config.metric,
            split_rule: config.split_rule,
            satisfied: vec![false; t.slot_count()],
            errors: vec![f64::NAN; t.slot_count()],
            iterations: Vec::new(),
            checked: Vec::new(),
            status: RefineStatus::Partial { remaining: t.live_count() },
            initial_vertices: t.vertex_count(),
            oracle_calls: 0,
            oracle_requests: 0,
            satisfied_rechecks: 0,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == RefineStatus::Converged
    }

    fn grow(&mut self, slots: usize) {
        self.satisfied.resize(slots, false);
        self.errors.resize(slots, f64::NAN);
    }
}

struct Driver<'a, 'p> {
    cache: CachedOracle<'a>,
    pool: &'p WorkerPool,
}

/// Refines `t` against `oracle` until every live simplex's barycenter error
/// meets the metric threshold, `max_iterations` check-and-split rounds have
/// run or the vertex budget is spent. Vertex values are first recomputed
/// with the oracle. Satisfied simplices are never checked again.
pub fn iterate_adaptive(
    oracle: &dyn ModelOracle,
    t: Tessellation,
    config: &RefineConfig,
    pool: &WorkerPool,
) -> Result<(Tessellation, RefinementState)> {
    if oracle.dimension() != t.dim() {
        return Err(RefineError::InvalidInput(format!(
            "{}-D oracle for a {}-D tessellation",
            oracle.dimension(),
            t.dim()
        )));
    }
    let mut t = t;
    let mut state = RefinementState::new(config, &t);
    let mut driver = Driver { cache: CachedOracle::new(oracle), pool };
    let mut pending = StepTimings::default();

    let clock = Instant::now();
    let points: Vec<Vec<f64>> = (0..t.vertex_count()).map(|v| t.vertex(v).to_vec()).collect();
    pending.kinematics += clock.elapsed();
    let (values, timing) = match driver.cache.evaluate(pool, &points) {
        Ok(r) => r,
        Err(e) => return Err(abort(e, t, state, &driver)),
    };
    pending.add_eval(timing);
    let clock = Instant::now();
    t.set_values(values)?;
    pending.update_weights += clock.elapsed();

    for iteration in 0..config.max_iterations {
        match run_iteration(&mut driver, &mut t, &mut state, config, iteration, pending) {
            Ok(done) => {
                if done {
                    state.status = RefineStatus::Converged;
                    break;
                }
                if t.vertex_count() >= config.max_vertices {
                    break;
                }
            }
            Err(RefineError::Model(e)) => return Err(abort(e, t, state, &driver)),
            Err(e) => return Err(e),
        }
        pending = StepTimings::default();
    }
    if !state.converged() {
        let remaining = t.live_ids().filter(|&id| !state.satisfied[id]).count();
        state.status = RefineStatus::Partial { remaining };
    }
    state.oracle_calls = driver.cache.calls();
    state.oracle_requests = driver.cache.requests();
    Ok((t, state))
}

fn abort(source: ModelError, t: Tessellation, mut state: RefinementState, driver: &Driver) -> RefineError {
    state.oracle_calls = driver.cache.calls();
    state.oracle_requests = driver.cache.requests();
    let remaining = t.live_ids().filter(|&id| !state.satisfied.get(id).copied().unwrap_or(false)).count();
    state.status = RefineStatus::Partial { remaining };
    RefineError::Oracle { source, partial: Box::new((t, state)) }
}

/// One check-and-split round; returns true when no violators remain.
fn run_iteration(
    driver: &mut Driver,
    t: &mut Tessellation,
    state: &mut RefinementState,
    config: &RefineConfig,
    iteration: usize,
    mut timings: StepTimings,
) -> Result<bool> {
    let pool = driver.pool;
    let metric = config.metric;
    let vertices = t.vertex_count();
    let simplices = t.live_count();
    let ids: Vec<usize> = t.live_ids().filter(|&id| !state.satisfied[id]).collect();

    let clock = Instant::now();
    let probes: Vec<Vec<f64>> = pool.map(&ids, |&id| t.barycenter(id));
    timings.kinematics += clock.elapsed();

    let (model_values, timing) = driver.cache.evaluate(pool, &probes)?;
    timings.add_eval(timing);

    let clock = Instant::now();
    let pairs: Vec<(usize, f64)> = ids.iter().copied().zip(model_values.iter().copied()).collect();
    let errors: Vec<f64> = pool.map(&pairs, |&(id, f)| metric.error(f, t.barycenter_value(id)));
    timings.compute_error += clock.elapsed();

    let clock = Instant::now();
    let mut violators = Vec::new();
    for (&(id, f), &err) in pairs.iter().zip(&errors) {
        if state.satisfied[id] {
            state.satisfied_rechecks += 1;
        }
        state.errors[id] = err;
        if metric.accepts(err) {
            state.satisfied[id] = true;
        } else {
            violators.push((id, f));
        }
    }
    let (mut sum, mut sum_sq, mut max) = (0.0, 0.0, 0.0f64);
    for id in t.live_ids() {
        let e = state.errors[id];
        sum += e;
        sum_sq += e * e;
        max = max.max(e);
    }
    timings.update_weights += clock.elapsed();

    let mut split = SplitCount::default();
    if !violators.is_empty() {
        split = match config.split_rule {
            SplitRule::Barycenter => {
                let clock = Instant::now();
                let s = apply_barycenters(t, &violators)?;
                timings.meshing += clock.elapsed();
                s
            }
            SplitRule::MidpointError => {
                let clock = Instant::now();
                let starts: Vec<usize> = violators.iter().map(|v| v.0).collect();
                let edges = distinct_edges(t, &starts);
                let mids: Vec<Vec<f64>> = pool.map(&edges, |e| t.midpoint(*e));
                timings.kinematics += clock.elapsed();
                let (values, timing) = driver.cache.evaluate(pool, &mids)?;
                timings.add_eval(timing);
                let clock = Instant::now();
                let at_mid: HashMap<Edge, f64> = edges.into_iter().zip(values).collect();
                let plan = plan_edges(t, &starts, SplitRule::MidpointError, |e| {
                    metric.error(at_mid[&e], 0.5 * (t.value(e.a) + t.value(e.b)))
                });
                let values: Vec<f64> = plan.iter().map(|(_, e)| at_mid[e]).collect();
                let s = apply_bisections(t, &plan, &values)?;
                timings.meshing += clock.elapsed();
                s
            }
            rule => {
                let clock = Instant::now();
                let starts: Vec<usize> = violators.iter().map(|v| v.0).collect();
                let plan = plan_edges(t, &starts, rule, |e| metric.error(t.value(e.a), t.value(e.b)));
                let mids: Vec<Vec<f64>> = plan.iter().map(|(_, e)| t.midpoint(*e)).collect();
                timings.kinematics += clock.elapsed();
                let (values, timing) = driver.cache.evaluate(pool, &mids)?;
                timings.add_eval(timing);
                let clock = Instant::now();
                let s = apply_bisections(t, &plan, &values)?;
                timings.meshing += clock.elapsed();
                s
            }
        };
        let clock = Instant::now();
        state.grow(t.slot_count());
        timings.update_weights += clock.elapsed();
    }

    state.checked.push(ids);
    state.iterations.push(IterationRecord {
        iteration,
        vertices,
        simplices,
        checked: pairs.len(),
        violators: violators.len(),
        vertices_added: split.vertices,
        degenerate_splits: split.degenerate,
        oracle_calls: driver.cache.calls(),
        mean_err: sum / simplices as f64,
        rms_err: (sum_sq / simplices as f64).sqrt(),
        max_err: max,
        coverage: (simplices - violators.len()) as f64 / simplices as f64,
        timings,
    });
    Ok(violators.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::kuhn_triangulate;
    use crate::model::{sample_to_grid, AnalyticModel, DomainBox, GridSpec};
    use crate::refine::MetricKind;

    fn mesh(model: &dyn ModelOracle, n: usize) -> Tessellation {
        let d = model.dimension();
        let spec = GridSpec::new(vec![n; d], model.domain().clone()).unwrap();
        kuhn_triangulate(&sample_to_grid(model, &spec, &WorkerPool::single()).unwrap()).unwrap()
    }

    struct Failing {
        domain: DomainBox,
        after: std::sync::atomic::AtomicUsize,
    }

    impl ModelOracle for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn domain(&self) -> &DomainBox {
            &self.domain
        }
        fn evaluate(&self, p: &[f64]) -> std::result::Result<f64, ModelError> {
            use std::sync::atomic::Ordering;
            if self.after.fetch_sub(1, Ordering::SeqCst) == 0 {
                return Err(ModelError::Evaluation("boom".into()));
            }
            Ok(p[0] * p[0])
        }
    }

    #[test]
    fn affine_converges_immediately() {
        let m = AnalyticModel::affine(3);
        let t = mesh(&m, 3);
        let (out, state) = iterate_adaptive(&m, t.clone(), &RefineConfig::default(), &WorkerPool::single()).unwrap();
        assert!(state.converged());
        assert_eq!(state.iterations.len(), 1);
        assert_eq!(state.iterations[0].vertices_added, 0);
        assert_eq!(out.live_count(), t.live_count());
        assert!(state.iterations[0].max_err < 1e-12);
    }

    #[test]
    fn huge_threshold_satisfies_everything_at_once() {
        let m = AnalyticModel::imh_like();
        let t = mesh(&m, 3);
        let config =
            RefineConfig { metric: ErrorMetric::new(MetricKind::Absolute, 1e9).unwrap(), ..RefineConfig::default() };
        let (out, state) = iterate_adaptive(&m, t, &config, &WorkerPool::single()).unwrap();
        assert!(state.converged());
        assert!(out.live_ids().all(|id| state.satisfied[id]));
        assert_eq!(state.oracle_calls, 27 + 48);
    }

    #[test]
    fn zero_iterations_is_partial() {
        let m = AnalyticModel::imh_like();
        let t = mesh(&m, 3);
        let config = RefineConfig { max_iterations: 0, ..RefineConfig::default() };
        let (_, state) = iterate_adaptive(&m, t, &config, &WorkerPool::single()).unwrap();
        assert_eq!(state.status, RefineStatus::Partial { remaining: 48 });
        assert!(state.iterations.is_empty());
    }

    #[test]
    fn satisfied_simplices_are_never_rechecked() {
        let m = AnalyticModel::imh_like();
        for rule in [SplitRule::MidpointError, SplitRule::SteepestEdge, SplitRule::LongestEdge, SplitRule::Barycenter] {
            let config = RefineConfig { max_iterations: 6, split_rule: rule, ..RefineConfig::default() };
            let (t, state) = iterate_adaptive(&m, mesh(&m, 5), &config, &WorkerPool::single()).unwrap();
            assert_eq!(state.satisfied_rechecks, 0);
            let mut seen = std::collections::HashSet::new();
            for ids in &state.checked {
                for id in ids {
                    // A simplex is checked again only while it keeps violating,
                    // which can happen only when its split was degenerate.
                    if !seen.insert(*id) {
                        assert!(!state.satisfied[*id] || t.is_alive(*id));
                    }
                }
            }
            t.check_conformity().unwrap();
        }
    }

    #[test]
    fn calls_equal_vertices_plus_distinct_probes() {
        let m = AnalyticModel::imh_like();
        let config = RefineConfig { max_iterations: 8, split_rule: SplitRule::SteepestEdge, ..RefineConfig::default() };
        let (t, state) = iterate_adaptive(&m, mesh(&m, 5), &config, &WorkerPool::single()).unwrap();
        let probed: usize = state.checked.iter().map(Vec::len).sum();
        let added: usize = state.iterations.iter().map(|r| r.vertices_added).sum();
        assert_eq!(t.vertex_count(), 125 + added);
        assert!(state.oracle_calls <= (t.vertex_count() + probed) as u64);
        assert_eq!(state.oracle_calls, state.iterations.last().unwrap().oracle_calls);
    }

    #[test]
    fn midpoint_rule_calls_are_bounded_by_violator_edges() {
        let m = AnalyticModel::imh_like();
        let config = RefineConfig { max_iterations: 8, ..RefineConfig::default() };
        let (_, state) = iterate_adaptive(&m, mesh(&m, 5), &config, &WorkerPool::single()).unwrap();
        let probed: usize = state.checked.iter().map(Vec::len).sum();
        let violators: usize = state.iterations.iter().map(|r| r.violators).sum();
        assert!(state.oracle_calls <= (125 + probed + 6 * violators) as u64);
    }

    #[test]
    fn vertex_budget_stops_refinement() {
        let m = AnalyticModel::imh_like();
        let config = RefineConfig { max_vertices: 200, ..RefineConfig::default() };
        let (t, state) = iterate_adaptive(&m, mesh(&m, 5), &config, &WorkerPool::single()).unwrap();
        assert!(matches!(state.status, RefineStatus::Partial { remaining } if remaining > 0));
        assert!(t.vertex_count() >= 200);
        let before_last = state.iterations.last().unwrap().vertices;
        assert!(before_last < 200);
    }

    #[test]
    fn imh_like_converges_with_midpoint_rule() {
        let m = AnalyticModel::imh_like();
        let (t, state) = iterate_adaptive(&m, mesh(&m, 5), &RefineConfig::default(), &WorkerPool::single()).unwrap();
        assert!(state.converged(), "{:?}", state.status);
        assert!(state.iterations.len() <= 30);
        assert!(t.live_ids().all(|id| state.errors[id] <= 0.05));
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let m = AnalyticModel::reh_like();
        let config = RefineConfig { max_iterations: 5, ..RefineConfig::default() };
        let (a, sa) = iterate_adaptive(&m, mesh(&m, 4), &config, &WorkerPool::new(1)).unwrap();
        let (b, sb) = iterate_adaptive(&m, mesh(&m, 4), &config, &WorkerPool::new(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.checked, sb.checked);
        assert_eq!(
            sa.errors.iter().map(|e| e.to_bits()).collect::<Vec<_>>(),
            sb.errors.iter().map(|e| e.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn oracle_failure_keeps_partial_state() {
        let m = Failing { domain: DomainBox::unit(2), after: std::sync::atomic::AtomicUsize::new(17) };
        let t = {
            let ok = AnalyticModel::affine(2);
            mesh(&ok, 3)
        };
        let config =
            RefineConfig { metric: ErrorMetric::new(MetricKind::Absolute, 1e-6).unwrap(), ..RefineConfig::default() };
        match iterate_adaptive(&m, t, &config, &WorkerPool::single()) {
            Err(RefineError::Oracle { partial, .. }) => {
                let (mesh, state) = *partial;
                // Failure while evaluating the first round's edge midpoints.
                assert!(state.iterations.is_empty());
                assert_eq!(mesh.live_count(), 8);
                assert!(state.errors[..8].iter().all(|e| e.is_finite()));
                assert!(matches!(state.status, RefineStatus::Partial { .. }));
            }
            other => panic!("expected oracle failure, got {other:?}"),
        }
    }
}
