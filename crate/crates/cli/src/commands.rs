use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slut_core::io::{self, LookupTable, LutMeta};
use slut_core::mesh::{kuhn_triangulate, Tessellation};
use slut_core::model::{analytic_model, sample_to_grid, DomainBox, GridSpec, ModelOracle, WithLatency};
use slut_core::montecarlo::{build_cumulative, generate_events, speedup_estimate, EventOptions, SamplingMode};
use slut_core::pool::WorkerPool;
use slut_core::refine::{
    adapt_to_sizing, error_stats, iterate_adaptive, uniform_baselines, ErrorMetric, Probes, RefineConfig, RefineError,
    RefineStatus, RefinementState, SizingFunction, SizingKind, SplitRule,
};

use crate::{Common, MetricArgs, ModelArgs, UsageError};

pub enum Outcome {
    Done,
    Partial,
}

pub enum Input {
    Lut(PathBuf),
    Grid(PathBuf),
    Sizes(String),
}

/// Run record written next to the outputs of every command.
struct Manifest {
    command: &'static str,
    started: Instant,
    lines: Vec<(String, String)>,
}

impl Manifest {
    fn new(command: &'static str, config: &impl std::fmt::Debug) -> Self {
        let mut m = Self { command, started: Instant::now(), lines: Vec::new() };
        m.set("command", command);
        m.set("config", format!("{config:?}"));
        m
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn write(mut self, dir: &Path) -> Result<()> {
        self.set("wall_seconds", format!("{:?}", self.started.elapsed().as_secs_f64()));
        let mut text = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(text, "{k}={v}");
        }
        let path = dir.join(format!("{}-manifest.txt", self.command));
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn pool(common: &Common) -> Result<WorkerPool> {
    let workers = match common.workers {
        Some(0) => return Err(usage("--workers must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(WorkerPool::new(workers))
}

fn out_dir(common: &Common) -> Result<&Path> {
    std::fs::create_dir_all(&common.out_dir)
        .with_context(|| format!("creating output directory {}", common.out_dir.display()))?;
    Ok(&common.out_dir)
}

fn oracle(args: &ModelArgs) -> Result<Box<dyn ModelOracle>> {
    let model = analytic_model(&args.model).map_err(|e| usage(e.to_string()))?;
    Ok(if args.latency_us > 0 {
        Box::new(WithLatency::new(model, Duration::from_micros(args.latency_us)))
    } else {
        Box::new(model)
    })
}

fn metric(args: &MetricArgs) -> Result<ErrorMetric> {
    ErrorMetric::new(args.metric, args.threshold).map_err(|e| usage(e.to_string()))
}

fn parse_sizes(s: &str, dim: usize) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = s
        .split(',')
        .map(|w| w.trim().parse().map_err(|_| usage(format!("bad grid size `{w}` in `{s}`"))))
        .collect::<Result<_>>()?;
    match sizes.len() {
        1 => Ok(vec![sizes[0]; dim]),
        n if n == dim => Ok(sizes),
        n => Err(usage(format!("{n} grid sizes for a {dim}-dimensional model"))),
    }
}

fn parse_box(s: &str) -> Result<DomainBox> {
    let mut mins = Vec::new();
    let mut maxs = Vec::new();
    for part in s.split(',') {
        let (lo, hi) = part.split_once(':').ok_or_else(|| usage(format!("bad box axis `{part}`, expected lo:hi")))?;
        let num = |w: &str| w.trim().parse::<f64>().map_err(|_| usage(format!("bad box bound `{w}`")));
        mins.push(num(lo)?);
        maxs.push(num(hi)?);
    }
    DomainBox::new(mins, maxs).map_err(|e| usage(e.to_string()))
}

fn fresh_mesh(oracle: &dyn ModelOracle, sizes: &[usize], pool: &WorkerPool) -> Result<Tessellation> {
    let spec = GridSpec::new(sizes.to_vec(), oracle.domain().clone()).map_err(|e| usage(e.to_string()))?;
    Ok(kuhn_triangulate(&sample_to_grid(oracle, &spec, pool)?)?)
}

pub fn sample(
    common: &Common,
    model: &ModelArgs,
    sizes: &str,
    bounds: Option<String>,
    out: Option<PathBuf>,
) -> Result<Outcome> {
    let mut manifest = Manifest::new("sample", &(common, model, sizes, &bounds, &out));
    let oracle = oracle(model)?;
    let sizes = parse_sizes(sizes, oracle.dimension())?;
    let bounds = match bounds {
        Some(b) => parse_box(&b)?,
        None => oracle.domain().clone(),
    };
    let spec = GridSpec::new(sizes, bounds).map_err(|e| usage(e.to_string()))?;
    let pool = pool(common)?;
    let dir = out_dir(common)?;
    let grid = sample_to_grid(oracle.as_ref(), &spec, &pool)?;
    let path = out.unwrap_or_else(|| dir.join("grid.nrrd"));
    io::write_nrrd(&grid, &path)?;
    manifest.set("oracle_calls", grid.len());
    manifest.set("output", path.display());
    manifest.write(dir)?;
    Ok(Outcome::Done)
}

pub fn tessellate(
    common: &Common,
    grid_path: &Path,
    sizing: Option<SizingKind>,
    weight_limit: Option<f64>,
    max_passes: usize,
    split_rule: SplitRule,
    vtk: bool,
) -> Result<Outcome> {
    let mut manifest =
        Manifest::new("tessellate", &(common, grid_path, sizing, weight_limit, max_passes, split_rule, vtk));
    let pool = pool(common)?;
    let dir = out_dir(common)?;
    let grid = io::read_nrrd(grid_path)?;
    let mut mesh = kuhn_triangulate(&grid)?;
    let mut build = BTreeMap::new();
    if let Some(kind) = sizing {
        let limit = weight_limit.unwrap_or_else(|| kind.default_weight_limit());
        let sf = SizingFunction::new(kind, limit, &grid).map_err(|e| usage(e.to_string()))?;
        let (t, report) = adapt_to_sizing(mesh, &sf, max_passes, split_rule, &pool)?;
        mesh = t.compact();
        build.insert("sizing".into(), kind.to_string());
        build.insert("weight_limit".into(), format!("{limit:?}"));
        build.insert("sizing_passes".into(), report.passes.to_string());
        build.insert("sizing_complete".into(), report.complete.to_string());
        manifest.set("sizing_passes", report.passes);
        manifest.set("sizing_vertices_added", report.vertices_added);
    }
    let lut = LookupTable {
        mesh,
        meta: LutMeta {
            oracle: format!("grid:{}", grid_path.display()),
            labels: grid.labels().map(<[String]>::to_vec),
            metric: None,
            build,
        },
        table: None,
    };
    io::write_lut(&lut, dir.join("mesh.lut"))?;
    if vtk {
        io::write_vtk_legacy(&lut.mesh, dir.join("mesh.vtk"))?;
    }
    manifest.set("vertices", lut.mesh.vertex_count());
    manifest.set("simplices", lut.mesh.live_count());
    manifest.set("oracle_calls", 0);
    manifest.write(dir)?;
    Ok(Outcome::Done)
}

fn refine_meta(oracle: &dyn ModelOracle, state: &RefinementState) -> LutMeta {
    let mut build = BTreeMap::new();
    build.insert("iterations".into(), state.iterations.len().to_string());
    build.insert("oracle_calls".into(), state.oracle_calls.to_string());
    build.insert("initial_vertices".into(), state.initial_vertices.to_string());
    build.insert("split_rule".into(), state.split_rule.to_string());
    build.insert(
        "status".into(),
        match state.status {
            RefineStatus::Converged => "converged".into(),
            RefineStatus::Partial { remaining } => format!("partial:{remaining}"),
        },
    );
    LutMeta { oracle: oracle.name().to_string(), labels: None, metric: Some(state.metric), build }
}

/// Stopping limits of a refinement.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_iter: usize,
    pub max_vertices: usize,
}

pub fn refine(
    common: &Common,
    model: &ModelArgs,
    metric_args: &MetricArgs,
    input: Input,
    limits: Limits,
    split_rule: SplitRule,
    vtk: bool,
) -> Result<Outcome> {
    let input_desc = match &input {
        Input::Lut(p) => format!("lut:{}", p.display()),
        Input::Grid(p) => format!("grid:{}", p.display()),
        Input::Sizes(s) => format!("sizes:{s}"),
    };
    let mut manifest = Manifest::new("refine", &(common, model, metric_args, &input_desc, limits, split_rule, vtk));
    let oracle = oracle(model)?;
    let config = RefineConfig {
        metric: metric(metric_args)?,
        max_iterations: limits.max_iter,
        split_rule,
        max_vertices: limits.max_vertices,
    };
    let sizes = match &input {
        Input::Sizes(s) => Some(parse_sizes(s, oracle.dimension())?),
        _ => None,
    };
    let pool = pool(common)?;
    let dir = out_dir(common)?;
    let (mesh, labels) = match input {
        Input::Lut(p) => {
            let lut = io::read_lut(&p)?;
            (lut.mesh, lut.meta.labels)
        }
        Input::Grid(p) => {
            let grid = io::read_nrrd(&p)?;
            (kuhn_triangulate(&grid)?, grid.labels().map(<[String]>::to_vec))
        }
        Input::Sizes(_) => (fresh_mesh(oracle.as_ref(), sizes.as_deref().unwrap_or_default(), &pool)?, None),
    };
    let (mesh, state, failure) = match iterate_adaptive(oracle.as_ref(), mesh, &config, &pool) {
        Ok((t, s)) => (t, s, None),
        Err(RefineError::Oracle { source, partial }) => {
            let (t, s) = *partial;
            (t, s, Some(source))
        }
        Err(e) => return Err(e.into()),
    };
    let mut meta = refine_meta(oracle.as_ref(), &state);
    meta.labels = labels;
    let lut = LookupTable { mesh: mesh.compact(), meta, table: None };
    io::write_lut(&lut, dir.join("table.lut"))?;
    io::write_report_csv(dir.join("report.csv"), &state.iterations)?;
    if vtk {
        io::write_vtk_legacy(&lut.mesh, dir.join("table.vtk"))?;
    }
    manifest.set("iterations", state.iterations.len());
    manifest.set("vertices", lut.mesh.vertex_count());
    manifest.set("simplices", lut.mesh.live_count());
    manifest.set("oracle_calls", state.oracle_calls);
    manifest.set("oracle_requests", state.oracle_requests);
    manifest.set("satisfied_rechecks", state.satisfied_rechecks);
    manifest.set("status", lut.meta.build["status"].clone());
    let totals = state.iterations.iter().fold([Duration::ZERO; 7], |mut acc, r| {
        for (a, d) in acc.iter_mut().zip(r.timings.as_array()) {
            *a += d;
        }
        acc
    });
    for (name, d) in slut_core::refine::StepTimings::NAMES.iter().zip(totals) {
        manifest.set(&format!("seconds.{}", name.to_lowercase().replace(' ', "_")), format!("{:?}", d.as_secs_f64()));
    }
    manifest.write(dir)?;
    if let Some(source) = failure {
        bail!("model evaluation failed, partial table written: {source}");
    }
    Ok(if state.converged() { Outcome::Done } else { Outcome::Partial })
}

pub fn stats(
    common: &Common,
    model: &ModelArgs,
    metric_args: &MetricArgs,
    lut: &Path,
    probes: Probes,
) -> Result<Outcome> {
    let mut manifest = Manifest::new("stats", &(common, model, metric_args, lut, probes));
    let oracle = oracle(model)?;
    let metric = metric(metric_args)?;
    let pool = pool(common)?;
    let dir = out_dir(common)?;
    let table = io::read_lut(lut)?;
    let s = error_stats(oracle.as_ref(), &table.mesh, &metric, probes, &pool)?;
    io::write_stats_csv(dir.join("stats.csv"), &s)?;
    io::write_histogram_csv(dir.join("histogram.csv"), &s.histogram)?;
    manifest.set("oracle_calls", s.probes);
    manifest.set("mean_err", format!("{:?}", s.mean));
    manifest.set("max_err", format!("{:?}", s.max));
    manifest.write(dir)?;
    Ok(Outcome::Done)
}

pub fn baseline(common: &Common, model: &ModelArgs, metric_args: &MetricArgs, resolutions: &str) -> Result<Outcome> {
    let mut manifest = Manifest::new("baseline", &(common, model, metric_args, resolutions));
    let oracle = oracle(model)?;
    let metric = metric(metric_args)?;
    let res: Vec<Vec<usize>> =
        resolutions.split(';').map(|r| parse_sizes(r, oracle.dimension())).collect::<Result<_>>()?;
    let pool = pool(common)?;
    let dir = out_dir(common)?;
    let rows = uniform_baselines(oracle.as_ref(), &res, &metric, &pool)?;
    io::write_baseline_csv(dir.join("baseline.csv"), &rows)?;
    manifest.set("oracle_calls", rows.iter().step_by(2).map(|r| r.oracle_calls).sum::<u64>());
    manifest.write(dir)?;
    Ok(Outcome::Done)
}

pub fn events(
    common: &Common,
    lut_path: &Path,
    n: usize,
    mode: SamplingMode,
    exact_density: bool,
    abs_density: bool,
    batch_size: usize,
) -> Result<Outcome> {
    let mut manifest = Manifest::new("events", &(common, lut_path, n, mode, exact_density, abs_density, batch_size));
    if mode == SamplingMode::Uniform && (exact_density || abs_density) {
        return Err(usage("--exact-density and --abs-density apply to importance sampling only"));
    }
    if batch_size == 0 {
        return Err(usage("--batch-size must be positive"));
    }
    let pool = pool(common)?;
    let dir = out_dir(common)?;
    let lut = io::read_lut(lut_path)?;
    let table = match lut.table {
        Some(t) if t.mode() == mode.table_mode() && t.absolute() == abs_density => t,
        _ => build_cumulative(&lut.mesh, mode.table_mode(), abs_density)?,
    };
    let options = EventOptions { exact_density, batch_size };
    let events = generate_events(&lut.mesh, &table, n, mode, common.seed, options, &pool)?;
    io::write_events_csv(dir.join("events.csv"), lut.mesh.dim(), &events)?;
    manifest.set("events", events.len());
    manifest.set("oracle_calls", 0);
    manifest.write(dir)?;
    Ok(Outcome::Done)
}

#[allow(clippy::too_many_arguments)]
pub fn bench(
    common: &Common,
    model: &ModelArgs,
    metric_args: &MetricArgs,
    sizes: &str,
    max_iter: usize,
    n: usize,
    model_samples: usize,
    targets: &str,
) -> Result<Outcome> {
    let mut manifest =
        Manifest::new("bench", &(common, model, metric_args, sizes, max_iter, n, model_samples, targets));
    let oracle = oracle(model)?;
    let config = RefineConfig { metric: metric(metric_args)?, max_iterations: max_iter, ..Default::default() };
    let sizes = parse_sizes(sizes, oracle.dimension())?;
    let targets: Vec<f64> = targets
        .split(',')
        .map(|w| w.trim().parse::<f64>().map_err(|_| usage(format!("bad target event count `{w}`"))))
        .collect::<Result<_>>()?;
    if n == 0 || model_samples == 0 || targets.iter().any(|t| t.is_nan() || *t <= 0.0) {
        return Err(usage("event counts and model samples must be positive"));
    }
    let pool = pool(common)?;
    let dir = out_dir(common)?;

    let start = Instant::now();
    let mesh = fresh_mesh(oracle.as_ref(), &sizes, &pool)?;
    let (mesh, state) = iterate_adaptive(oracle.as_ref(), mesh, &config, &pool)?;
    let mesh = mesh.compact();
    let table = build_cumulative(&mesh, SamplingMode::Importance.table_mode(), false)?;
    let t_pipeline = start.elapsed().as_secs_f64();

    let dom = oracle.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let points: Vec<Vec<f64>> = (0..model_samples)
        .map(|_| (0..dom.dim()).map(|a| dom.mins[a] + rng.random::<f64>() * dom.extent(a)).collect())
        .collect();
    let start = Instant::now();
    oracle.evaluate_batch(&pool, &points)?;
    let t_model = start.elapsed().as_secs_f64() / model_samples as f64;

    let start = Instant::now();
    generate_events(&mesh, &table, n, SamplingMode::Importance, common.seed, EventOptions::default(), &pool)?;
    let t_mc = start.elapsed().as_secs_f64() / n as f64;

    let mut csv = String::from("kind,n_events,t_model_per_event,t_pipeline,t_mc_per_event,speedup\n");
    let mut row = |kind: &str, ne: f64| {
        let s = speedup_estimate(ne, t_model, t_pipeline, t_mc);
        let _ = writeln!(csv, "{kind},{ne:?},{t_model:?},{t_pipeline:?},{t_mc:?},{s:?}");
    };
    row("measured", n as f64);
    for &t in &targets {
        row("extrapolated", t);
    }
    let path = dir.join("bench.csv");
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    manifest.set("oracle_calls", state.oracle_calls + model_samples as u64);
    manifest.set("status", if state.converged() { "converged" } else { "partial" });
    manifest.write(dir)?;
    Ok(Outcome::Done)
}
