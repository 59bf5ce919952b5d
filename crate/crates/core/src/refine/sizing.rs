use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::splitting::{apply_barycenters, apply_bisections, distinct_edges, plan_edges};
use super::{RefineError, Result, SplitRule};
use crate::geometry;
use crate::mesh::{Edge, Tessellation};
use crate::model::GridImage;
use crate::pool::WorkerPool;

const ZERO_MEAN: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SizingKind {
    /// Element value range relative to the whole image's range.
    Sf1,
    /// Element value range relative to the element's mean magnitude.
    Sf2,
}

impl SizingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SizingKind::Sf1 => "sf1",
            SizingKind::Sf2 => "sf2",
        }
    }

    pub fn default_weight_limit(self) -> f64 {
        match self {
            SizingKind::Sf1 => 0.05,
            SizingKind::Sf2 => 0.5,
        }
    }
}

impl fmt::Display for SizingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SizingKind {
    type Err = RefineError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sf1" => Ok(SizingKind::Sf1),
            "sf2" => Ok(SizingKind::Sf2),
            other => Err(RefineError::InvalidInput(format!("unknown sizing function `{other}`"))),
        }
    }
}

/// Split predicate over background samples of an element.
#[derive(Debug, Clone, Copy)]
pub struct SizingFunction<'a> {
    kind: SizingKind,
    weight_limit: f64,
    background: &'a GridImage,
    image_weight_range: f64,
}

impl<'a> SizingFunction<'a> {
    pub fn new(kind: SizingKind, weight_limit: f64, background: &'a GridImage) -> Result<Self> {
        if !(weight_limit.is_finite() && weight_limit > 0.0) {
            return Err(RefineError::InvalidInput(format!(
                "weight limit must be positive and finite, got {weight_limit}"
            )));
        }
        let (lo, hi) = background.value_range();
        Ok(Self { kind, weight_limit, background, image_weight_range: hi - lo })
    }

    pub fn kind(&self) -> SizingKind {
        self.kind
    }

    pub fn weight_limit(&self) -> f64 {
        self.weight_limit
    }

    pub fn background(&self) -> &'a GridImage {
        self.background
    }

    pub fn image_weight_range(&self) -> f64 {
        self.image_weight_range
    }

    /// A constant element never splits. SF1 over a constant image never
    /// splits; SF2 with a vanishing mean and a nonzero range always splits.
    pub fn should_split(&self, samples: &[(Vec<f64>, f64)]) -> bool {
        if samples.is_empty() {
            return false;
        }
        let (lo, hi) =
            samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(*v), hi.max(*v)));
        let range = hi - lo;
        if range <= 0.0 {
            return false;
        }
        match self.kind {
            SizingKind::Sf1 => self.image_weight_range > 0.0 && range / self.image_weight_range > self.weight_limit,
            SizingKind::Sf2 => {
                let mean = samples.iter().map(|(_, v)| v).sum::<f64>() / samples.len() as f64;
                mean.abs() < ZERO_MEAN || range / mean.abs() > self.weight_limit
            }
        }
    }

    /// Edge score of the edge-driven rules: the difference of two values in
    /// the same units the predicate compares.
    fn edge_score(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.kind {
            SizingKind::Sf1 => d,
            SizingKind::Sf2 => {
                let m = (0.5 * (a + b)).abs();
                if m < ZERO_MEAN {
                    if d > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    d / m
                }
            }
        }
    }
}

/// Vertices, barycenter and vertex–barycenter midpoints of a simplex that
/// lie inside the background grid, with the grid's values there.
pub fn sizing_sample_points(vertices: &[&[f64]], background: &GridImage) -> Result<Vec<(Vec<f64>, f64)>> {
    let b = geometry::barycenter(vertices);
    let mut candidates: Vec<Vec<f64>> = vertices.iter().map(|v| v.to_vec()).collect();
    candidates.push(b.clone());
    for v in vertices {
        candidates.push(v.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect());
    }
    let out: Vec<(Vec<f64>, f64)> =
        candidates.into_iter().filter_map(|p| background.interpolate(&p).ok().map(|v| (p, v))).collect();
    if out.is_empty() {
        return Err(RefineError::EmptySample);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizingReport {
    pub passes: usize,
    /// Violating simplices found in the last pass (zero when complete).
    pub violations: usize,
    pub vertices_added: usize,
    pub complete: bool,
}

/// Splits simplices violating the sizing function until none remain or
/// `max_passes` split passes have run. New vertices take background values.
pub fn adapt_to_sizing(
    t: Tessellation,
    sf: &SizingFunction,
    max_passes: usize,
    rule: SplitRule,
    pool: &WorkerPool,
) -> Result<(Tessellation, SizingReport)> {
    let mut t = t;
    let bg = sf.background;
    let mut report = SizingReport { passes: 0, violations: 0, vertices_added: 0, complete: false };
    loop {
        let ids: Vec<usize> = t.live_ids().collect();
        let flags =
            pool.try_map(&ids, |&id| sizing_sample_points(&t.simplex_vertices(id), bg).map(|s| sf.should_split(&s)))?;
        let violators: Vec<usize> = ids.iter().zip(&flags).filter(|(_, f)| **f).map(|(id, _)| *id).collect();
        report.violations = violators.len();
        if violators.is_empty() {
            report.complete = true;
            return Ok((t, report));
        }
        if report.passes == max_passes {
            return Ok((t, report));
        }
        let added = match rule {
            SplitRule::Barycenter => {
                let items = violators
                    .iter()
                    .map(|&id| Ok((id, bg.interpolate(&t.barycenter(id))?)))
                    .collect::<Result<Vec<_>>>()?;
                apply_barycenters(&mut t, &items)?
            }
            SplitRule::MidpointError => {
                let edges = distinct_edges(&t, &violators);
                let at_mid = edges
                    .into_iter()
                    .map(|e| Ok((e, bg.interpolate(&t.midpoint(e))?)))
                    .collect::<Result<HashMap<Edge, f64>>>()?;
                let plan = plan_edges(&t, &violators, rule, |e| {
                    sf.edge_score(at_mid[&e], 0.5 * (t.value(e.a) + t.value(e.b)))
                });
                let values: Vec<f64> = plan.iter().map(|(_, e)| at_mid[e]).collect();
                apply_bisections(&mut t, &plan, &values)?
            }
            rule => {
                let plan = plan_edges(&t, &violators, rule, |e| sf.edge_score(t.value(e.a), t.value(e.b)));
                let values =
                    plan.iter().map(|(_, e)| Ok(bg.interpolate(&t.midpoint(*e))?)).collect::<Result<Vec<_>>>()?;
                apply_bisections(&mut t, &plan, &values)?
            }
        };
        report.passes += 1;
        report.vertices_added += added.vertices;
        if added.vertices == 0 {
            return Ok((t, report));
        }
    }
}
