use std::fmt;

use super::{ErrorMetric, Result, StatsBuilder};
use crate::geometry;
use crate::mesh::KuhnLattice;
use crate::model::{sample_to_grid, GridSpec, ModelOracle};
use crate::pool::WorkerPool;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Multilinear interpolation on the regular grid.
    Structured,
    /// Linear interpolation on the Kuhn triangulation of the grid.
    Unstructured,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Structured => "structured",
            BaselineKind::Unstructured => "unstructured",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub kind: BaselineKind,
    pub sizes: Vec<usize>,
    pub vertices: usize,
    pub simplices: usize,
    /// Oracle calls needed to build the table.
    pub oracle_calls: u64,
    pub mean: f64,
    pub rms: f64,
    pub max: f64,
}

const CELL_CHUNK: usize = 4096;

/// Error of uniformly sampled tables at each resolution, measured at the
/// barycenters of the Kuhn simplices. Each resolution yields a structured
/// and an unstructured row. Simplices are streamed cell by cell, so large
/// lattices need no stored mesh.
pub fn uniform_baselines(
    oracle: &dyn ModelOracle,
    resolutions: &[Vec<usize>],
    metric: &ErrorMetric,
    pool: &WorkerPool,
) -> Result<Vec<BaselineRow>> {
    let mut rows = Vec::with_capacity(2 * resolutions.len());
    for sizes in resolutions {
        let spec = GridSpec::new(sizes.clone(), oracle.domain().clone())?;
        let grid = sample_to_grid(oracle, &spec, pool)?;
        let lattice = KuhnLattice::new(sizes)?;
        let k = sizes.len() + 1;
        let mut structured = StatsBuilder::new();
        let mut unstructured = StatsBuilder::new();
        let mut ids = Vec::new();
        let cells = lattice.cell_count();
        for lo in (0..cells).step_by(CELL_CHUNK) {
            ids.clear();
            for c in lo..(lo + CELL_CHUNK).min(cells) {
                lattice.push_cell(c, &mut ids);
            }
            let simplices: Vec<&[usize]> = ids.chunks(k).collect();
            let probes = pool.map(&simplices, |s| {
                let points: Vec<Vec<f64>> = s.iter().map(|&v| grid.point(v)).collect();
                geometry::barycenter(&points.iter().map(Vec::as_slice).collect::<Vec<_>>())
            });
            let linear = pool.map(&simplices, |s| s.iter().map(|&v| grid.samples()[v]).sum::<f64>() / k as f64);
            let multilinear = pool.try_map(&probes, |p| grid.interpolate(p))?;
            let model = oracle.evaluate_batch(pool, &probes)?;
            let errors =
                |interp: &[f64]| -> Vec<f64> { model.iter().zip(interp).map(|(&f, &i)| metric.error(f, i)).collect() };
            structured.extend(&errors(&multilinear));
            unstructured.extend(&errors(&linear));
        }
        for (kind, b) in [(BaselineKind::Structured, structured), (BaselineKind::Unstructured, unstructured)] {
            let s = b.finish();
            rows.push(BaselineRow {
                kind,
                sizes: sizes.clone(),
                vertices: grid.len(),
                simplices: cells * lattice.simplices_per_cell(),
                oracle_calls: grid.len() as u64,
                mean: s.mean,
                rms: s.rms,
                max: s.max,
            });
        }
    }
    Ok(rows)
}
