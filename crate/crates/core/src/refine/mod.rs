//! Error metric, sizing functions, uniform baselines and the
//! iterative-adaptive refinement driver.

mod baseline;
mod metric;
mod pipeline;
mod sizing;
mod splitting;
mod stats;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mesh::{MeshError, Tessellation};
use crate::model::ModelError;

pub use baseline::{uniform_baselines, BaselineKind, BaselineRow};
pub use metric::{interpolation_error, ErrorMetric, MetricKind};
pub use pipeline::{
    iterate_adaptive, IterationRecord, RefineConfig, RefineStatus, RefinementState, StepTimings, DEFAULT_MAX_VERTICES,
};
pub use sizing::{adapt_to_sizing, sizing_sample_points, SizingFunction, SizingKind, SizingReport};
pub use stats::{
    error_stats, probe_errors, ErrorStats, Histogram, Probes, StatsBuilder, HISTOGRAM_BINS, HISTOGRAM_MAX,
    HISTOGRAM_MIN,
};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no sample point of the simplex lies inside the background grid")]
    EmptySample,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The oracle failed mid-run; the mesh and statistics up to the failure
    /// are preserved.
    #[error("oracle failure during refinement: {source}")]
    Oracle { source: ModelError, partial: Box<(Tessellation, RefinementState)> },
}

pub type Result<T> = std::result::Result<T, RefineError>;

/// How a violating simplex is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SplitRule {
    /// 1 → N+1 split at the barycenter, reusing the probed value.
    Barycenter,
    /// Bisect the longest edge (and every simplex sharing it).
    LongestEdge,
    /// Bisect the edge whose endpoint values differ most under the active
    /// measure, breaking ties by length.
    SteepestEdge,
    /// Evaluate the midpoint of every edge and bisect the one where linear
    /// interpolation errs most, breaking ties by length.
    #[default]
    MidpointError,
}

impl SplitRule {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitRule::Barycenter => "barycenter",
            SplitRule::LongestEdge => "longest-edge",
            SplitRule::SteepestEdge => "steepest-edge",
            SplitRule::MidpointError => "midpoint-error",
        }
    }
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitRule {
    type Err = RefineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "barycenter" => Ok(SplitRule::Barycenter),
            "longest-edge" => Ok(SplitRule::LongestEdge),
            "steepest-edge" => Ok(SplitRule::SteepestEdge),
            "midpoint-error" => Ok(SplitRule::MidpointError),
            other => Err(RefineError::InvalidInput(format!(
                "unknown split rule `{other}` (expected barycenter, longest-edge, steepest-edge or midpoint-error)"
            ))),
        }
    }
}
