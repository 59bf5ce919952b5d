//! File formats: NRRD grids, the binary lookup-table container, CSV
//! reports and events, and a legacy VTK export.

mod csv;
mod lut;
mod nrrd;
mod vtk;

use std::path::Path;

use thiserror::Error;

use crate::mesh::MeshError;
use crate::model::ModelError;

pub use self::csv::{
    read_events_csv, write_baseline_csv, write_events, write_events_csv, write_histogram_csv, write_report_csv,
    write_stats_csv, BASELINE_HEADER, REPORT_HEADER,
};
pub use lut::{decode_lut, encode_lut, read_lut, write_lut, LookupTable, LutMeta, LUT_MAGIC};
pub use nrrd::{decode_nrrd, encode_nrrd, read_nrrd, write_nrrd};
pub use vtk::{write_vtk, write_vtk_legacy};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("unsupported version {0:?}")]
    UnsupportedVersion(String),
    #[error("unsupported encoding {0:?} (only raw is supported)")]
    UnsupportedEncoding(String),
    #[error("line {line}: unsupported field `{field}`")]
    UnsupportedField { field: String, line: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("payload has {found} bytes, expected {expected}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid table: {0}")]
    Validation(String),
    #[error("tessellation has tombstoned simplices; compact it before writing")]
    NotCompacted,
    #[error("{0}D meshes cannot be exported (2D or 3D only)")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

/// Shortest decimal that parses back to the same bits.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
