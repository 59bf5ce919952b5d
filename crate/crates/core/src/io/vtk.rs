use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{fmt_f64, IoError, Result};
use crate::mesh::Tessellation;

/// Legacy ASCII unstructured grid: triangles (type 5) in 2D, tetrahedra
/// (type 10) in 3D, vertex values as point scalars. 2D points get z = 0.
pub fn write_vtk(w: &mut impl Write, t: &Tessellation) -> Result<()> {
    let dim = t.dim();
    let cell_type = match dim {
        2 => 5,
        3 => 10,
        d => return Err(IoError::UnsupportedDimension(d)),
    };
    if !t.is_compact() {
        return Err(IoError::NotCompacted);
    }
    let nv = t.vertex_count();
    let ns = t.live_count();
    let k = dim + 1;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "slut tessellation")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for v in 0..nv {
        let p = t.vertex(v);
        let z = if dim == 3 { p[2] } else { 0.0 };
        writeln!(w, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(z))?;
    }
    writeln!(w, "CELLS {ns} {}", ns * (k + 1))?;
    for id in 0..ns {
        let ids: Vec<String> = t.simplex(id).iter().map(usize::to_string).collect();
        writeln!(w, "{k} {}", ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {ns}")?;
    for _ in 0..ns {
        writeln!(w, "{cell_type}")?;
    }
    writeln!(w, "POINT_DATA {nv}")?;
    writeln!(w, "SCALARS value double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in 0..nv {
        writeln!(w, "{}", fmt_f64(t.value(v)))?;
    }
    Ok(())
}

pub fn write_vtk_legacy(t: &Tessellation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file_err = |source| IoError::File { path: path.display().to_string(), source };
    let mut w = BufWriter::new(File::create(path).map_err(file_err)?);
    write_vtk(&mut w, t)?;
    w.flush().map_err(file_err)
}
