use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{fmt_f64, read_file, IoError, Result};
use crate::montecarlo::Event;
use crate::refine::{BaselineRow, ErrorStats, Histogram, IterationRecord, HISTOGRAM_BINS};

pub const REPORT_HEADER: &str = "iteration,vertices,simplices,checked,oracle_calls,mean_err,rms_err,max_err,\
t_meshing_io,t_meshing,t_kinematics,t_model,t_model_io,t_update_weights,t_compute_error";

pub const BASELINE_HEADER: &str = "kind,sizes,vertices,simplices,oracle_calls,mean_err,rms_err,max_err";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })
}

/// Events as `x0,..,x{N-1},weight,simplex_id`.
pub fn write_events(w: &mut impl Write, dim: usize, events: &[Event]) -> Result<()> {
    let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    header.push("weight".into());
    header.push("simplex_id".into());
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for e in events {
        if e.point.len() != dim {
            return Err(IoError::Validation(format!("{}D event in a {dim}D file", e.point.len())));
        }
        line.clear();
        for x in &e.point {
            line += &fmt_f64(*x);
            line.push(',');
        }
        line += &fmt_f64(e.weight);
        line.push(',');
        line += &e.simplex.to_string();
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_events_csv(path: impl AsRef<Path>, dim: usize, events: &[Event]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_events(&mut w, dim, events)?;
    finish(w, path)
}

/// Reads an event file back; returns the dimension and the events.
pub fn read_events_csv(path: impl AsRef<Path>) -> Result<(usize, Vec<Event>)> {
    let bytes = read_file(path.as_ref())?;
    let text = std::str::from_utf8(&bytes).map_err(|_| IoError::Parse { line: 0, message: "not UTF-8".into() })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| IoError::Parse { line: 1, message: "missing header".into() })?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = cols.len().saturating_sub(2);
    let expected: Vec<String> =
        (0..dim).map(|i| format!("x{i}")).chain(["weight".into(), "simplex_id".into()]).collect();
    if cols.len() < 3 || cols != expected {
        return Err(IoError::Parse { line: 1, message: format!("unexpected event header `{header}`") });
    }
    let mut events = Vec::new();
    for (i, row) in lines.enumerate() {
        let line = i + 2;
        let bad = |m: String| IoError::Parse { line, message: m };
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(bad(format!("{} fields, expected {}", fields.len(), dim + 2)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
        let point = fields[..dim].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        let weight = num(fields[dim])?;
        let simplex = fields[dim + 1].parse().map_err(|_| bad(format!("bad simplex id `{}`", fields[dim + 1])))?;
        events.push(Event { point, weight, simplex });
    }
    Ok((dim, events))
}

/// One row per refinement iteration, times in seconds.
pub fn write_report_csv(path: impl AsRef<Path>, records: &[IterationRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "{REPORT_HEADER}")?;
    for r in records {
        let mut row = vec![
            r.iteration.to_string(),
            r.vertices.to_string(),
            r.simplices.to_string(),
            r.checked.to_string(),
            r.oracle_calls.to_string(),
            fmt_f64(r.mean_err),
            fmt_f64(r.rms_err),
            fmt_f64(r.max_err),
        ];
        row.extend(r.timings.as_array().iter().map(|d| fmt_f64(d.as_secs_f64())));
        writeln!(w, "{}", row.join(","))?;
    }
    finish(w, path)
}

pub fn write_stats_csv(path: impl AsRef<Path>, stats: &ErrorStats) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "probes,mean_err,rms_err,max_err")?;
    writeln!(w, "{},{},{},{}", stats.probes, fmt_f64(stats.mean), fmt_f64(stats.rms), fmt_f64(stats.max))?;
    finish(w, path)
}

/// Histogram bins as `lower,upper,count`, with underflow and overflow rows
/// first and last.
pub fn write_histogram_csv(path: impl AsRef<Path>, h: &Histogram) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "lower,upper,count")?;
    writeln!(w, "0.0,{},{}", fmt_f64(Histogram::edge(0)), h.underflow)?;
    for (i, c) in h.counts.iter().enumerate().take(HISTOGRAM_BINS) {
        writeln!(w, "{},{},{c}", fmt_f64(Histogram::edge(i)), fmt_f64(Histogram::edge(i + 1)))?;
    }
    writeln!(w, "{},inf,{}", fmt_f64(Histogram::edge(HISTOGRAM_BINS)), h.overflow)?;
    finish(w, path)
}

pub fn write_baseline_csv(path: impl AsRef<Path>, rows: &[BaselineRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "{BASELINE_HEADER}")?;
    for r in rows {
        let sizes = r.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        writeln!(
            w,
            "{},{sizes},{},{},{},{},{},{}",
            r.kind,
            r.vertices,
            r.simplices,
            r.oracle_calls,
            fmt_f64(r.mean),
            fmt_f64(r.rms),
            fmt_f64(r.max)
        )?;
    }
    finish(w, path)
}
