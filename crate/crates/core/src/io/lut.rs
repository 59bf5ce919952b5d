use std::collections::BTreeMap;
use std::path::Path;

use super::{fmt_f64, read_file, write_file, IoError, Result};
use crate::mesh::Tessellation;
use crate::model::DomainBox;
use crate::montecarlo::{CumulativeTable, DensityMode};
use crate::refine::{ErrorMetric, MetricKind};

pub const LUT_MAGIC: &[u8; 5] = b"SLUT1";

/// Provenance stored in the table header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LutMeta {
    pub oracle: String,
    pub labels: Option<Vec<String>>,
    pub metric: Option<ErrorMetric>,
    /// Build statistics such as iterations and oracle calls.
    pub build: BTreeMap<String, String>,
}

/// A compacted tessellation with its provenance and optional event table.
#[derive(Debug, Clone)]
pub struct LookupTable {
    pub mesh: Tessellation,
    pub meta: LutMeta,
    pub table: Option<CumulativeTable>,
}

fn check_text(what: &str, s: &str) -> Result<()> {
    if s.contains('\n') || s.contains('\r') {
        return Err(IoError::Validation(format!("{what} {s:?} contains a line break")));
    }
    Ok(())
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

/// Layout: magic, u64 little-endian header length, `key=value` header
/// lines, vertex block (coords then value per vertex), simplex block
/// (vertex ids then neighbor ids, `-1` on the boundary), and an optional
/// table block (`I_k` then `F_k` per simplex). All numbers little-endian.
pub fn encode_lut(lut: &LookupTable) -> Result<Vec<u8>> {
    let t = &lut.mesh;
    if !t.is_compact() {
        return Err(IoError::NotCompacted);
    }
    if let Some(table) = &lut.table {
        table.check_current(t).map_err(|e| IoError::Validation(e.to_string()))?;
    }
    let dim = t.dim();
    let m = &lut.meta;
    check_text("oracle name", &m.oracle)?;
    let mut head = String::new();
    let mut kv = |k: &str, v: String| {
        head.push_str(k);
        head.push('=');
        head.push_str(&v);
        head.push('\n');
    };
    kv("dimension", dim.to_string());
    kv("vertices", t.vertex_count().to_string());
    kv("simplices", t.live_count().to_string());
    kv("domain_mins", join_f64(&t.domain().mins));
    kv("domain_maxs", join_f64(&t.domain().maxs));
    kv("min_volume", fmt_f64(t.min_volume()));
    kv("oracle", m.oracle.clone());
    if let Some(labels) = &m.labels {
        if labels.len() != dim {
            return Err(IoError::Validation(format!("{} labels for {dim} axes", labels.len())));
        }
        for l in labels {
            check_text("label", l)?;
            if l.contains(',') {
                return Err(IoError::Validation(format!("label {l:?} contains a comma")));
            }
        }
        kv("labels", labels.join(","));
    }
    if let Some(metric) = &m.metric {
        kv("metric", metric.kind().as_str().to_string());
        kv("threshold", fmt_f64(metric.threshold()));
    }
    match &lut.table {
        Some(table) => {
            kv("table", table.mode().as_str().to_string());
            kv("table_absolute", table.absolute().to_string());
        }
        None => kv("table", "none".to_string()),
    }
    for (k, v) in &m.build {
        if k.contains('=') || k.is_empty() {
            return Err(IoError::Validation(format!("build key {k:?} is empty or contains `=`")));
        }
        check_text("build key", k)?;
        check_text("build value", v)?;
        kv(&format!("build.{k}"), v.clone());
    }

    let k = dim + 1;
    let nv = t.vertex_count();
    let ns = t.live_count();
    let mut out = Vec::with_capacity(13 + head.len() + 8 * (nv * k + ns * 2 * k + 2 * ns));
    out.extend_from_slice(LUT_MAGIC);
    out.extend_from_slice(&(head.len() as u64).to_le_bytes());
    out.extend_from_slice(head.as_bytes());
    for v in 0..nv {
        for x in t.vertex(v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&t.value(v).to_le_bytes());
    }
    for id in 0..ns {
        for &v in t.simplex(id) {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for n in &t.neighbor_block()[id * k..(id + 1) * k] {
            out.extend_from_slice(&n.map_or(-1, |n| n as i64).to_le_bytes());
        }
    }
    if let Some(table) = &lut.table {
        for (i, f) in table.integrals().iter().zip(table.cumulative()) {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_lut(lut: &LookupTable, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_lut(lut)?)
}

pub fn read_lut(path: impl AsRef<Path>) -> Result<LookupTable> {
    decode_lut(&read_file(path.as_ref())?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(IoError::Truncated { expected: self.pos.saturating_add(n), found: self.bytes.len() })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

struct Header {
    entries: BTreeMap<String, (String, usize)>,
}

impl Header {
    fn get(&self, key: &str) -> Result<&(String, usize)> {
        self.entries.get(key).ok_or_else(|| IoError::Parse { line: 0, message: format!("missing header key `{key}`") })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (v, line) = self.get(key)?;
        v.parse().map_err(|_| IoError::Parse { line: *line, message: format!("bad {key} `{v}`") })
    }

    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        let (v, line) = self.get(key)?;
        v.split(' ')
            .map(|w| w.parse().map_err(|_| IoError::Parse { line: *line, message: format!("bad {key} entry `{w}`") }))
            .collect()
    }
}

pub fn decode_lut(bytes: &[u8]) -> Result<LookupTable> {
    if bytes.len() < 5 || &bytes[..5] != LUT_MAGIC {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(5)]).to_string();
        if bytes.len() >= 5 && bytes.starts_with(b"SLUT") {
            return Err(IoError::UnsupportedVersion(found));
        }
        return Err(IoError::BadMagic { expected: "SLUT1", found });
    }
    let mut c = Cursor { bytes, pos: 5 };
    let head_len = usize::try_from(c.u64()?).map_err(|_| IoError::Validation("header length overflows".into()))?;
    let head = std::str::from_utf8(c.take(head_len)?)
        .map_err(|_| IoError::Parse { line: 0, message: "header is not UTF-8".into() })?;
    let mut entries = BTreeMap::new();
    for (i, text) in head.lines().enumerate() {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| IoError::Parse { line: i + 1, message: format!("malformed header line `{text}`") })?;
        if entries.insert(k.to_string(), (v.to_string(), i + 1)).is_some() {
            return Err(IoError::Parse { line: i + 1, message: format!("duplicate header key `{k}`") });
        }
    }
    let h = Header { entries };
    let dim: usize = h.parse("dimension")?;
    let nv: usize = h.parse("vertices")?;
    let ns: usize = h.parse("simplices")?;
    if dim == 0 {
        return Err(IoError::Validation("dimension must be positive".into()));
    }
    let domain = DomainBox::new(h.floats("domain_mins")?, h.floats("domain_maxs")?)
        .map_err(|e| IoError::Validation(e.to_string()))?;
    if domain.dim() != dim {
        return Err(IoError::Validation(format!("{}D domain for a {dim}D table", domain.dim())));
    }
    let min_volume: f64 = h.parse("min_volume")?;
    let oracle = h.get("oracle")?.0.clone();
    let labels = h.entries.get("labels").map(|(v, _)| v.split(',').map(str::to_string).collect::<Vec<_>>());
    let metric = match h.entries.get("metric") {
        Some((kind, line)) => {
            let kind: MetricKind =
                kind.parse().map_err(|_| IoError::Parse { line: *line, message: format!("bad metric `{kind}`") })?;
            let threshold: f64 = h.parse("threshold")?;
            Some(ErrorMetric::new(kind, threshold).map_err(|e| IoError::Validation(e.to_string()))?)
        }
        None => None,
    };
    let (table_kind, table_line) = h.get("table")?.clone();
    let table_mode = match table_kind.as_str() {
        "none" => None,
        other => Some(
            other
                .parse::<DensityMode>()
                .map_err(|_| IoError::Parse { line: table_line, message: format!("bad table mode `{other}`") })?,
        ),
    };
    let build = h
        .entries
        .iter()
        .filter_map(|(k, (v, _))| k.strip_prefix("build.").map(|k| (k.to_string(), v.clone())))
        .collect();

    let k = dim + 1;
    let table_bytes = if table_mode.is_some() { 16 * ns } else { 0 };
    let expected = nv
        .checked_mul(8 * k)
        .and_then(|a| ns.checked_mul(16 * k).and_then(|b| a.checked_add(b)))
        .and_then(|a| a.checked_add(table_bytes))
        .and_then(|a| a.checked_add(c.pos))
        .ok_or_else(|| IoError::Validation("header counts overflow".into()))?;
    if bytes.len() != expected {
        return Err(IoError::Truncated { expected, found: bytes.len() });
    }
    let mut coords = Vec::with_capacity(nv * dim);
    let mut values = Vec::with_capacity(nv);
    for _ in 0..nv {
        for _ in 0..dim {
            coords.push(c.f64()?);
        }
        values.push(c.f64()?);
    }
    let mut simplices = Vec::with_capacity(ns * k);
    let mut neighbors = Vec::with_capacity(ns * k);
    for id in 0..ns {
        for _ in 0..k {
            let v = c.u64()?;
            if v >= nv as u64 {
                return Err(IoError::Validation(format!("simplex {id} references vertex {v} of {nv}")));
            }
            simplices.push(v as usize);
        }
        for _ in 0..k {
            let n = c.i64()?;
            if n < -1 || n >= ns as i64 {
                return Err(IoError::Validation(format!("simplex {id} has neighbor id {n} of {ns}")));
            }
            neighbors.push(usize::try_from(n).ok());
        }
    }
    let mesh = Tessellation::from_parts(domain, coords, values, simplices, neighbors, min_volume)
        .map_err(|e| IoError::Validation(e.to_string()))?;
    let table = match table_mode {
        Some(mode) => {
            let absolute: bool = h.parse("table_absolute")?;
            let mut integrals = Vec::with_capacity(ns);
            let mut cumulative = Vec::with_capacity(ns);
            for _ in 0..ns {
                integrals.push(c.f64()?);
                cumulative.push(c.f64()?);
            }
            Some(
                CumulativeTable::from_parts(&mesh, mode, absolute, integrals, cumulative)
                    .map_err(|e| IoError::Validation(e.to_string()))?,
            )
        }
        None => None,
    };
    Ok(LookupTable { mesh, meta: LutMeta { oracle, labels, metric, build }, table })
}
