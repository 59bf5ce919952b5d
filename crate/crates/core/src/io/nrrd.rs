use std::path::Path;

use super::{fmt_f64, read_file, write_file, IoError, Result};
use crate::model::GridImage;

const MAGIC: &str = "NRRD0004";

#[derive(Clone, Copy)]
enum Scalar {
    Double,
    Float,
}

impl Scalar {
    fn width(self) -> usize {
        match self {
            Scalar::Double => 8,
            Scalar::Float => 4,
        }
    }
}

/// Serializes a grid as a raw little-endian double NRRD.
pub fn encode_nrrd(g: &GridImage) -> Vec<u8> {
    let join = |xs: &[f64]| xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
    let mut head = format!("{MAGIC}\ntype: double\ndimension: {}\n", g.dim());
    head += &format!("sizes: {}\n", g.sizes().iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
    head += &format!("spacings: {}\n", join(g.spacings()));
    head += &format!("axis mins: {}\n", join(g.mins()));
    if let Some(labels) = g.labels() {
        head += &format!("labels: {}\n", labels.iter().map(|l| format!("\"{l}\"")).collect::<Vec<_>>().join(" "));
    }
    head += "endian: little\nencoding: raw\n\n";
    let mut out = head.into_bytes();
    out.reserve(g.len() * 8);
    for v in g.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_nrrd(g: &GridImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_nrrd(g))
}

pub fn read_nrrd(path: impl AsRef<Path>) -> Result<GridImage> {
    decode_nrrd(&read_file(path.as_ref())?)
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

fn numbers<T: std::str::FromStr>(value: &str, line: usize, field: &str) -> Result<Vec<T>> {
    value
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| parse_err(line, format!("bad {field} entry `{w}`"))))
        .collect()
}

fn quoted(value: &str, line: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut rest = value.trim();
    while !rest.is_empty() {
        let body = rest.strip_prefix('"').ok_or_else(|| parse_err(line, "labels must be quoted"))?;
        let end = body.find('"').ok_or_else(|| parse_err(line, "unterminated label"))?;
        out.push(body[..end].to_string());
        rest = body[end + 1..].trim_start();
    }
    Ok(out)
}

fn vector(value: &str, line: usize) -> Result<Vec<f64>> {
    let inner = value
        .trim()
        .strip_prefix('(')
        .and_then(|v| v.strip_suffix(')'))
        .ok_or_else(|| parse_err(line, "space origin must look like (x,y,...)"))?;
    inner
        .split(',')
        .map(|w| w.trim().parse().map_err(|_| parse_err(line, format!("bad space origin entry `{w}`"))))
        .collect()
}

/// Parses the supported NRRD subset: raw little-endian float or double
/// samples in 1 to 4 dimensions with spacings and axis mins (or a space
/// origin).
pub fn decode_nrrd(bytes: &[u8]) -> Result<GridImage> {
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| *pos + i);
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = end + 1;
        Some(line)
    };
    let magic = next_line(&mut pos).unwrap_or_default();
    let version_ok = magic.len() == 8 && magic.starts_with("NRRD000") && matches!(magic.as_bytes()[7], b'1'..=b'5');
    if !version_ok {
        return Err(IoError::BadMagic { expected: MAGIC, found: magic.chars().take(16).collect() });
    }

    let mut scalar = None;
    let mut dimension = None;
    let mut sizes: Option<Vec<usize>> = None;
    let mut spacings: Option<Vec<f64>> = None;
    let mut mins: Option<Vec<f64>> = None;
    let mut maxs: Option<(Vec<f64>, usize)> = None;
    let mut labels = None;
    let mut encoding = None;
    let mut endian = None;
    let mut line = 1;
    let mut terminated = false;
    while let Some(text) = next_line(&mut pos) {
        line += 1;
        if text.is_empty() {
            terminated = true;
            break;
        }
        if text.starts_with('#') {
            continue;
        }
        if text.contains(":=") {
            continue;
        }
        let (field, value) =
            text.split_once(": ").ok_or_else(|| parse_err(line, format!("malformed line `{text}`")))?;
        let value = value.trim();
        match field {
            "type" => {
                scalar = Some(match value {
                    "double" | "float64" => Scalar::Double,
                    "float" | "float32" => Scalar::Float,
                    other => return Err(parse_err(line, format!("unsupported type `{other}`"))),
                })
            }
            "dimension" => {
                let d: usize = value.parse().map_err(|_| parse_err(line, format!("bad dimension `{value}`")))?;
                if !(1..=4).contains(&d) {
                    return Err(parse_err(line, format!("dimension {d} outside 1..4")));
                }
                dimension = Some(d);
            }
            "sizes" => sizes = Some(numbers(value, line, "sizes")?),
            "spacings" => spacings = Some(numbers(value, line, field)?),
            "axis mins" => mins = Some(numbers(value, line, field)?),
            "axis maxs" => maxs = Some((numbers(value, line, field)?, line)),
            "space origin" => mins = Some(vector(value, line)?),
            "labels" => labels = Some(quoted(value, line)?),
            "content" => {}
            "encoding" => {
                if value != "raw" {
                    return Err(IoError::UnsupportedEncoding(value.to_string()));
                }
                encoding = Some(());
            }
            "endian" => {
                if value != "little" {
                    return Err(IoError::UnsupportedField { field: format!("endian: {value}"), line });
                }
                endian = Some(());
            }
            other => return Err(IoError::UnsupportedField { field: other.to_string(), line }),
        }
    }
    if !terminated {
        return Err(parse_err(line, "header is not terminated by a blank line"));
    }
    let missing = |f: &str| parse_err(line, format!("missing required field `{f}`"));
    let scalar = scalar.ok_or_else(|| missing("type"))?;
    let dim = dimension.ok_or_else(|| missing("dimension"))?;
    let sizes = sizes.ok_or_else(|| missing("sizes"))?;
    let spacings = spacings.ok_or_else(|| missing("spacings"))?;
    let mins = mins.ok_or_else(|| missing("axis mins"))?;
    encoding.ok_or_else(|| missing("encoding"))?;
    endian.ok_or_else(|| missing("endian"))?;
    for (name, len) in [("sizes", sizes.len()), ("spacings", spacings.len()), ("axis mins", mins.len())] {
        if len != dim {
            return Err(parse_err(line, format!("{name} has {len} entries for dimension {dim}")));
        }
    }
    if let Some((maxs, at)) = maxs {
        let ok = maxs.len() == dim
            && (0..dim).all(|a| {
                let want = mins[a] + (sizes[a] - 1) as f64 * spacings[a];
                (maxs[a] - want).abs() <= 1e-9 * want.abs().max(spacings[a])
            });
        if !ok {
            return Err(parse_err(at, "axis maxs disagree with mins, sizes and spacings"));
        }
    }
    let count: usize = sizes.iter().product();
    let data = &bytes[pos.min(bytes.len())..];
    let expected = count * scalar.width();
    if data.len() != expected {
        return Err(IoError::Truncated { expected, found: data.len() });
    }
    let samples: Vec<f64> = match scalar {
        Scalar::Double => data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        Scalar::Float => data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
    };
    Ok(GridImage::new(sizes, mins, spacings, samples, labels)?)
}
