//! Plain-text field snapshots and legacy VTK export.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed snapshot header: {0:?}")]
    Header(String),
    #[error("snapshot value {line}: {source}")]
    Value { line: usize, source: std::num::ParseFloatError },
    #[error("snapshot holds {got} values, header implies {expected}")]
    Count { expected: usize, got: usize },
}

/// A parsed snapshot: mesh resolution, time stamp and row-major node values.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_div: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_snapshot(n_div: usize, time: f64, values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 25 + 64);
    let _ = writeln!(s, "aniso-ac field n_div={n_div} t={}", fmt_f64(time));
    for v in values {
        s.push_str(&fmt_f64(*v));
        s.push('\n');
    }
    s
}

pub fn parse_snapshot(text: &str) -> Result<Snapshot, SnapshotError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let bad = || SnapshotError::Header(header.to_string());
    let rest = header.strip_prefix("aniso-ac field ").ok_or_else(bad)?;
    let mut n_div = None;
    let mut time = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n_div=") {
            n_div = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("t=") {
            time = v.parse::<f64>().ok();
        }
    }
    let (n_div, time) = (n_div.ok_or_else(bad)?, time.ok_or_else(bad)?);
    let values = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|source| SnapshotError::Value { line: i + 2, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let expected = (n_div + 1) * (n_div + 1);
    if values.len() != expected {
        return Err(SnapshotError::Count { expected, got: values.len() });
    }
    Ok(Snapshot { n_div, time, values })
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let file_name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub fn write_snapshot(path: &Path, n_div: usize, time: f64, values: &[f64]) -> io::Result<()> {
    write_atomic(path, &format_snapshot(n_div, time, values))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    parse_snapshot(&fs::read_to_string(path)?)
}

/// Legacy VTK `STRUCTURED_POINTS` dataset with one scalar per node.
pub fn format_vtk(n_div: usize, name: &str, values: &[f64]) -> String {
    let side = n_div + 1;
    let h = 2.0 / n_div as f64;
    let mut s = String::with_capacity(values.len() * 25 + 256);
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "aniso-ac {name}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {side} {side} 1");
    let _ = writeln!(s, "ORIGIN -1 -1 0");
    let _ = writeln!(s, "SPACING {h} {h} 1");
    let _ = writeln!(s, "POINT_DATA {}", values.len());
    let _ = writeln!(s, "SCALARS {name} double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for v in values {
        s.push_str(&fmt_f64(*v));
        s.push('\n');
    }
    s
}
