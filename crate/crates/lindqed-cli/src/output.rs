//! Atomic result persistence. Every file is staged in a temporary
//! sibling and renamed into place, so a failing run never leaves a
//! partial artifact. Floats are rendered with Rust's shortest
//! round-trip formatting, which makes reruns byte-comparable.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Serializes one record as a CSV row.
pub trait CsvRow {
    fn header() -> &'static str;
    fn row(&self, out: &mut String);
}

/// Formats a float with the shortest representation that round-trips.
/// Negative zero is folded into zero so that sign noise from exact
/// cancellations cannot leak into the byte-stable output.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

/// Writes `content` to `dir/name` atomically (temp file + rename).
pub fn write_atomic(dir: &Path, name: &str, content: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

/// Renders records to CSV text with a header line and trailing newline.
pub fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut out = String::with_capacity(rows.len() * 48 + 64);
    out.push_str(R::header());
    out.push('\n');
    for r in rows {
        r.row(&mut out);
        out.push('\n');
    }
    out
}

/// Renders a report as stable pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
