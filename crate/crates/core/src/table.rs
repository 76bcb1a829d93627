//! Plain CSV tables with full-precision floats, plus atomic file writes.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats `v` with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_header<W: Write + ?Sized>(w: &mut W, columns: &[&str]) -> io::Result<()> {
    writeln!(w, "{}", columns.join(","))
}

pub fn write_row<W: Write + ?Sized>(w: &mut W, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(fmt_f64(v).as_bytes())?;
    }
    w.write_all(b"\n")
}

/// Header and numeric rows of a CSV table. Every row must have as many
/// fields as the header.
pub fn read_table<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::Parse(e.to_string()))?,
        None => return Err(Error::Parse("empty table".into())),
    };
    let columns: Vec<String> = header.trim().split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 2)))?;
        if row.len() != columns.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, found {}",
                idx + 2,
                columns.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok((columns, rows))
}

/// Writes `path` through a sibling temporary file and a rename, so readers
/// never observe a partially written file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);

    let result = (|| {
        let file = fs::File::create(&tmp)?;
        let mut buf = io::BufWriter::new(file);
        write(&mut buf)?;
        let file = buf.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::io(path, e))
}
