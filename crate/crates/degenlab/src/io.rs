//! Artifact writing: atomic file replacement and plain numeric CSV.

use crate::error::Result;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

/// Writes `bytes` to `path` through a temporary file in the same directory and a rename,
/// so readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// CSV text with an optional header and one line per row.
pub fn csv_string<R, I>(header: Option<&[&str]>, rows: R) -> String
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = f64>,
{
    let mut s = String::new();
    if let Some(h) = header {
        s.push_str(&h.join(","));
        s.push('\n');
    }
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                s.push(',');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_csv<R, I>(path: &Path, header: Option<&[&str]>, rows: R) -> Result<()>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = f64>,
{
    write_atomic(path, csv_string(header, rows).as_bytes())
}

/// Parses a headerless numeric CSV matrix.
pub fn parse_csv(text: &str) -> std::result::Result<Vec<Vec<f64>>, std::num::ParseFloatError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|c| c.trim().parse::<f64>()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.csv");
        write_csv(&p, Some(&["x", "y"]), vec![vec![1.0, 2.5], vec![f64::INFINITY, -0.0]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "x,y\n1,2.5\ninf,-0\n");
        write_atomic(&p, b"new").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "new");
        let entries: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn csv_roundtrip() {
        let s = csv_string(None, vec![vec![0.1, 1e-300], vec![f64::INFINITY, 3.0]]);
        let m = parse_csv(&s).unwrap();
        assert_eq!(m, vec![vec![0.1, 1e-300], vec![f64::INFINITY, 3.0]]);
    }
}
