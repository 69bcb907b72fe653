//! Plain-text point, rule and model files.
//!
//! All formats are line oriented: values separated by whitespace (commas are
//! accepted too), `#` starts a comment, and `# key=value` lines at the top
//! carry metadata. Floats are written in Rust's shortest round-trip form, so
//! a write/read cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, WsfError};
use crate::geometry::{norm, PointSet};

/// Rows whose raw norm deviates from 1 by more than this are rejected.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Parsed numeric table plus `# key=value` metadata.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
    pub line_numbers: Vec<usize>,
}

impl Table {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn parse_table(text: &str, path: &Path, columns: usize) -> Result<Table> {
    let mut table = Table::default();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let (body, comment) = match line.find('#') {
            Some(pos) => (&line[..pos], Some(&line[pos + 1..])),
            None => (line, None),
        };
        if let Some(c) = comment {
            if let Some((k, v)) = c.trim().split_once('=') {
                table.meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        let fields: Vec<&str> = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != columns {
            return Err(WsfError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected {columns} values, found {}", fields.len()),
            });
        }
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| WsfError::Parse {
                        path: path.to_path_buf(),
                        line: lineno,
                        message: format!("not a finite number: {f:?}"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        table.rows.push(row);
        table.line_numbers.push(lineno);
    }
    Ok(table)
}

pub fn read_table(path: &Path, columns: usize) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| WsfError::io(path, e))?;
    parse_table(&text, path, columns)
}

/// Unit vectors from the first three columns, rejecting rows that are not
/// unit length before renormalization.
fn points_from_rows(table: &Table, path: &Path) -> Result<PointSet> {
    if table.rows.is_empty() {
        return Err(WsfError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "file contains no points".into(),
        });
    }
    let mut xyz = Vec::with_capacity(table.rows.len());
    for (row, &line) in table.rows.iter().zip(&table.line_numbers) {
        let p = [row[0], row[1], row[2]];
        let n = norm(&p);
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(WsfError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("point has norm {n}, expected 1"),
            });
        }
        xyz.push(p);
    }
    PointSet::from_xyz(&xyz)
}

/// Reads `x y z` rows.
pub fn read_points(path: &Path) -> Result<PointSet> {
    let table = read_table(path, 3)?;
    points_from_rows(&table, path)
}

/// Reads `x y z value` rows.
pub fn read_labeled_points(path: &Path) -> Result<(PointSet, Vec<f64>)> {
    let table = read_table(path, 4)?;
    let points = points_from_rows(&table, path)?;
    let values = table.rows.iter().map(|r| r[3]).collect();
    Ok((points, values))
}

/// Formats `x y z [extra...]` rows under optional metadata lines.
pub fn format_rows(meta: &[(&str, String)], points: &PointSet, extra: &[&[f64]]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    for (i, p) in points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p[0], p[1], p[2]);
        for col in extra {
            let _ = write!(out, " {}", col[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| WsfError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| WsfError::io(path, e))
}

pub fn write_points(path: &Path, points: &PointSet, comment: Option<&str>) -> Result<()> {
    let mut text = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(text, "# {line}");
        }
    }
    text.push_str(&format_rows(&[], points, &[]));
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_metadata_and_commas() {
        let text = "# degree=4\n# free text\n1 0 0 0.5\n\n0,1,0,0.25 # trailing\n";
        let t = parse_table(text, Path::new("mem"), 4).unwrap();
        assert_eq!(t.meta("degree"), Some("4"));
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.line_numbers, vec![3, 5]);
        assert_eq!(t.rows[1], vec![0.0, 1.0, 0.0, 0.25]);
    }

    #[test]
    fn reports_bad_line_numbers() {
        let err = parse_table("1 0 0\n0 1\n", Path::new("p.txt"), 3).unwrap_err();
        match err {
            WsfError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_table("1 0 zz\n", Path::new("p.txt"), 3).unwrap_err();
        assert!(err.to_string().contains("p.txt:1"));
    }

    #[test]
    fn rejects_empty_and_non_unit_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.txt");
        fs::write(&empty, "# nothing\n").unwrap();
        assert!(read_points(&empty).is_err());

        let off = dir.path().join("off.txt");
        fs::write(&off, "1 0 0\n0 2 0\n").unwrap();
        match read_points(&off).unwrap_err() {
            WsfError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_read_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let pts = crate::geometry::sample_random(50, 1).unwrap();
        let path = dir.path().join("pts.txt");
        write_points(&path, &pts, Some("fifty random points")).unwrap();
        let back = read_points(&path).unwrap();
        assert_eq!(back.len(), pts.len());
        for (a, b) in back.iter().zip(pts.iter()) {
            assert!(crate::geometry::chord_distance(a, b) < 1e-15);
        }
    }
}
