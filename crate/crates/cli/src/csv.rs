//! Numeric CSV tables.
//!
//! Values are written with Rust's shortest round-trip `Display` for f64, so
//! reading a file back reproduces every bit (NaN marks a point where the
//! solver had no answer). Files are written to a temporary sibling and
//! renamed into place.

use crate::CliError;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Self { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn render(&self) -> String {
        let mut s = self.headers.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let headers: Vec<String> = lines.next().ok_or("empty file")?.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| format!("row {}: `{c}`: {e}", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != headers.len() {
                return Err(format!("row {} has {} cells, expected {}", i + 1, row.len(), headers.len()));
            }
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    /// Bitwise equality, so NaN cells compare equal to themselves.
    pub fn bit_identical(&self, other: &Table) -> bool {
        self.headers == other.headers
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

/// Writes `contents` to `dir/name` through a temporary file in `dir`.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(&target, e))?;
    tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_is_bit_exact() {
        let mut t = Table::new(vec!["x".into(), "y".into()]);
        t.push(vec![0.1 + 0.2, -1e-300]);
        t.push(vec![f64::NAN, 1.0 / 3.0]);
        t.push(vec![123456789.123456789, f64::MIN_POSITIVE]);
        let back = Table::parse(&t.render()).unwrap();
        assert!(t.bit_identical(&back));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Table::parse("a,b\n1,2\n3\n").is_err());
    }
}
