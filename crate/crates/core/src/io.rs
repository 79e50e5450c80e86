//! CSV and VTK output helpers.
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Shortest-safe text for an `f64`: 17 significant digits in scientific
/// notation, or `inf`/`-inf`/`nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{v:.16e}")
    }
}

/// Quotes a CSV field when it contains a separator, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => csv_field(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "true" } else { "false" }.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// In-memory CSV table with a header row of `name [unit]` columns. Lines end
/// with CRLF per RFC 4180.
#[derive(Clone, Debug)]
pub struct CsvTable {
    header: Vec<String>,
    body: String,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { header: columns.iter().map(|c| c.as_ref().to_string()).collect(), body: String::new() }
    }

    pub fn n_columns(&self) -> usize {
        self.header.len()
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "CSV row width does not match header");
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        let _ = write!(self.body, "{}\r\n", line.join(","));
    }

    pub fn render(&self) -> String {
        let head: Vec<String> = self.header.iter().map(|h| csv_field(h)).collect();
        format!("{}\r\n{}", head.join(","), self.body)
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// Writes through a temporary sibling and renames, so a reader never sees a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        let mut t = CsvTable::new(&["t [s]", "name [-]"]);
        t.push(vec![1.5.into(), "x,y".into()]);
        assert_eq!(t.render(), "t [s],name [-]\r\n1.5000000000000000e0,\"x,y\"\r\n");
    }
}
