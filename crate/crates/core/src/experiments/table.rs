//! Result tables and their CSV / Markdown renderings.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    /// Input parameter, printed in shortest round-trip form.
    Param(f64),
    Int(u64),
    /// Measured value, printed as `%.3E`.
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Param(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => sci(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Param(v) | Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    fn sort_cmp(&self, other: &Cell) -> Ordering {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            _ => self.render().cmp(&other.render()),
        }
    }
}

/// C-style `%.3E`: three decimals and an exponent of at least two digits.
pub fn sci(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NAN".into() } else if v > 0.0 { "INF".into() } else { "-INF".into() };
    }
    let s = format!("{v:.3E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mantissa}E{sign}{digits:0>2}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    /// The first `keys` columns form the parameter tuple of a row.
    pub keys: usize,
    pub rows: Vec<Vec<Cell>>,
    /// Free-form lines carried into the header comment.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str], keys: usize) -> Self {
        Self {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            keys,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.column(name).map(|c| &self.rows[row][c])
    }

    /// Stable sort on the parameter tuple.
    pub fn sort_by_keys(&mut self) {
        let k = self.keys;
        self.rows.sort_by(|a, b| {
            a[..k].iter().zip(&b[..k]).map(|(x, y)| x.sort_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        });
    }

    pub fn add_column(&mut self, name: &str, values: Vec<Cell>) {
        debug_assert_eq!(values.len(), self.rows.len());
        self.columns.push(name.to_string());
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
    }

    /// `true` for wall-time columns, which are excluded from determinism checks.
    pub fn is_timing(name: &str) -> bool {
        name == "T_c" || name.starts_with("T_c_")
    }

    pub fn to_csv(&self, header: &str) -> Result<String> {
        let mut out = String::new();
        for line in header.lines().chain(std::iter::once(self.title.as_str())).chain(self.notes.iter().map(|s| s.as_str())) {
            write!(out, "# {line}\r\n").expect("write to String");
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(bytes).expect("CSV of UTF-8 fields"));
        Ok(out)
    }

    pub fn to_markdown(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            writeln!(out, "<!-- {line} -->").unwrap();
        }
        writeln!(out, "### {}\n", self.title).unwrap();
        let esc = |s: String| s.replace('|', "\\|");
        writeln!(out, "| {} |", self.columns.iter().map(|c| esc(c.clone())).collect::<Vec<_>>().join(" | ")).unwrap();
        writeln!(out, "|{}", "---|".repeat(self.columns.len())).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| esc(c.render())).collect();
            writeln!(out, "| {} |", cells.join(" | ")).unwrap();
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                writeln!(out, "- {n}").unwrap();
            }
        }
        out
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Parses CSV text, skipping `#` comment lines. Returns the header and rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(Error::Config(format!("unknown format '{s}' (csv|markdown)"))),
        }
    }
}

pub fn render(tables: &[Table], format: Format, header: &str) -> Result<String> {
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push_str(if format == Format::Csv { "\r\n" } else { "\n" });
        }
        match format {
            Format::Csv => out.push_str(&t.to_csv(header)?),
            Format::Markdown => out.push_str(&t.to_markdown(header)),
        }
    }
    Ok(out)
}

/// Writes rendered tables to `path`, or stdout when `path` is `None` or `-`.
pub fn emit(tables: &[Table], format: Format, header: &str, path: Option<&Path>) -> Result<()> {
    let text = render(tables, format, header)?;
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, text)?,
        _ => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_scientific() {
        assert_eq!(sci(1.01e-5), "1.010E-05");
        assert_eq!(sci(1.04e2), "1.040E+02");
        assert_eq!(sci(0.0), "0.000E+00");
        assert_eq!(sci(-2.5e-123), "-2.500E-123");
        assert_eq!(sci(9.9996), "1.000E+01");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("empty", &["a", "b"], 1);
        let csv = t.to_csv("v").unwrap();
        assert_eq!(csv, "# v\r\n# empty\r\na,b\r\n");
        let (h, rows) = parse_csv(&csv).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert!(rows.is_empty());
    }

    #[test]
    fn csv_round_trip_with_quoting() {
        let mut t = Table::new("t", &["k", "v", "note"], 1);
        t.push(vec![Cell::Param(0.5), Cell::Num(1.5e-3), Cell::Text("a, \"b\"".into())]);
        t.push(vec![Cell::Param(0.25), Cell::Empty, Cell::Int(7)]);
        let (h, rows) = parse_csv(&t.to_csv("x\ny").unwrap()).unwrap();
        assert_eq!(h, t.columns);
        assert_eq!(rows[0], vec!["0.5", "1.500E-03", "a, \"b\""]);
        assert_eq!(rows[1], vec!["0.25", "", "7"]);
    }

    #[test]
    fn sort_is_stable_on_keys() {
        let mut t = Table::new("t", &["k", "v"], 1);
        for (k, v) in [(2.0, 1), (1.0, 2), (2.0, 3), (1.0, 4)] {
            t.push(vec![Cell::Param(k), Cell::Int(v)]);
        }
        t.sort_by_keys();
        let v: Vec<_> = t.rows.iter().map(|r| r[1].render()).collect();
        assert_eq!(v, ["2", "4", "1", "3"]);
    }

    #[test]
    fn markdown_layout() {
        let mut t = Table::new("T", &["M", "its"], 1);
        t.push(vec![Cell::Int(8), Cell::Int(3)]);
        let md = t.to_markdown("h");
        assert!(md.contains("| M | its |\n|---|---|\n| 8 | 3 |"));
    }
}
