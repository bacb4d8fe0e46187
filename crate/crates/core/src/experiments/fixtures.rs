//! Embedded reference values, keyed by parameter columns and labeled by the
//! caption of the table they come from.

use super::table::{parse_csv, Cell, Table};
use crate::error::Result;

const SOURCES: &[(&str, &str)] = &[
    ("convergence_h", include_str!("fixtures/convergence_h.csv")),
    ("convergence_sqrt", include_str!("fixtures/convergence_sqrt.csv")),
    ("conditioning_h", include_str!("fixtures/conditioning_h.csv")),
    ("conditioning_h2", include_str!("fixtures/conditioning_h2.csv")),
    ("conditioning_fixed", include_str!("fixtures/conditioning_fixed.csv")),
    ("solver_h2", include_str!("fixtures/solver_h2.csv")),
    ("solver_fixed", include_str!("fixtures/solver_fixed.csv")),
    ("solver_h", include_str!("fixtures/solver_h.csv")),
    ("theta_512", include_str!("fixtures/theta_512.csv")),
    ("theta_2048", include_str!("fixtures/theta_2048.csv")),
    ("adaptive", include_str!("fixtures/adaptive.csv")),
];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub caption: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Fixture {
    fn load(name: &'static str, text: &str) -> Result<Self> {
        let caption = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# reference: "))
            .unwrap_or("")
            .trim()
            .to_string();
        let (columns, rows) = parse_csv(text)?;
        Ok(Self { name, caption, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Reference value of `column` in the row matching `key` (column name, value) pairs.
    pub fn lookup(&self, key: &[(&str, &Cell)], column: &str) -> Option<&str> {
        let c = self.column(column)?;
        let idx: Vec<(usize, &Cell)> =
            key.iter().map(|(k, v)| self.column(k).map(|i| (i, *v))).collect::<Option<_>>()?;
        self.rows
            .iter()
            .find(|row| idx.iter().all(|(i, v)| same(&row[*i], v)))
            .map(|row| row[c].as_str())
            .filter(|s| !s.is_empty())
    }
}

fn same(text: &str, cell: &Cell) -> bool {
    match (text.parse::<f64>(), cell.as_f64()) {
        (Ok(a), Some(b)) => (a - b).abs() <= 1e-12 * a.abs().max(b.abs()),
        _ => text == cell.render(),
    }
}

pub fn all() -> Vec<Fixture> {
    SOURCES.iter().map(|(n, t)| Fixture::load(n, t).expect("embedded fixture parses")).collect()
}

/// Appends `<col>_ref` / `<col>_dev` pairs for every compared column that has
/// at least one reference value, and a `ref_source` caption column.
pub fn annotate(table: &mut Table, fixtures: &[Fixture], compared: &[&str]) {
    let key_names: Vec<String> = table.columns[..table.keys].to_vec();
    let mut sources = vec![Cell::Empty; table.rows.len()];
    for col in compared {
        let Some(ci) = table.column(col) else { continue };
        let mut refs = Vec::with_capacity(table.rows.len());
        let mut devs = Vec::with_capacity(table.rows.len());
        let mut any = false;
        for (r, row) in table.rows.iter().enumerate() {
            let keys: Vec<(&str, &Cell)> =
                key_names.iter().map(|k| k.as_str()).zip(&row[..table.keys]).collect();
            let hit = fixtures.iter().find_map(|f| f.lookup(&keys, col).map(|v| (f, v)));
            match hit {
                Some((f, v)) => {
                    any = true;
                    sources[r] = Cell::Text(f.caption.clone());
                    devs.push(match (v.parse::<f64>(), row[ci].as_f64()) {
                        (Ok(p), Some(m)) if p != 0.0 => Cell::Num((m - p).abs() / p.abs()),
                        _ => Cell::Empty,
                    });
                    refs.push(Cell::Text(v.to_string()));
                }
                None => {
                    refs.push(Cell::Empty);
                    devs.push(Cell::Empty);
                }
            }
        }
        if any {
            table.add_column(&format!("{col}_ref"), refs);
            table.add_column(&format!("{col}_dev"), devs);
        }
    }
    if sources.iter().any(|c| *c != Cell::Empty) {
        table.add_column("ref_source", sources);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load_with_captions() {
        let f = all();
        assert_eq!(f.len(), SOURCES.len());
        for fx in &f {
            assert!(!fx.caption.is_empty(), "{}", fx.name);
            assert!(fx.rows.iter().all(|r| r.len() == fx.columns.len()), "{}", fx.name);
        }
        let counts: Vec<usize> = f.iter().map(|x| x.rows.len()).collect();
        assert_eq!(counts, [48, 36, 24, 24, 32, 48, 24, 16, 20, 20, 48]);
    }

    #[test]
    fn lookup_by_key() {
        let f = all();
        let t1 = f.iter().find(|x| x.name == "convergence_h").unwrap();
        let (a, b, r, n) = (Cell::Param(0.99), Cell::Param(0.6), Cell::Text("h".into()), Cell::Int(64));
        let key = [("alpha", &a), ("beta", &b), ("tau_rule", &r), ("N", &n)];
        assert_eq!(t1.lookup(&key, "error"), Some("1.01E-5"));
        assert_eq!(t1.lookup(&key, "rate"), Some("2.14"));
        let n8 = Cell::Int(8);
        let key = [("alpha", &a), ("beta", &b), ("tau_rule", &r), ("N", &n8)];
        assert_eq!(t1.lookup(&key, "rate"), None);
    }

    #[test]
    fn annotate_adds_deviation() {
        let mut t = Table::new("x", &["alpha", "beta", "tau_rule", "N", "M", "error"], 4);
        t.push(vec![
            Cell::Param(0.99),
            Cell::Param(0.6),
            Cell::Text("h".into()),
            Cell::Int(64),
            Cell::Int(64),
            Cell::Num(1.0201e-5),
        ]);
        t.push(vec![Cell::Param(0.3), Cell::Param(0.6), Cell::Text("h".into()), Cell::Int(64), Cell::Int(64), Cell::Num(1.0)]);
        annotate(&mut t, &all(), &["error", "rate"]);
        assert_eq!(t.columns[6..], ["error_ref", "error_dev", "ref_source"]);
        let dev = t.rows[0][7].as_f64().unwrap();
        assert!((dev - 0.01).abs() < 1e-9, "{dev}");
        assert_eq!(t.rows[1][7], Cell::Empty);
    }
}
