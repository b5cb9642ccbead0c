//! Tabular output in CSV, JSON or Markdown with fixed number formatting.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Markdown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => sig6(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Num(v) if v.is_finite() => {
                serde_json::from_str(&sig6(*v)).unwrap_or(Value::Null)
            }
            Cell::Num(v) => Value::String(sig6(*v)),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

/// Six significant digits, fixed notation for magnitudes in [1e-4, 1e15).
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mut mag = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&mag) {
        return format!("{x:.5e}");
    }
    // Rounding can carry into the next decade (9.999996 -> 10.0000).
    if (x.abs() * 10f64.powi(5 - mag)).round() >= 1e6 {
        mag += 1;
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with("-0") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Table {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// A command's output: the effective configuration plus one or more tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.into(),
            config: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.render_csv(),
            OutputFormat::Markdown => self.render_markdown(),
            OutputFormat::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = format!("# prevtrial {}\n", self.command);
        for (k, v) in &self.config {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        for (i, table) in self.tables.iter().enumerate() {
            if self.tables.len() > 1 {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&format!("# table: {}\n", table.name));
            }
            out.push_str(&csv_line(table.headers.iter().map(String::as_str)));
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(Cell::render).collect();
                out.push_str(&csv_line(cells.iter().map(String::as_str)));
            }
        }
        out
    }

    fn render_markdown(&self) -> String {
        let mut out = format!("<!--\nprevtrial {}\n", self.command);
        for (k, v) in &self.config {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push_str("-->\n");
        for table in &self.tables {
            out.push_str(&format!("\n### {}\n\n", table.name));
            out.push_str(&format!("| {} |\n", table.headers.join(" | ")));
            out.push_str(&format!(
                "|{}\n",
                table.headers.iter().map(|_| "---|").collect::<String>()
            ));
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|c| c.render().replace('|', "\\|")).collect();
                out.push_str(&format!("| {} |\n", cells.join(" | ")));
            }
        }
        out
    }

    fn render_json(&self) -> String {
        let mut config = Map::new();
        for (k, v) in &self.config {
            config.insert(k.clone(), Value::String(v.clone()));
        }
        let mut tables = Map::new();
        for table in &self.tables {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut obj = Map::new();
                    for (h, c) in table.headers.iter().zip(row) {
                        obj.insert(h.clone(), c.json());
                    }
                    Value::Object(obj)
                })
                .collect();
            tables.insert(table.name.clone(), Value::Array(rows));
        }
        let mut root = Map::new();
        root.insert("command".into(), Value::String(self.command.clone()));
        root.insert("config".into(), Value::Object(config));
        root.insert("tables".into(), Value::Object(tables));
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("serializable");
        s.push('\n');
        s
    }
}

fn csv_line<'a>(cells: impl Iterator<Item = &'a str>) -> String {
    let quoted: Vec<String> = cells
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.to_string()
            }
        })
        .collect();
    format!("{}\n", quoted.join(","))
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e| Error::io(path.display().to_string(), e);
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("output", "path has no file name"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0280582), "0.0280582");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(2071.0), "2071.00");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(-0.5), "-0.500000");
        assert_eq!(sig6(1.5e-7), "1.50000e-7");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quotes_commas() {
        assert_eq!(csv_line(["a", "b,c"].into_iter()), "a,\"b,c\"\n");
    }

    #[test]
    fn renders_all_formats() {
        let mut r = Report::new("demo");
        r.config("seed", 7);
        let mut t = Table::new("rows", &["name", "n", "rate"]);
        t.push(vec!["x".into(), Cell::Int(3), Cell::Num(0.25)]);
        r.tables.push(t);
        assert_eq!(
            r.render(OutputFormat::Csv),
            "# prevtrial demo\n# seed: 7\nname,n,rate\nx,3,0.250000\n"
        );
        assert!(r.render(OutputFormat::Markdown).contains("| x | 3 | 0.250000 |"));
        let v: Value = serde_json::from_str(&r.render(OutputFormat::Json)).unwrap();
        assert_eq!(v["tables"]["rows"][0]["rate"], 0.25);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
