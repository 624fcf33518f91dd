//! Rendering of command results as aligned text, tidy CSV or JSON.

use std::fmt::Write as _;

use clap::ValueEnum;
use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned, human-readable tables.
    Table,
    /// Long-form CSV: `table,row,column,value`.
    Csv,
    /// One JSON document.
    Json,
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
}

impl Cell {
    fn text(&self, precise: bool) -> String {
        match self {
            Cell::Num(v) if precise => format!("{v}"),
            Cell::Num(v) => format!("{v:.6}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Flag(b) => json!(b),
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
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
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

/// A labelled grid: one label per row, one header per column.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub row_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Cell>)>,
}

impl Table {
    pub fn new(name: &str, row_header: &str, columns: &[impl AsRef<str>]) -> Self {
        Table {
            name: name.into(),
            row_header: row_header.into(),
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, label: impl Into<String>, cells: Vec<Cell>) -> &mut Self {
        self.rows.push((label.into(), cells));
        self
    }

    /// Key/value pairs as a one-column table.
    pub fn summary(name: &str, pairs: Vec<(&str, Cell)>) -> Self {
        let mut t = Table::new(name, "key", &["value"]);
        for (k, v) in pairs {
            t.row(k, vec![v]);
        }
        t
    }

    pub fn matrix(
        name: &str,
        row_header: &str,
        rows: &[String],
        cols: &[String],
        m: &DMatrix<f64>,
    ) -> Self {
        let mut t = Table::new(name, row_header, cols);
        for (i, label) in rows.iter().enumerate() {
            t.row(
                label.clone(),
                (0..cols.len()).map(|j| Cell::Num(m[(i, j)])).collect(),
            );
        }
        t
    }
}

/// Everything one command emits.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
}

impl Report {
    pub fn push(&mut self, t: Table) -> &mut Self {
        self.tables.push(t);
        self
    }

    pub fn render(&self, command: &str, format: Format) -> String {
        match format {
            Format::Table => self.render_text(),
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(command),
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        for (k, t) in self.tables.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "== {} ==", t.name);
            let mut grid = vec![std::iter::once(t.row_header.clone())
                .chain(t.columns.iter().cloned())
                .collect::<Vec<_>>()];
            for (label, cells) in &t.rows {
                grid.push(
                    std::iter::once(label.clone())
                        .chain(cells.iter().map(|c| c.text(false)))
                        .collect(),
                );
            }
            let widths: Vec<usize> = (0..grid[0].len())
                .map(|c| {
                    grid.iter()
                        .map(|r| r.get(c).map_or(0, |s| s.chars().count()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for r in &grid {
                let line: Vec<String> = r
                    .iter()
                    .enumerate()
                    .map(|(c, s)| {
                        if c == 0 {
                            format!("{s:<w$}", w = widths[c])
                        } else {
                            format!("{s:>w$}", w = widths[c])
                        }
                    })
                    .collect();
                let _ = writeln!(out, "{}", line.join("  ").trim_end());
            }
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["table", "row", "column", "value"])
            .expect("in-memory write");
        for t in &self.tables {
            for (label, cells) in &t.rows {
                for (col, cell) in t.columns.iter().zip(cells) {
                    w.write_record([t.name.as_str(), label, col, &cell.text(true)])
                        .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    fn render_json(&self, command: &str) -> String {
        let mut tables = Map::new();
        for t in &self.tables {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|(label, cells)| {
                    let mut m = Map::new();
                    m.insert(t.row_header.clone(), json!(label));
                    for (col, cell) in t.columns.iter().zip(cells) {
                        m.insert(col.clone(), cell.json());
                    }
                    Value::Object(m)
                })
                .collect();
            tables.insert(
                t.name.clone(),
                json!({ "columns": t.columns, "rows": rows }),
            );
        }
        let mut s = serde_json::to_string_pretty(&json!({ "command": command, "tables": tables }))
            .expect("json");
        s.push('\n');
        s
    }
}
