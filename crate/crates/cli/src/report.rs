use std::fmt::Write as _;

use audit_design::Cents;
use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Human,
    Delimited,
    Structured,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Num(f64),
    Money(Cents),
    Text(String),
    Bool(bool),
    /// Not defined for this row.
    Missing,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Cents> for Cell {
    fn from(v: Cents) -> Self {
        Cell::Money(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

impl Cell {
    /// Full precision, for machine-readable output.
    fn exact(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Money(c) => c.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn human(&self) -> String {
        match self {
            Cell::Num(v) => significant(*v, 6),
            Cell::Missing => "-".into(),
            other => other.exact(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => i64::try_from(*v).map_or_else(|_| Value::String(v.to_string()), Value::from),
            Cell::Num(v) => Value::from(*v),
            Cell::Money(c) => Value::String(c.to_string()),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Missing => Value::Null,
        }
    }
}

fn significant(v: f64, digits: i32) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..15).contains(&mag) {
        return format!("{:.*e}", (digits - 1) as usize, v);
    }
    let decimals = (digits - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "{}", self.name);
        self.rows.push(row);
    }
}

pub fn render(tables: &[Table], format: OutFormat) -> Result<String, String> {
    match format {
        OutFormat::Human => Ok(human(tables)),
        OutFormat::Delimited => delimited(tables),
        OutFormat::Structured => {
            let mut top = Map::new();
            for t in tables {
                let rows = t
                    .rows
                    .iter()
                    .map(|r| Value::Object(t.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect()))
                    .collect();
                top.insert(t.name.to_string(), Value::Array(rows));
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(top)).map_err(|e| e.to_string())?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Tables separated by a blank line, each with its own header.
fn delimited(tables: &[Table]) -> Result<String, String> {
    let mut out = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push(b'\n');
        }
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&t.columns).map_err(|e| e.to_string())?;
        for r in &t.rows {
            w.write_record(r.iter().map(Cell::exact)).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())?;
    }
    String::from_utf8(out).map_err(|e| e.to_string())
}

fn human(tables: &[Table]) -> String {
    let mut s = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "[{}]", t.name);
        if t.rows.len() == 1 {
            let width = t.columns.iter().map(|c| c.len()).max().unwrap_or(0);
            for (c, v) in t.columns.iter().zip(&t.rows[0]) {
                let _ = writeln!(s, "{c:<width$}  {}", v.human());
            }
            continue;
        }
        let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Cell::human).collect()).collect();
        let widths: Vec<usize> = (0..t.columns.len())
            .map(|j| cells.iter().map(|r| r[j].chars().count()).chain([t.columns[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |fields: Vec<&str>| {
            fields.iter().zip(&widths).map(|(f, w)| format!("{f:>w$}")).collect::<Vec<_>>().join("  ")
        };
        let _ = writeln!(s, "{}", line(t.columns.clone()));
        for r in &cells {
            let _ = writeln!(s, "{}", line(r.iter().map(String::as_str).collect()));
        }
    }
    s
}
