//! Tables, reports and the files they end up in.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const REPORT_FILE: &str = "report.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const CURVES_FILE: &str = "curves.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    /// Shortest round-trip text, so equal values always print the same.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format!("{x:e}"),
            Cell::Num(x) => x.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// The `series,x,y` layout used for plot data.
    pub fn curves() -> Self {
        Table::new(&["series", "x", "y"])
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn point(&mut self, series: &str, x: f64, y: f64) {
        self.push(vec![series.into(), x.into(), y.into()]);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// What a scenario produced, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: Table,
    pub curves: Table,
    pub certificates: Map<String, Value>,
}

impl Outcome {
    pub fn new(results: Table) -> Self {
        Outcome {
            results,
            curves: Table::curves(),
            certificates: Map::new(),
        }
    }

    pub fn certify(&mut self, name: &str, value: impl Into<Value>) {
        self.certificates.insert(name.to_string(), value.into());
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Toolkit {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub toolkit: Toolkit,
    pub kind: String,
    pub inputs: Value,
    pub results: Table,
    pub certificates: Map<String, Value>,
    pub curves_rows: usize,
    pub timings: Map<String, Value>,
}

impl RunReport {
    pub fn write(&self, curves: &Table, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        write(dir, REPORT_FILE, json + "\n")?;
        write(dir, RESULTS_FILE, self.results.to_csv()?)?;
        write(dir, CURVES_FILE, curves.to_csv()?)
    }
}

fn write(dir: &Path, name: &str, text: String) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
