//! Result tables: CSV emission and report embedding.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    /// An undefined value such as the spread of a single sample. JSON has no
    /// infinities, so non-finite numbers are stored this way.
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(x) => Some(*x),
            Cell::Text(_) | Cell::Missing => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Num(x) => write!(f, "{x:?}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Missing => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Missing
        }
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x.into())
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Allowed deviation when comparing two runs of a table.
///
/// A value passes if it is within `abs` or within `rel` of the baseline.
/// With `sigma` set, columns that have a `<name>_se` companion are compared
/// against `sigma · sqrt(se_a² + se_b²)` instead.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl Tolerance {
    pub fn exact() -> Self {
        Self {
            abs: Some(0.0),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    /// Figure or claim this table reproduces.
    pub figure: String,
    pub tolerance: Tolerance,
    /// Leading columns that identify a row.
    pub key_columns: usize,
    /// Columns ignored by comparison (counts and other bookkeeping).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub info_columns: Vec<String>,
    pub columns: Vec<String>,
    /// Raw rows are written to CSV but left out of the report when false.
    #[serde(default = "yes")]
    pub in_report: bool,
    #[serde(default)]
    pub rows: Vec<Vec<Cell>>,
}

fn yes() -> bool {
    true
}

impl Table {
    pub fn new(name: &str, figure: &str, columns: &[&str], key_columns: usize) -> Self {
        Self {
            name: name.into(),
            figure: figure.into(),
            tolerance: Tolerance::exact(),
            key_columns,
            info_columns: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            in_report: true,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|c| c.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Copy without rows, for reports that omit bulky tables.
    pub fn header_only(&self) -> Self {
        Self {
            rows: Vec::new(),
            ..self.clone()
        }
    }
}
