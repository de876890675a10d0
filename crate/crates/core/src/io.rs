//! Delimited tables with `#` comments and unit-suffixed headers, plus JSON
//! documents written alongside them.
//!
//! A header names its unit with a suffix: `tau_s`, `energy_J`, `field_T`,
//! `rate_per_s`, `omega_rad_per_s`. Columns without a recognized suffix are
//! dimensionless. The first column is the abscissa and must carry a unit.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnUnit {
    Seconds,
    Joules,
    Tesla,
    PerSecond,
    RadPerSecond,
    Dimensionless,
}

impl ColumnUnit {
    /// Unit named by the header suffix. Longer suffixes win.
    pub fn of(name: &str) -> Self {
        for (suffix, unit) in [
            ("_rad_per_s", ColumnUnit::RadPerSecond),
            ("_per_s", ColumnUnit::PerSecond),
            ("_s", ColumnUnit::Seconds),
            ("_J", ColumnUnit::Joules),
            ("_T", ColumnUnit::Tesla),
        ] {
            if name.len() > suffix.len() && name.ends_with(suffix) {
                return unit;
            }
        }
        ColumnUnit::Dimensionless
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ColumnUnit::Seconds => "s",
            ColumnUnit::Joules => "J",
            ColumnUnit::Tesla => "T",
            ColumnUnit::PerSecond => "1/s",
            ColumnUnit::RadPerSecond => "rad/s",
            ColumnUnit::Dimensionless => "1",
        }
    }
}

/// Column-major numeric table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub comments: Vec<String>,
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(headers: &[S]) -> Self {
        Self {
            comments: Vec::new(),
            headers: headers.iter().map(|h| h.as_ref().to_string()).collect(),
            columns: vec![Vec::new(); headers.len()],
        }
    }

    pub fn from_columns<S: AsRef<str>>(headers: &[S], columns: Vec<Vec<f64>>) -> Result<Self> {
        let t = Self {
            comments: Vec::new(),
            headers: headers.iter().map(|h| h.as_ref().to_string()).collect(),
            columns,
        };
        t.check_shape()?;
        Ok(t)
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.headers.len(), "row width must match the header");
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    fn check_shape(&self) -> Result<()> {
        if self.headers.len() != self.columns.len() {
            return Err(Error::invalid("table", format!("{} headers for {} columns", self.headers.len(), self.columns.len())));
        }
        let n = self.len();
        if let Some((h, c)) = self.headers.iter().zip(&self.columns).find(|(_, c)| c.len() != n) {
            return Err(Error::invalid("table", format!("column {h:?} has {} rows, expected {n}", c.len())));
        }
        Ok(())
    }

    /// Validates header units: the abscissa must name one.
    pub fn check_units(&self, path: &str) -> Result<()> {
        match self.headers.first() {
            None => Err(Error::Parse { path: path.into(), line: 1, message: "empty header".into() }),
            Some(h) if ColumnUnit::of(h) == ColumnUnit::Dimensionless => Err(Error::Parse {
                path: path.into(),
                line: 1,
                message: format!("column {h:?} has no unit suffix (expected one of _s, _J, _T, _per_s, _rad_per_s)"),
            }),
            Some(_) => Ok(()),
        }
    }

    /// Floats are written in shortest round-trip form, so reading the text
    /// back reproduces every value bit for bit.
    pub fn to_csv_string(&self) -> Result<String> {
        self.check_shape()?;
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::io("<table>", std::io::Error::other(e));
        w.write_record(&self.headers).map_err(csv_err)?;
        for i in 0..self.len() {
            w.write_record(self.columns.iter().map(|c| format!("{:e}", c[i]))).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<table>", std::io::Error::other(e.to_string())))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let comments: Vec<String> = text
            .lines()
            .take_while(|l| l.trim_start().starts_with('#'))
            .map(|l| l.trim_start().trim_start_matches('#').trim_start().to_string())
            .collect();
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
        let parse_err = |line: usize, message: String| Error::Parse { path: path.into(), line, message };
        let headers: Vec<String> = r
            .headers()
            .map_err(|e| parse_err(e.position().map_or(1, |p| p.line() as usize), e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            return Err(parse_err(comments.len() + 1, "header has an empty column name".into()));
        }
        let mut table = Table::new(&headers);
        table.comments = comments;
        for rec in r.records() {
            let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != headers.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", headers.len(), rec.len())));
            }
            let mut row = Vec::with_capacity(rec.len());
            for (field, h) in rec.iter().zip(&headers) {
                let v: f64 = field.parse().map_err(|_| parse_err(line, format!("column {h:?}: cannot parse {field:?} as a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column {h:?}: value is not finite")));
                }
                row.push(v);
            }
            table.push_row(&row);
        }
        table.check_units(path)?;
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_csv_string()?;
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_csv_string() {
            Ok(s) => f.write_str(&s),
            Err(_) => Err(fmt::Error),
        }
    }
}

/// An abscissa/ordinate pair read from a table, with optional uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub x_name: String,
    pub x_unit: ColumnUnit,
    pub x: Vec<f64>,
    pub y_name: String,
    pub y: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl Trace {
    /// Inverse-variance weights when every uncertainty is positive.
    pub fn weights(&self) -> Option<Vec<f64>> {
        let s = self.stderr.as_ref()?;
        s.iter().all(|v| *v > 0.0).then(|| s.iter().map(|v| 1.0 / (v * v)).collect())
    }
}

/// Reads a trace: the first column is the abscissa; the ordinate is `y_column`
/// or the second column; `<ordinate>_stderr` is picked up when present.
pub fn ingest_trace(path: &Path, y_column: Option<&str>) -> Result<Trace> {
    let table = Table::read(path)?;
    trace_from_table(&table, y_column, &path.display().to_string())
}

pub fn trace_from_table(table: &Table, y_column: Option<&str>, path: &str) -> Result<Trace> {
    table.check_units(path)?;
    let y_name = match y_column {
        Some(n) => n.to_string(),
        None => table
            .headers
            .get(1)
            .cloned()
            .ok_or_else(|| Error::Parse { path: path.into(), line: 1, message: "need an ordinate column".into() })?,
    };
    let y = table.column(&y_name).ok_or_else(|| Error::Parse {
        path: path.into(),
        line: 1,
        message: format!("no column {y_name:?}; columns are {}", table.headers.join(", ")),
    })?;
    Ok(Trace {
        x_name: table.headers[0].clone(),
        x_unit: ColumnUnit::of(&table.headers[0]),
        x: table.columns[0].clone(),
        y_name: y_name.clone(),
        y: y.to_vec(),
        stderr: table.column(&format!("{y_name}_stderr")).map(<[f64]>::to_vec),
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
