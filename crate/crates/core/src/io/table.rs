//! Column tables and their CSV form.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! that every value round-trips exactly and reruns compare byte for byte.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
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

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
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

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column by name; text cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let mut table = Table { header, rows: Vec::new() };
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            table.rows.push(rec.iter().map(parse_cell).collect());
        }
        Ok(table)
    }
}

fn parse_cell(s: &str) -> Cell {
    if let Ok(i) = s.parse::<i64>() {
        return Cell::Int(i);
    }
    match s {
        "NaN" => Cell::Num(f64::NAN),
        "inf" => Cell::Num(f64::INFINITY),
        "-inf" => Cell::Num(f64::NEG_INFINITY),
        _ => s.parse::<f64>().map(Cell::Num).unwrap_or_else(|_| Cell::Text(s.to_string())),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI, -2.5e-300, 1e22, 5e-324] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["r", "status", "q0"]);
        t.push(vec![0.5.into(), "ok".into(), 2.0.into()]);
        t.push(vec![2.5.into(), "flat, landscape".into(), f64::NAN.into()]);
        let path = dir.path().join("t.csv");
        t.write_csv(&path).unwrap();
        let back = Table::read_csv(&path).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows[1][1], Cell::Text("flat, landscape".into()));
        assert_eq!(back.column("r").unwrap(), vec![0.5, 2.5]);
        assert!(back.column("q0").unwrap()[1].is_nan());
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("r,status,q0\n5.0000000000000000e-1,ok,"));
    }
}
