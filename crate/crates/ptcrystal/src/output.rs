//! Deterministic CSV artifacts.
//!
//! Every file starts with `# config_sha256=<hex>`, then a header row; floats
//! use nine significant digits in exponent form and lines end in `\n`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // avoid "-0.00000000e0"
        format!("{:.8e}", if v == 0.0 { 0.0 } else { v })
    }
}

pub fn write_csv<W: Write>(out: W, config_hash: &str, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "# config_sha256={config_hash}")?;
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row.iter().map(Cell::render))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, config_hash: &str, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
    write_csv(File::create(path)?, config_hash, header, rows)
}
