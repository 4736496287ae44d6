use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use vulnprop_core::Warning;

use crate::{Common, Format, Internal};

/// Opens `path` for writing, or stdout.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// A report with a tabular form and a structured form.
pub struct Report<'a, D: Serialize> {
    pub header: &'a [&'a str],
    pub rows: Vec<Vec<String>>,
    pub document: D,
}

pub fn emit<D: Serialize>(common: &Common, report: Report<'_, D>) -> Result<()> {
    let mut out = sink(common.out.as_deref())?;
    match common.format {
        Format::Csv => write_csv(&mut out, report.header, &report.rows)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report.document).context(Internal)?;
            writeln!(out).context(Internal)?;
        }
    }
    out.flush().context(Internal)
}

pub fn write_csv(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).context(Internal)?;
    for row in rows {
        w.write_record(row).context(Internal)?;
    }
    w.flush().context(Internal)?;
    Ok(())
}

pub fn csv_file(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = sink(Some(path))?;
    write_csv(&mut out, header, rows)?;
    out.flush().context(Internal)
}

/// Writes warnings as NDJSON, to the configured file or stderr.
pub fn warnings(common: &Common, warnings: &[Warning]) -> Result<()> {
    let mut out: Box<dyn Write> = match &common.warnings {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None if warnings.is_empty() => return Ok(()),
        None => Box::new(io::stderr().lock()),
    };
    for w in warnings {
        serde_json::to_writer(&mut out, w).context(Internal)?;
        writeln!(out).context(Internal)?;
    }
    out.flush().context(Internal)
}

pub fn fraction(x: f64) -> String {
    format!("{x:.6}")
}
