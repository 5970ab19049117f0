use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::{CirSample, Environment, CIR_WINDOW};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub delimiter: u8,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { delimiter: b',' }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowRejection {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub samples: Vec<CirSample>,
    pub rejected: Vec<RowRejection>,
}

impl IngestReport {
    pub fn summary(&self) -> String {
        format!(
            "{} samples accepted, {} rows rejected",
            self.samples.len(),
            self.rejected.len()
        )
    }
}

struct Columns {
    true_range: usize,
    measured_range: usize,
    los: usize,
    environment: usize,
    material: usize,
    cir: Vec<usize>,
}

fn locate_columns(headers: &csv::StringRecord) -> Result<Columns> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Dataset(format!("missing column {name:?}")))
    };
    let mut cir: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| {
            h.trim()
                .strip_prefix("cir_")
                .and_then(|n| n.parse::<usize>().ok())
                .map(|n| (n, col))
        })
        .collect();
    cir.sort_unstable();
    if cir.len() < CIR_WINDOW || cir.iter().enumerate().any(|(i, &(n, _))| i != n) {
        return Err(Error::Dataset(format!(
            "expected contiguous columns cir_0..cir_{}, found {}",
            CIR_WINDOW - 1,
            cir.len()
        )));
    }
    Ok(Columns {
        true_range: find("true_range_m")?,
        measured_range: find("measured_range_m")?,
        los: find("los")?,
        environment: find("environment")?,
        material: find("material")?,
        cir: cir.into_iter().map(|(_, col)| col).collect(),
    })
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "los" | "yes" => Ok(true),
        "0" | "false" | "nlos" | "no" => Ok(false),
        other => Err(Error::Dataset(format!("invalid los flag {other:?}"))),
    }
}

fn parse_f64(field: Option<&str>, what: &str) -> Result<f64> {
    let s = field.ok_or_else(|| Error::Dataset(format!("missing {what}")))?;
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("{what}: cannot parse {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Dataset(format!("{what} is not finite")));
    }
    Ok(v)
}

fn parse_row(record: &csv::StringRecord, cols: &Columns) -> Result<CirSample> {
    let present = cols.cir.iter().take_while(|&&c| c < record.len()).count();
    if present < CIR_WINDOW {
        return Err(Error::Dataset(format!(
            "short CIR: {present} samples, need {CIR_WINDOW}"
        )));
    }
    let cir = cols
        .cir
        .iter()
        .enumerate()
        .map(|(i, &c)| parse_f64(record.get(c), &format!("cir_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let field = |c: usize, what: &str| {
        record
            .get(c)
            .ok_or_else(|| Error::Dataset(format!("missing {what}")))
    };
    CirSample::new(
        cir,
        parse_f64(record.get(cols.measured_range), "measured_range_m")?,
        parse_f64(record.get(cols.true_range), "true_range_m")?,
        field(cols.environment, "environment")?.parse::<Environment>()?,
        field(cols.material, "material")?.trim(),
        parse_bool(field(cols.los, "los")?)?,
    )
}

/// Streams a canonical dataset file. Malformed rows are collected in the
/// report with their line numbers; a missing header column fails the
/// whole file.
pub fn ingest_reader<R: Read>(reader: R, options: IngestOptions) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .from_reader(reader);
    let cols = locate_columns(rdr.headers()?)?;
    let mut report = IngestReport::default();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                match parse_row(&record, &cols) {
                    Ok(sample) => report.samples.push(sample),
                    Err(e) => report.rejected.push(RowRejection {
                        line,
                        reason: e.to_string(),
                    }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejected.push(RowRejection {
                    line,
                    reason: e.to_string(),
                });
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(report)
}

pub fn ingest(path: &Path, options: IngestOptions) -> Result<IngestReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(std::io::BufReader::new(file), options)
}

/// Writes samples in the canonical layout, keeping the first
/// [`CIR_WINDOW`] CIR values.
pub fn write_canonical_to<W: Write>(writer: W, samples: &[CirSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        "true_range_m".to_string(),
        "measured_range_m".into(),
        "los".into(),
        "environment".into(),
        "material".into(),
    ];
    header.extend((0..CIR_WINDOW).map(|i| format!("cir_{i}")));
    wtr.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for s in samples {
        row.clear();
        row.push(s.true_range.to_string());
        row.push(s.measured_range.to_string());
        row.push(if s.los { "1" } else { "0" }.into());
        row.push(s.environment.label().into());
        row.push(s.material.clone());
        row.extend(s.cir[..CIR_WINDOW].iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_canonical(path: &Path, samples: &[CirSample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_canonical_to(std::io::BufWriter::new(file), samples)
}
