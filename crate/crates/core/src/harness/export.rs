//! Record export: CSV with a fixed column order and nine-significant-digit
//! floats, or JSON lines with identical field names. Import reverses both.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, SimError};

use super::{fmt_sig9, EstimatorKind, TrialRecord, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl std::str::FromStr for ExportFormat {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" | "json-lines" | "ndjson" => Ok(ExportFormat::JsonLines),
            other => Err(SimError::Parse(format!(
                "unknown export format `{other}` (expected csv or jsonl)"
            ))),
        }
    }
}

/// Write records to a writer. Empty record sets are an explicit error; a
/// sweep that produced nothing indicates a broken scenario, not an empty
/// result.
pub fn export_to_writer<W: Write>(
    records: &[TrialRecord],
    format: ExportFormat,
    writer: W,
) -> Result<()> {
    if records.is_empty() {
        return Err(SimError::EmptyInput("export"));
    }
    match format {
        ExportFormat::Csv => export_csv(records, writer),
        ExportFormat::JsonLines => export_jsonl(records, writer),
    }
}

/// Write records to a file; see [`export_to_writer`].
pub fn export(records: &[TrialRecord], format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    export_to_writer(records, format, std::io::BufWriter::new(file))
}

fn export_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)
        .map_err(|e| SimError::Parse(e.to_string()))?;
    for r in records {
        w.write_record(&[
            fmt_sig9(r.distance_true_m),
            fmt_sig9(r.snr_db),
            r.m.to_string(),
            r.estimator.to_string(),
            fmt_sig9(r.d_hat_m),
            fmt_sig9(r.error_m),
            fmt_sig9(r.rtt_samples),
            r.ta.to_string(),
            r.p_d.to_string(),
            r.nu.to_string(),
            r.root_used.to_string(),
            r.seed.to_string(),
            r.status.clone(),
        ])
        .map_err(|e| SimError::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn export_jsonl<W: Write>(records: &[TrialRecord], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(|e| SimError::Parse(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read records back from a CSV or JSON-lines export (sniffed from the
/// first byte).
pub fn import(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path)?;
    let first = text.trim_start().chars().next();
    match first {
        Some('{') => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| SimError::Parse(e.to_string())))
            .collect(),
        Some(_) => import_csv(&text),
        None => Err(SimError::EmptyInput("import")),
    }
}

fn parse_float(s: &str) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        other => other
            .parse()
            .map_err(|e| SimError::Parse(format!("bad float `{other}`: {e}"))),
    }
}

fn import_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SimError::Parse(e.to_string()))?
        .clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(SimError::Parse(format!(
            "unexpected CSV header: {headers:?}"
        )));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| SimError::Parse(e.to_string()))?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| SimError::Parse(format!("missing column {i}")))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)?
                .parse()
                .map_err(|e| SimError::Parse(format!("bad integer in column {i}: {e}")))
        };
        out.push(TrialRecord {
            distance_true_m: parse_float(field(0)?)?,
            snr_db: parse_float(field(1)?)?,
            m: int(2)? as usize,
            estimator: field(3)?.parse::<EstimatorKind>()?,
            d_hat_m: parse_float(field(4)?)?,
            error_m: parse_float(field(5)?)?,
            rtt_samples: parse_float(field(6)?)?,
            ta: int(7)? as u32,
            p_d: int(8)? as u32,
            nu: int(9)? as usize,
            root_used: int(10)? as usize,
            seed: int(11)?,
            status: field(12)?.to_string(),
        });
    }
    Ok(out)
}
