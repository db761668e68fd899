use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{AggregateRow, BenchError, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

const HEADER: [&str; 9] = [
    "shape",
    "alpha",
    "phi",
    "theta",
    "s_star",
    "alpha_achieved",
    "n_trunc",
    "status",
    "time_ns",
];

pub fn write_csv(records: &[Record], out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<Record>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_json(records: &[Record], out: impl Write) -> Result<(), BenchError> {
    serde_json::to_writer(out, records)?;
    Ok(())
}

/// One line per fraction: `alpha,n_av,n_std,t_av_ns,t_std_ns,fallbacks`.
pub fn write_aggregate_csv(row: &AggregateRow, out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for a in &row.per_fraction {
        w.serialize(a)?;
    }
    w.flush()?;
    Ok(())
}

/// Average truncation count per normal: `phi,theta,n_av`.
pub fn write_heatmap_csv(row: &AggregateRow, out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for n in &row.per_normal {
        w.serialize(n)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit(records: &[Record], format: Format, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_csv(records, &mut out)?,
        Format::Json => write_json(records, &mut out)?,
    }
    out.flush()?;
    Ok(())
}
