use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::experiment::{Row, RunRecord, SCHEMA_VERSION};
use super::HarnessError;

pub const CSV_COLUMNS: [&str; 17] = [
    "schema",
    "preset",
    "algorithm",
    "target",
    "d",
    "h",
    "tau",
    "gamma",
    "M",
    "N",
    "seed",
    "phi",
    "weak_error",
    "mc_stderr",
    "cost_partials",
    "status",
    "wall_ms",
];

fn write_rows(file: File, rows: &[Row], header: bool, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if header {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `rows` to a fresh file, header first.
pub fn emit_csv(rows: &[Row], path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_rows(file, rows, true, path)
}

/// Appends `rows`, writing the header only if the file is new or empty. An
/// existing file must carry the same header.
pub fn append_csv(rows: &[Row], path: &Path) -> Result<(), HarnessError> {
    let mut first = String::new();
    if let Ok(f) = File::open(path) {
        BufReader::new(f)
            .read_line(&mut first)
            .map_err(|e| HarnessError::io(path, e))?;
    }
    let first = first.trim_end();
    if !first.is_empty() && first != CSV_COLUMNS.join(",") {
        return Err(HarnessError::Header {
            path: path.into(),
            found: first.into(),
        });
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| HarnessError::io(path, e))?;
    write_rows(file, rows, first.is_empty(), path)
}

/// Reads rows back, rejecting other headers and schema versions.
pub fn read_csv(path: &Path) -> Result<Vec<Row>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(HarnessError::Header {
            path: path.into(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let schema: u32 = rec.get(0).unwrap_or("").parse().unwrap_or(0);
        if schema != SCHEMA_VERSION {
            return Err(HarnessError::SchemaMismatch {
                path: path.into(),
                found: schema,
                expected: SCHEMA_VERSION,
            });
        }
        rows.push(rec.deserialize(Some(&header))?);
    }
    Ok(rows)
}

/// Tab-separated `(algorithm, h, saturation_error)`; diverged runs are
/// left out.
pub fn write_saturation_tsv(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from("algorithm\th\tsaturation_error\n");
    for r in records {
        if let Some(s) = r.saturation_error {
            out.push_str(&format!("{}\t{}\t{}\n", r.row.algorithm, r.row.h, s));
        }
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| HarnessError::io(path, e))
}
