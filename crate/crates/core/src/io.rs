// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV datasets and versioned JSON reports.
//!
//! Dataset CSV: header `label,tau,x1,…,xn`, one series per row, `tau` empty
//! for rows without a change. Values are written with 17 significant digits
//! so a save/load round trip is exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CpdError, Result};
use crate::series::Series;
use crate::simgen::{Example, ExampleMeta, LabelSpace, LabeledDataset};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `{:.16e}`: 17 significant digits, exact for every finite f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> CpdError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CpdError::Io(io),
        other => CpdError::Schema(format!("{other:?}")),
    }
}

pub fn write_dataset<W: Write>(data: &LabeledDataset, w: W) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["label".to_string(), "tau".to_string()];
    header.extend((1..=data.n).map(|i| format!("x{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for e in &data.examples {
        if e.series.len() != data.n {
            return Err(CpdError::ShapeMismatch { expected: data.n, got: e.series.len() });
        }
        let mut row = vec![e.label.to_string(), e.meta.tau.map(|t| t.to_string()).unwrap_or_default()];
        row.extend(e.series.iter().map(|&v| fmt_f64(v)));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(data, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let fields: Vec<&str> = header.iter().collect();
    for (k, want) in ["label", "tau"].iter().enumerate() {
        if fields.get(k) != Some(want) {
            return Err(CpdError::Schema(format!("header: missing column `{want}` at position {}", k + 1)));
        }
    }
    let n = fields.len() - 2;
    for i in 1..=n {
        let want = format!("x{i}");
        if fields[i + 1] != want {
            return Err(CpdError::Schema(format!("header: missing column `{want}` at position {}", i + 2)));
        }
    }
    if n < 2 {
        return Err(CpdError::Schema(format!("header: missing column `x{}`", n + 1)));
    }
    Ok(n)
}

/// Reads a dataset. Binary if every label is 0 or 1, otherwise multiclass
/// with `max(label)` classes; use [`read_dataset_as`] to fix the label space.
pub fn read_dataset<R: Read>(r: R) -> Result<LabeledDataset> {
    read_dataset_impl(r, None)
}

pub fn read_dataset_as<R: Read>(r: R, space: LabelSpace) -> Result<LabeledDataset> {
    read_dataset_impl(r, Some(space))
}

fn read_dataset_impl<R: Read>(r: R, space: Option<LabelSpace>) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(CpdError::Schema("empty file: expected header `label,tau,x1..xn`".into())),
        Some(h) => h.map_err(csv_err)?,
    };
    let n = check_header(&header)?;
    let mut examples = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CpdError::Schema(format!("line {line}: {e}")))?;
        if rec.len() != n + 2 {
            return Err(CpdError::Schema(format!("line {line}: expected {} fields, found {}", n + 2, rec.len())));
        }
        let label: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| CpdError::Schema(format!("line {line}: bad label `{}`", &rec[0])))?;
        let tau = match rec[1].trim() {
            "" => None,
            t => Some(t.parse::<usize>().map_err(|_| CpdError::Schema(format!("line {line}: bad tau `{t}`")))?),
        };
        let values = (2..n + 2)
            .map(|j| {
                rec[j].trim().parse::<f64>().map_err(|_| {
                    CpdError::Schema(format!("line {line}: column x{} is not a number: `{}`", j - 1, &rec[j]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let series = Series::new(values).map_err(|e| CpdError::Schema(format!("line {line}: {e}")))?;
        examples.push(Example { series, label, meta: ExampleMeta::new(tau, 0) });
    }
    let labels = match space {
        Some(s) => s,
        None if examples.iter().all(|e| e.label <= 1) => LabelSpace::Binary,
        None => LabelSpace::Multiclass { classes: examples.iter().map(|e| e.label).max().unwrap_or(1) },
    };
    if let Some((k, e)) = examples.iter().enumerate().find(|(_, e)| !labels.contains(e.label)) {
        return Err(CpdError::Schema(format!("line {}: label {} outside {labels:?}", k + 2, e.label)));
    }
    Ok(LabeledDataset { n, labels, examples })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    read_dataset(fs::File::open(path)?)
}

/// Plot-ready CSV with a header row; numbers via [`fmt_f64`].
pub fn write_table<W: Write>(header: &[&str], rows: &[Vec<String>], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header).map_err(csv_err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(CpdError::ShapeMismatch { expected: header.len(), got: r.len() });
        }
        out.write_record(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Long series CSV: header `t,x` plus any extra named columns.
pub fn write_series<W: Write>(x: &Series, extra: &[(&str, &[f64])], w: W) -> Result<()> {
    let mut header = vec!["t", "x"];
    header.extend(extra.iter().map(|(name, _)| *name));
    let rows: Vec<Vec<String>> = (0..x.len())
        .map(|i| {
            let mut row = vec![(i + 1).to_string(), fmt_f64(x[i])];
            row.extend(extra.iter().map(|(_, col)| fmt_f64(col[i])));
            row
        })
        .collect();
    write_table(&header, &rows, w)
}

/// Reads column `column` of a headered CSV as a series.
pub fn read_series<R: Read>(r: R, column: &str) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(CpdError::Schema("empty file".into()));
    }
    let idx = header
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CpdError::Schema(format!("missing column `{column}`")))?;
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CpdError::Schema(format!("line {}: {e}", k + 2)))?;
        let field = rec.get(idx).ok_or_else(|| CpdError::Schema(format!("line {}: missing field", k + 2)))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| CpdError::Schema(format!("line {}: `{field}` is not a number", k + 2)))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CpdError::Schema("no data rows".into()));
    }
    Series::new(values).map_err(|e| CpdError::Schema(e.to_string()))
}

pub fn load_series(path: impl AsRef<Path>, column: &str) -> Result<Series> {
    read_series(fs::File::open(path)?, column)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with `schema_version` and `kind` fields, newline-terminated.
pub fn report_json<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { schema_version: REPORT_SCHEMA_VERSION, kind, body })?;
    s.push('\n');
    Ok(s)
}

pub fn write_report<T: Serialize>(kind: &str, body: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, report_json(kind, body)?)?;
    Ok(())
}
