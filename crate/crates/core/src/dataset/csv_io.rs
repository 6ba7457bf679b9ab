use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{Dataset, Label, SparseRow};
use crate::error::{Error, Result};

/// Reads a dense CSV: header row, numeric feature columns, and a final 0/1
/// label column. Rows are numbered as file lines, so the first data row is
/// row 2.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub(crate) fn read_csv<R: std::io::Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "missing header row".into(),
        });
    }
    let n_features = header.len() - 1;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let fallback_row = i + 2;
        let record = record.map_err(|e| csv_error(e, fallback_row))?;
        let row_no = record
            .position()
            .map_or(fallback_row, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: row_no,
                column: record.len().min(header.len()) + 1,
                message: format!("expected {} columns, found {}", header.len(), record.len()),
            });
        }
        let mut dense = Vec::with_capacity(n_features);
        for (col, cell) in record.iter().take(n_features).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                column: col + 1,
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: col + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            dense.push(v);
        }
        let label = match record[n_features].trim() {
            "0" => Label::Negative,
            "1" => Label::Positive,
            other => {
                return Err(Error::Parse {
                    row: row_no,
                    column: n_features + 1,
                    message: format!("label must be 0 or 1, found {other:?}"),
                })
            }
        };
        rows.push(SparseRow::from_dense(&dense));
        labels.push(label);
    }

    let data = Dataset::new(rows, labels, n_features)?;
    // Only keep the header as a vocabulary when it is usable as one.
    match data.clone().with_vocabulary(header[..n_features].to_vec()) {
        Ok(named) => Ok(named),
        Err(_) => Ok(data),
    }
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    Error::Parse {
        row: e.position().map_or(row, |p| p.line() as usize),
        column: 0,
        message: e.to_string(),
    }
}

/// Writes a dataset in the format read by [`load_csv`]. Feature names come
/// from the vocabulary when present, otherwise `f0..fN`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(data, file).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_csv_to<W: Write>(data: &Dataset, out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = match data.vocabulary() {
        Some(v) => v.to_vec(),
        None => (0..data.n_features()).map(|i| format!("f{i}")).collect(),
    };
    header.push("label".into());
    writer.write_record(&header)?;
    for (row, label) in data.iter() {
        let mut record: Vec<String> = row
            .to_dense(data.n_features())
            .into_iter()
            .map(|v| {
                if v == 0.0 {
                    "0".to_string()
                } else if v == 1.0 {
                    "1".to_string()
                } else {
                    v.to_string()
                }
            })
            .collect();
        record.push(label.index().to_string());
        writer.write_record(&record)?;
    }
    writer.flush()
}
