//! Dataset CSV and truth JSON.
//!
//! Regression datasets use a header `x0..x{M-1},y0..y{N-1}`; plain datasets
//! have only `x` columns. Values are written with Rust's shortest round-trip
//! float formatting, so write→read→write is byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Dataset, Record, RrrTruth};

pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (m, k) = match &data.records()[0] {
        Record::Plain(x) => (x.len(), 0),
        Record::Pair { x, y } => (x.len(), y.len()),
    };
    let header: Vec<String> = (0..m).map(|i| format!("x{i}")).chain((0..k).map(|j| format!("y{j}"))).collect();
    w.write_record(&header)?;
    for rec in data.records() {
        let row: Vec<String> = match rec {
            Record::Plain(x) => x.iter().map(f64::to_string).collect(),
            Record::Pair { x, y } => x.iter().chain(y).map(f64::to_string).collect(),
        };
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Column `i` of the header must be `x{i}` for the first block and `y{j}`
/// after it.
fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let m = cols.iter().take_while(|c| c.starts_with('x')).count();
    let k = cols.len() - m;
    let expected: Vec<String> = (0..m).map(|i| format!("x{i}")).chain((0..k).map(|j| format!("y{j}"))).collect();
    if m == 0 || cols != expected {
        return Err(Error::Config(format!(
            "dataset header must be x0..x{{M-1}} then y0..y{{N-1}}, got {}",
            cols.join(",")
        )));
    }
    Ok((m, k))
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let (m, k) = parse_header(rdr.headers()?)?;
    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        if row.len() != m + k {
            return Err(Error::Config(format!("row {line} has {} fields, expected {}", row.len(), m + k)));
        }
        let vals = row
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("row {line}: cannot parse {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRecord { index: line });
        }
        records.push(if k == 0 {
            Record::Plain(vals)
        } else {
            Record::Pair { x: vals[..m].to_vec(), y: vals[m..].to_vec() }
        });
    }
    Dataset::new(records)
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset_csv(data, std::fs::File::create(path)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_csv(std::fs::File::open(path)?)
}

pub fn write_truth_json<W: Write>(truth: &RrrTruth, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, truth)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_truth_json<R: Read>(input: R) -> Result<RrrTruth> {
    let truth: RrrTruth = serde_json::from_reader(input)?;
    truth.validate()?;
    Ok(truth)
}
