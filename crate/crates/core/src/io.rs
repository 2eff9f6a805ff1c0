//! Dataset CSV and parameter JSON files.
//!
//! Datasets use the header `x1,...,xd` plus an optional `label` column.
//! Labels in files are 1-based, matching the usual `k = 1..K` numbering;
//! in memory they are 0-based.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Dataset, GmmParams};
use crate::scalar::Scalar;

pub fn read_dataset_csv<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    parse_dataset_csv(std::fs::File::open(path)?)
}

pub fn parse_dataset_csv<T: Scalar, R: std::io::Read>(reader: R) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let has_label = header.iter().next_back() == Some("label");
    let d = header.len() - usize::from(has_label);
    if d == 0 {
        return Err(Error::Dataset("no coordinate columns".into()));
    }
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("x{}", j + 1) {
            return Err(Error::Dataset(format!("column {} should be x{}, found {name:?}", j + 1, j + 1)));
        }
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |j: usize| -> Result<f64> {
            record[j].parse::<f64>().map_err(|_| Error::Dataset(format!("row {}: bad number {:?}", i + 1, &record[j])))
        };
        for j in 0..d {
            values.push(T::of(field(j)?));
        }
        if has_label {
            let l: usize = record[d]
                .parse()
                .ok()
                .filter(|&l| l >= 1)
                .ok_or_else(|| Error::Dataset(format!("row {}: labels must be integers from 1", i + 1)))?;
            labels.push(l - 1);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() / d;
    Dataset::new(Matrix::from_vec(n, d, values)?, has_label.then_some(labels))
}

pub fn write_dataset_csv<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    if data.true_labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, y) in data.iter().enumerate() {
        let mut row: Vec<String> = y.iter().map(|v| v.f64().to_string()).collect();
        if let Some(labels) = data.true_labels() {
            row.push((labels[i] + 1).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `{"weights", "means", "covariances"}` and checks the shapes agree.
pub fn read_params_json<T: Scalar>(path: &Path) -> Result<GmmParams<T>> {
    let raw: GmmParams<T> = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    GmmParams::new(raw.weights, raw.means, raw.covariances)
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
