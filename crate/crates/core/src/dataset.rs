//! CSV dataset ingestion: a header row, one binary response column, numeric
//! covariates, and an optional categorical group column. Missing values are
//! an error, never imputed.

use std::path::Path;

use crate::error::{Error, Result};
use crate::util::Matrix;

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Covariate column names, in file order (response/group removed).
    pub columns: Vec<String>,
    pub x: Matrix,
    pub y: Vec<u8>,
    pub groups: Option<Vec<String>>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }
}

pub fn load_csv(path: &Path, response: &str, group: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let y_col = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::invalid(format!("response column '{response}' not found")))?;
    let group_col = match group {
        Some(g) => Some(
            headers
                .iter()
                .position(|h| h == g)
                .ok_or_else(|| Error::invalid(format!("group column '{g}' not found")))?,
        ),
        None => None,
    };
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != y_col && Some(*i) != group_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let mut groups = group_col.map(|_| Vec::new());
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::invalid(format!(
                "row {row_idx} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(columns.len());
        for (i, field) in record.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::invalid(format!(
                    "missing value at row {row_idx}, column '{}'",
                    headers[i]
                )));
            }
            if i == y_col {
                match field {
                    "0" | "0.0" => y.push(0),
                    "1" | "1.0" => y.push(1),
                    other => {
                        return Err(Error::invalid(format!(
                            "response at row {row_idx} must be 0 or 1, got '{other}'"
                        )))
                    }
                }
            } else if Some(i) == group_col {
                groups.as_mut().unwrap().push(field.to_string());
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    Error::invalid(format!(
                        "non-numeric value '{field}' at row {row_idx}, column '{}'",
                        headers[i]
                    ))
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("dataset has no data rows"));
    }
    Ok(Dataset { columns, x: Matrix::from_rows(&rows), y, groups })
}

/// Write a covariate grid with named columns.
pub fn write_grid_csv(path: &Path, columns: &[String], grid: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns)?;
    for i in 0..grid.nrows() {
        let row: Vec<String> = grid.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a covariate grid written by [`write_grid_csv`].
pub fn read_grid_csv(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let columns: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let mut rows = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(columns.len());
        for field in record.iter() {
            row.push(field.trim().parse::<f64>().map_err(|_| {
                Error::invalid(format!("non-numeric grid value at row {row_idx}"))
            })?);
        }
        rows.push(row);
    }
    Ok((columns, Matrix::from_rows(&rows)))
}
