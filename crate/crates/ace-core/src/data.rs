//! Named numeric columns of equal length; the training and estimation
//! substrate. Loaded from RFC-4180 CSV with a header row, UTF-8, `.` decimal
//! separator. All values must be finite after ingestion.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::graph::VariableId;
use crate::Real;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate header `{0}`")]
    DuplicateHeader(String),
    #[error("empty header name in column {0}")]
    EmptyHeader(usize),
    #[error("dataset has a header but no rows")]
    EmptyBody,
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: non-finite value")]
    NonFinite { row: usize, column: String },
    #[error("column count mismatch: {got} names for {expected} columns")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("columns must share one length, `{column}` has {got} rows, expected {expected}")]
    LengthMismatch { column: String, got: usize, expected: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable table of named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    names: Vec<VariableId>,
    columns: Vec<Vec<F>>,
    by_name: BTreeMap<VariableId, usize>,
    n_rows: usize,
}

impl<F: Real> Dataset<F> {
    /// Build from columns in the given order.
    pub fn from_columns(
        names: Vec<VariableId>,
        columns: Vec<Vec<F>>,
    ) -> Result<Self, DataError> {
        if names.len() != columns.len() {
            return Err(DataError::ShapeMismatch {
                got: names.len(),
                expected: columns.len(),
            });
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut by_name = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if by_name.insert(name.clone(), i).is_some() {
                return Err(DataError::DuplicateHeader(name.to_string()));
            }
            if columns[i].len() != n_rows {
                return Err(DataError::LengthMismatch {
                    column: name.to_string(),
                    got: columns[i].len(),
                    expected: n_rows,
                });
            }
            for (row, v) in columns[i].iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::NonFinite {
                        row: row + 1,
                        column: name.to_string(),
                    });
                }
            }
        }
        Ok(Dataset {
            names,
            columns,
            by_name,
            n_rows,
        })
    }

    /// Parse a CSV byte stream: header of unique names, numeric body rows.
    pub fn from_csv(reader: impl Read) -> Result<Self, DataError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers = r.headers()?.clone();
        let mut names = Vec::with_capacity(headers.len());
        for (i, h) in headers.iter().enumerate() {
            if h.is_empty() {
                return Err(DataError::EmptyHeader(i + 1));
            }
            let id = VariableId::new(h).map_err(|_| DataError::EmptyHeader(i + 1))?;
            if names.contains(&id) {
                return Err(DataError::DuplicateHeader(h.to_string()));
            }
            names.push(id);
        }
        let mut columns: Vec<Vec<F>> = vec![Vec::new(); names.len()];
        let mut n_rows = 0usize;
        for (row_idx, record) in r.records().enumerate() {
            let record = record?;
            let row = row_idx + 1;
            if record.len() != names.len() {
                return Err(DataError::RaggedRow {
                    row,
                    got: record.len(),
                    expected: names.len(),
                });
            }
            for (col, cell) in record.iter().enumerate() {
                let v: F = cell.trim().parse().map_err(|_| DataError::NonNumeric {
                    row,
                    column: names[col].to_string(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonFinite {
                        row,
                        column: names[col].to_string(),
                    });
                }
                columns[col].push(v);
            }
            n_rows += 1;
        }
        if n_rows == 0 {
            return Err(DataError::EmptyBody);
        }
        let mut by_name = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            by_name.insert(name.clone(), i);
        }
        Ok(Dataset {
            names,
            columns,
            by_name,
            n_rows,
        })
    }

    /// Write as CSV. Values print in the shortest form that parses back to
    /// the identical scalar, so load → write → load is value-exact.
    pub fn to_csv(&self, writer: impl Write) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.names.iter().map(|n| n.as_str()))?;
        for row in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c[row].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[VariableId] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[F], DataError> {
        self.by_name
            .get(name)
            .map(|&i| self.columns[i].as_slice())
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }
}
