//! Confidential and synthetic datasets, with CSV interchange.
//!
//! Records are values on the open unit interval. Exact 0/1 values would
//! produce infinite log-likelihoods, so validation clamps each record into
//! `[BOUNDARY_CLAMP, 1 - BOUNDARY_CLAMP]` and reports how many records were
//! touched. Optional named covariate columns turn the plain beta synthesizer
//! into the beta-regression synthesizer downstream.

use std::path::Path;

use crate::error::{Error, Result};

/// Records at exactly 0 or 1 (or within this distance of them) are pulled
/// inside the open interval during validation.
pub const BOUNDARY_CLAMP: f64 = 1e-9;

/// Row-major covariate matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    names: Vec<String>,
    n_rows: usize,
    data: Vec<f64>,
}

impl CovariateMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_cols = names.len();
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in &rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            names,
            n_rows: rows.len(),
            data,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.n_cols();
        &self.data[i * k..(i + 1) * k]
    }
}

/// A validated confidential dataset: values in the open unit interval,
/// optionally with covariates for the regression synthesizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidentialDataset {
    values: Vec<f64>,
    covariates: Option<CovariateMatrix>,
    clamped_records: usize,
}

impl ConfidentialDataset {
    /// Validate univariate records. Values outside `[0, 1]` or non-finite
    /// are rejected; boundary values are clamped inward with a count kept.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, None)
    }

    pub fn new(mut values: Vec<f64>, covariates: Option<CovariateMatrix>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut clamped = 0usize;
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(Error::Domain(format!(
                    "record {i} has value {v}, outside [0, 1]"
                )));
            }
            let c = v.clamp(BOUNDARY_CLAMP, 1.0 - BOUNDARY_CLAMP);
            if c != *v {
                *v = c;
                clamped += 1;
            }
        }
        if let Some(cov) = &covariates {
            if cov.n_rows() != values.len() {
                return Err(Error::DimensionMismatch {
                    expected: values.len(),
                    actual: cov.n_rows(),
                });
            }
            if let Some(bad) = cov.data.iter().find(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite covariate value {bad}")));
            }
        }
        Ok(Self {
            values,
            covariates,
            clamped_records: clamped,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covariates(&self) -> Option<&CovariateMatrix> {
        self.covariates.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// How many records were pulled off the boundary during validation.
    pub fn clamped_records(&self) -> usize {
        self.clamped_records
    }
}

/// Synthetic microdata released by a mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    values: Vec<f64>,
}

impl SyntheticDataset {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Floats in exported files carry 17 significant digits so they parse back
/// to the identical bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Read a dataset from CSV. The header must contain a `value` column; any
/// other columns are treated as named covariates in header order.
pub fn read_csv(path: &Path) -> Result<ConfidentialDataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::ReadFile {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        },
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers()?.clone();
    let value_idx = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!(
                "missing required column `value`; found columns: {}",
                headers.iter().collect::<Vec<_>>().join(", ")
            ),
        })?;
    let cov_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != value_idx)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut values = Vec::new();
    let mut cov_rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}: missing field `{name}`", line + 2),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}, column `{name}`: {e}", line + 2),
                })
        };
        values.push(parse(value_idx, "value")?);
        if !cov_cols.is_empty() {
            let mut row = Vec::with_capacity(cov_cols.len());
            for (idx, name) in &cov_cols {
                row.push(parse(*idx, name)?);
            }
            cov_rows.push(row);
        }
    }

    let covariates = if cov_cols.is_empty() {
        None
    } else {
        Some(CovariateMatrix::new(
            cov_cols.into_iter().map(|(_, n)| n).collect(),
            cov_rows,
        )?)
    };
    ConfidentialDataset::new(values, covariates)
}

/// Write values as a single-column CSV with header `value`.
pub fn write_values_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::from("value\n");
    for v in values {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::WriteFile {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_are_clamped_with_count() {
        let d = ConfidentialDataset::from_values(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(d.clamped_records(), 2);
        assert_eq!(d.values()[0], BOUNDARY_CLAMP);
        assert_eq!(d.values()[2], 1.0 - BOUNDARY_CLAMP);
        assert_eq!(d.values()[1], 0.5);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(ConfidentialDataset::from_values(vec![0.5, 1.2]).is_err());
        assert!(ConfidentialDataset::from_values(vec![-0.1]).is_err());
        assert!(ConfidentialDataset::from_values(vec![f64::NAN]).is_err());
        assert!(ConfidentialDataset::from_values(vec![]).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let vals = vec![0.123456789012345678, 0.5, 1.0 - 1e-9, 7e-8];
        write_values_csv(&path, &vals).unwrap();
        let read = read_csv(&path).unwrap();
        assert_eq!(read.values(), vals.as_slice());
    }

    #[test]
    fn missing_value_column_names_the_problem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "salary\n0.5\n").unwrap();
        let err = read_csv(&path).unwrap_err();
        assert!(err.to_string().contains("value"), "{err}");
    }

    #[test]
    fn covariate_columns_are_collected_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.csv");
        std::fs::write(&path, "gender,value,weeks\n1,0.5,40\n0,0.25,52\n").unwrap();
        let d = read_csv(&path).unwrap();
        let cov = d.covariates().unwrap();
        assert_eq!(cov.names(), ["gender".to_string(), "weeks".to_string()]);
        assert_eq!(cov.row(0), [1.0, 40.0]);
        assert_eq!(cov.row(1), [0.0, 52.0]);
        assert_eq!(d.values(), [0.5, 0.25]);
    }
}
