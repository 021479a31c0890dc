//! CSV ingestion with strict parsing diagnostics, plus writers for feature
//! matrices and generic tables.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Which columns play which role during ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub outcome: String,
    #[serde(default)]
    pub treatment: Option<String>,
    /// Covariate columns in file order when omitted (everything except the
    /// outcome and treatment columns).
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
}

/// Row count and per-column checksums of an ingested file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestLog {
    pub n_rows: usize,
    pub columns: Vec<ColumnChecksum>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnChecksum {
    pub name: String,
    pub checksum: String,
}

/// FNV-1a over the exact bit patterns of a column's values.
fn column_checksum(values: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Read a headered CSV into a dataset. Every referenced cell must parse as a
/// number; failures report (row, column) coordinates, with rows counted from
/// 1 excluding the header.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<(Dataset, IngestLog)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingest {
                reason: format!("column {name:?} not found in header"),
            })
    };

    let y_col = col_index(&schema.outcome)?;
    let d_col = schema.treatment.as_deref().map(col_index).transpose()?;
    let cov_cols: Vec<usize> = match &schema.covariates {
        Some(names) => names
            .iter()
            .map(|n| col_index(n))
            .collect::<Result<Vec<_>>>()?,
        None => (0..headers.len())
            .filter(|&j| j != y_col && Some(j) != d_col)
            .collect(),
    };
    let cov_names: Vec<String> = cov_cols.iter().map(|&j| headers[j].clone()).collect();

    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    for (ri, record) in reader.records().enumerate() {
        let record = record?;
        let row = ri + 1;
        if record.len() != headers.len() {
            return Err(Error::Ingest {
                reason: format!(
                    "row {row} has {} fields, header has {}",
                    record.len(),
                    headers.len()
                ),
            });
        }
        let parse = |j: usize| -> Result<f64> {
            let raw = record.get(j).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| Error::Ingest {
                reason: format!("non-numeric cell {raw:?} at row {row}, column {:?}", headers[j]),
            })
        };
        y.push(parse(y_col)?);
        if let Some(dc) = d_col {
            d.push(parse(dc)?);
        }
        let mut xr = Vec::with_capacity(cov_cols.len());
        for &j in &cov_cols {
            xr.push(parse(j)?);
        }
        x_rows.push(xr);
    }

    let n = y.len();
    if n == 0 {
        return Err(Error::Ingest {
            reason: "file has no data rows".into(),
        });
    }
    let k = cov_cols.len();
    let mut x = Array2::zeros((n, k));
    for (i, row) in x_rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = v;
        }
    }

    let mut columns = vec![ColumnChecksum {
        name: schema.outcome.clone(),
        checksum: column_checksum(&y),
    }];
    if let Some(t) = &schema.treatment {
        columns.push(ColumnChecksum {
            name: t.clone(),
            checksum: column_checksum(&d),
        });
    }
    for (j, name) in cov_names.iter().enumerate() {
        let col: Vec<f64> = x.column(j).to_vec();
        columns.push(ColumnChecksum {
            name: name.clone(),
            checksum: column_checksum(&col),
        });
    }

    let treatment = if d_col.is_some() {
        Some(Array1::from_vec(d))
    } else {
        None
    };
    let dataset = Dataset::new(Array1::from_vec(y), x, treatment, cov_names)?;
    Ok((dataset, IngestLog { n_rows: n, columns }))
}

/// RFC-4180 quoting for one field.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write a feature matrix as CSV with a metadata comment header.
pub fn write_feature_csv<W: Write>(
    out: &mut W,
    fm: &FeatureMatrix,
    meta: &[(String, String)],
) -> Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    let tags: Vec<String> = fm
        .provenance()
        .iter()
        .map(|p| match p {
            crate::features::Provenance::Raw => "raw".to_string(),
            crate::features::Provenance::Interaction { order } => format!("interaction({order})"),
            crate::features::Provenance::Hadamard { subset_size } => format!("hadamard({subset_size})"),
        })
        .collect();
    writeln!(out, "# provenance={}", tags.join(";"))?;
    let header: Vec<String> = fm.names().iter().map(|n| csv_field(n)).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..fm.nrows() {
        let row: Vec<String> = (0..fm.ncols())
            .map(|j| format_float(fm.values()[[i, j]]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Canonical float formatting used in all CSV output: shortest round-trip
/// representation with a '.' decimal separator.
pub fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// Write a generic table with a comment header.
pub fn write_table_csv<W: Write>(
    out: &mut W,
    meta: &[(String, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(
        out,
        "{}",
        header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",")
    )?;
    for row in rows {
        writeln!(
            out,
            "{}",
            row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn ingest_three_row_fixture() {
        let f = write_tmp("y,d,a,b\n1.5,0,0.1,2\n-2.25,1,0.3,4\n0,0,0.5,6\n");
        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: Some("d".into()),
            covariates: None,
        };
        let (data, log) = ingest_csv(f.path(), &schema).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.k(), 2);
        assert_eq!(data.y().to_vec(), vec![1.5, -2.25, 0.0]);
        assert_eq!(data.x()[[1, 1]], 4.0);
        assert_eq!(data.treatment().unwrap().to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(log.n_rows, 3);
        assert_eq!(log.columns.len(), 4);
    }

    #[test]
    fn ingest_reports_na_coordinates() {
        let f = write_tmp("y,a\n1,2\n3,NA\n");
        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: None,
            covariates: None,
        };
        let err = ingest_csv(f.path(), &schema).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("\"a\""), "{msg}");
    }

    #[test]
    fn ingest_rejects_ragged_rows() {
        let f = write_tmp("y,a\n1,2\n3\n");
        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: None,
            covariates: None,
        };
        let err = ingest_csv(f.path(), &schema).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn ingest_missing_column() {
        let f = write_tmp("y,a\n1,2\n");
        let schema = CsvSchema {
            outcome: "z".into(),
            treatment: None,
            covariates: None,
        };
        let err = ingest_csv(f.path(), &schema).unwrap_err();
        assert!(err.to_string().contains("\"z\""));
    }

    #[test]
    fn large_synthetic_file_checksums_deterministically() {
        let n = 290_000;
        let mut content = String::with_capacity(n * 24);
        content.push_str("y,a,b\n");
        // cheap deterministic generator
        let mut state: u64 = 0x1234_5678_9abc_def0;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            let (y, a, b) = (next(), next(), next());
            content.push_str(&format!("{y},{a},{b}\n"));
        }
        let f = write_tmp(&content);
        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: None,
            covariates: None,
        };
        let (d1, l1) = ingest_csv(f.path(), &schema).unwrap();
        let (_, l2) = ingest_csv(f.path(), &schema).unwrap();
        assert_eq!(d1.n(), n);
        let c1: Vec<&str> = l1.columns.iter().map(|c| c.checksum.as_str()).collect();
        let c2: Vec<&str> = l2.columns.iter().map(|c| c.checksum.as_str()).collect();
        assert_eq!(c1, c2);
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("q\"q"), "\"q\"\"q\"");
    }
}
