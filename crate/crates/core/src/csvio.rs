//! Reading and writing study tables as CSV (`label,y,se[,covariate...]`).
//! Lines starting with `#` are comments.

use crate::data::Dataset;
use crate::error::{Error, Result};

const REQUIRED: [&str; 3] = ["label", "y", "se"];

/// Parses a dataset from CSV text. Row numbers in errors are 1-based line
/// numbers of the input.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput);
    }
    let header_line = reader.position().line().max(1) as usize;
    let mut columns = Vec::with_capacity(headers.len());
    for (j, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(Error::Csv {
                row: header_line,
                message: format!("column {} has an empty name", j + 1),
            });
        }
        if columns.contains(&h) {
            return Err(Error::Csv {
                row: header_line,
                message: format!("column `{h}` appears twice"),
            });
        }
        columns.push(h);
    }
    let find = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (label_col, y_col, se_col) = (find(REQUIRED[0])?, find(REQUIRED[1])?, find(REQUIRED[2])?);
    let cov_cols: Vec<usize> = (0..columns.len())
        .filter(|j| ![label_col, y_col, se_col].contains(j))
        .collect();

    let mut labels = Vec::new();
    let mut y = Vec::new();
    let mut se = Vec::new();
    let mut covs: Vec<Vec<f64>> = vec![Vec::new(); cov_cols.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let number = |j: usize| -> Result<f64> {
            let cell = &record[j];
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row,
                message: format!("`{}` is not a number: `{cell}`", columns[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row,
                    message: format!("`{}` is not finite", columns[j]),
                });
            }
            Ok(v)
        };
        let label = record[label_col].to_string();
        if label.is_empty() {
            return Err(Error::Csv {
                row,
                message: "empty study label".into(),
            });
        }
        if labels.contains(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        let s = number(se_col)?;
        if s <= 0.0 {
            return Err(Error::Csv {
                row,
                message: format!("standard error must be positive, got {s}"),
            });
        }
        y.push(number(y_col)?);
        se.push(s);
        for (dst, &j) in covs.iter_mut().zip(&cov_cols) {
            dst.push(number(j)?);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let covariates = cov_cols
        .iter()
        .map(|&j| columns[j].to_string())
        .zip(covs)
        .collect();
    Dataset::with_covariates(labels, y, se, covariates)
}

/// Writes `data` as CSV, preceded by `comments` as `# ` lines. Numbers use
/// the shortest representation that parses back to the same value.
pub fn write_dataset(data: &Dataset, comments: &[&str]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["label".to_string(), "y".into(), "se".into()];
    header.extend(data.covariates().iter().map(|(n, _)| n.clone()));
    writer.write_record(&header).expect("in-memory write");
    for i in 0..data.k() {
        let mut row = vec![
            data.labels()[i].clone(),
            data.y()[i].to_string(),
            data.se()[i].to_string(),
        ];
        row.extend(data.covariates().iter().map(|(_, v)| v[i].to_string()));
        writer.write_record(&row).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&bytes).expect("utf-8 input"));
    out
}
