//! Study-level data, covariate design matrices and coefficient contrasts.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky};

/// Label given to the all-ones column of every design built from covariates.
pub const INTERCEPT: &str = "intercept";

/// Effect estimates `y` with known standard errors `se`, one row per study,
/// plus optional named covariate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labels: Vec<String>,
    y: Vec<f64>,
    se: Vec<f64>,
    covariates: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn new(labels: Vec<String>, y: Vec<f64>, se: Vec<f64>) -> Result<Self> {
        Self::with_covariates(labels, y, se, Vec::new())
    }

    pub fn with_covariates(
        labels: Vec<String>,
        y: Vec<f64>,
        se: Vec<f64>,
        covariates: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let k = labels.len();
        if k == 0 {
            return Err(Error::EmptyDataset);
        }
        check_len("y", k, y.len())?;
        check_len("se", k, se.len())?;
        let mut seen = HashSet::with_capacity(k);
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        for i in 0..k {
            if !y[i].is_finite() {
                return Err(non_finite(&labels[i], "y"));
            }
            if !se[i].is_finite() {
                return Err(non_finite(&labels[i], "se"));
            }
            if se[i] <= 0.0 {
                return Err(Error::NonPositiveStdErr {
                    label: labels[i].clone(),
                    value: se[i],
                });
            }
        }
        let mut names = HashSet::new();
        for (name, values) in &covariates {
            if !names.insert(name.as_str()) || name == "label" || name == "y" || name == "se" {
                return Err(Error::Domain(format!("duplicate column name `{name}`")));
            }
            check_len(name, k, values.len())?;
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(non_finite(&labels[i], name));
            }
        }
        Ok(Self {
            labels,
            y,
            se,
            covariates,
        })
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn se(&self) -> &[f64] {
        &self.se
    }

    pub fn covariates(&self) -> &[(String, Vec<f64>)] {
        &self.covariates
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Copy of the dataset with the study at `index` removed.
    pub fn without_index(&self, index: usize) -> Result<Self> {
        if index >= self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                found: index,
            });
        }
        if self.k() == 1 {
            return Err(Error::EmptyDataset);
        }
        let drop = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .filter(|&(i, _)| i != index)
                .map(|(_, x)| *x)
                .collect()
        };
        Ok(Self {
            labels: self
                .labels
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != index)
                .map(|(_, l)| l.clone())
                .collect(),
            y: drop(&self.y),
            se: drop(&self.se),
            covariates: self
                .covariates
                .iter()
                .map(|(n, v)| (n.clone(), drop(v)))
                .collect(),
        })
    }

    pub fn without(&self, label: &str) -> Result<Self> {
        self.without_index(self.index_of(label)?)
    }

    /// Inverse-variance weights `1 / (s_i² + τ²)`.
    pub fn weights(&self, tau: f64) -> Vec<f64> {
        let t2 = tau * tau;
        self.se.iter().map(|s| 1.0 / (s * s + t2)).collect()
    }
}

fn check_len(column: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            column: column.to_string(),
            expected,
            found,
        })
    }
}

fn non_finite(label: &str, field: &str) -> Error {
    Error::NonFinite {
        label: label.to_string(),
        field: field.to_string(),
    }
}

/// A `k × p` design matrix of full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    column_labels: Vec<String>,
}

impl DesignMatrix {
    /// All-ones single column; the plain random-effects meta-analysis.
    pub fn intercept_only(k: usize) -> Self {
        Self {
            rows: k,
            cols: 1,
            values: vec![1.0; k],
            column_labels: vec![INTERCEPT.to_string()],
        }
    }

    /// Intercept followed by the named covariate columns of `data`, in order.
    /// An empty `names` list yields exactly [`DesignMatrix::intercept_only`].
    pub fn from_covariates<S: AsRef<str>>(data: &Dataset, names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Ok(Self::intercept_only(data.k()));
        }
        let mut labels = vec![INTERCEPT.to_string()];
        let mut columns: Vec<&[f64]> = Vec::with_capacity(names.len());
        for name in names {
            let name = name.as_ref();
            let col = data
                .covariate(name)
                .ok_or_else(|| Error::UnknownCovariate(name.to_string()))?;
            labels.push(name.to_string());
            columns.push(col);
        }
        let rows: Vec<Vec<f64>> = (0..data.k())
            .map(|i| {
                std::iter::once(1.0)
                    .chain(columns.iter().map(|c| c[i]))
                    .collect()
            })
            .collect();
        Self::from_rows(&rows, labels)
    }

    pub fn from_rows(rows: &[Vec<f64>], column_labels: Vec<String>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::EmptyDataset);
        }
        let p = column_labels.len();
        if p == 0 {
            return Err(Error::Domain(
                "design matrix needs at least one column".into(),
            ));
        }
        let mut values = Vec::with_capacity(k * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("design matrix entries must be finite".into()));
            }
            values.extend_from_slice(row);
        }
        let design = Self {
            rows: k,
            cols: p,
            values,
            column_labels,
        };
        if k < p {
            return Err(Error::Dimension {
                expected: p,
                found: k,
            });
        }
        design.check_rank(&vec![1.0; k])?;
        Ok(design)
    }

    pub fn k(&self) -> usize {
        self.rows
    }

    pub fn p(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    pub fn is_intercept_only(&self) -> bool {
        self.cols == 1 && self.values.iter().all(|&v| v == 1.0)
    }

    /// Copy with row `index` removed. Fails if the reduced design loses rank.
    pub fn without_row(&self, index: usize) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .filter(|&i| i != index)
            .map(|i| self.row(i).to_vec())
            .collect();
        Self::from_rows(&rows, self.column_labels.clone())
    }

    /// Row-major `Xᵀ W X` for diagonal weights `w`.
    pub(crate) fn weighted_gram(&self, w: &[f64]) -> Vec<f64> {
        let p = self.cols;
        let mut a = vec![0.0; p * p];
        for (i, wi) in w.iter().enumerate() {
            let x = self.row(i);
            for r in 0..p {
                let xr = wi * x[r];
                for c in 0..=r {
                    a[r * p + c] += xr * x[c];
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                a[c * p + r] = a[r * p + c];
            }
        }
        a
    }

    pub(crate) fn weighted_cross(&self, w: &[f64], y: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.cols];
        for i in 0..self.rows {
            let x = self.row(i);
            let wy = w[i] * y[i];
            for (bj, xj) in b.iter_mut().zip(x) {
                *bj += wy * xj;
            }
        }
        b
    }

    /// Factors `Xᵀ W X`, translating a failed pivot into a rank error that
    /// names the offending column and the columns it depends on.
    pub(crate) fn factor_gram(&self, w: &[f64]) -> Result<(Vec<f64>, Cholesky)> {
        let gram = self.weighted_gram(w);
        match Cholesky::factor(&gram, self.cols) {
            Ok(chol) => Ok((gram, chol)),
            Err(j) => Err(self.rank_error(&gram, j)),
        }
    }

    fn check_rank(&self, w: &[f64]) -> Result<()> {
        self.factor_gram(w).map(|_| ())
    }

    fn rank_error(&self, gram: &[f64], j: usize) -> Error {
        let p = self.cols;
        let mut collinear_with = Vec::new();
        if j > 0 {
            // Regress column j on the preceding (well-conditioned) block.
            let lead: Vec<f64> = (0..j)
                .flat_map(|r| (0..j).map(move |c| (r, c)))
                .map(|(r, c)| gram[r * p + c])
                .collect();
            if let Ok(chol) = Cholesky::factor(&lead, j) {
                let rhs: Vec<f64> = (0..j).map(|r| gram[r * p + j]).collect();
                let coef = chol.solve(&rhs);
                let scale = coef.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
                for (c, v) in coef.iter().enumerate() {
                    if v.abs() > 1e-8 * scale.max(1e-300) {
                        collinear_with.push(self.column_labels[c].clone());
                    }
                }
            }
        }
        Error::RankDeficient {
            column: self.column_labels[j].clone(),
            collinear_with,
        }
    }

    /// Unweighted least-squares coefficients; the `τ → ∞` limit of the
    /// weighted fit. For an intercept-only design this is the arithmetic mean.
    pub fn ols_coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        let w = vec![1.0; self.rows];
        let (_, chol) = self.factor_gram(&w)?;
        Ok(chol.solve(&self.weighted_cross(&w, y)))
    }
}

/// A labelled linear combination `cᵀβ` of the regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    label: String,
    coefficients: Vec<f64>,
}

impl Contrast {
    pub fn new(label: impl Into<String>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().all(|&c| c == 0.0) {
            return Err(Error::Domain(
                "contrast needs at least one nonzero coefficient".into(),
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("contrast coefficients must be finite".into()));
        }
        Ok(Self {
            label: label.into(),
            coefficients,
        })
    }

    /// Unit vector selecting coefficient `j` of a `p`-column design.
    pub fn coefficient(design: &DesignMatrix, j: usize) -> Self {
        let mut c = vec![0.0; design.p()];
        c[j] = 1.0;
        Self {
            label: design.column_labels()[j].clone(),
            coefficients: c,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Value of the contrast at coefficient vector `beta`.
    pub fn apply(&self, beta: &[f64]) -> f64 {
        linalg::dot(&self.coefficients, beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn rejects_bad_rows() {
        let err = Dataset::new(labels(2), vec![1.0, 2.0], vec![1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveStdErr { ref label, .. } if label == "s1"));
        let err =
            Dataset::new(vec!["a".into(), "a".into()], vec![1.0, 2.0], vec![1.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::DuplicateLabel("a".into()));
        let err = Dataset::new(labels(2), vec![1.0, f64::NAN], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!(
            Dataset::new(vec![], vec![], vec![]).unwrap_err(),
            Error::EmptyDataset
        );
    }

    #[test]
    fn collinear_columns_are_named() {
        let data = Dataset::with_covariates(
            labels(4),
            vec![0.0; 4],
            vec![1.0; 4],
            vec![
                ("a".into(), vec![0.0, 1.0, 0.0, 1.0]),
                ("b".into(), vec![1.0, 0.0, 1.0, 0.0]),
            ],
        )
        .unwrap();
        match DesignMatrix::from_covariates(&data, &["a", "b"]).unwrap_err() {
            Error::RankDeficient {
                column,
                collinear_with,
            } => {
                assert_eq!(column, "b");
                assert_eq!(
                    collinear_with,
                    vec!["intercept".to_string(), "a".to_string()]
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_many_columns_is_a_dimension_error() {
        let rows = vec![vec![1.0, 0.0, 2.0]];
        let err =
            DesignMatrix::from_rows(&rows, vec!["a".into(), "b".into(), "c".into()]).unwrap_err();
        assert_eq!(
            err,
            Error::Dimension {
                expected: 3,
                found: 1
            }
        );
    }

    #[test]
    fn empty_formula_is_intercept_only() {
        let data = Dataset::new(labels(3), vec![1.0, 2.0, 3.0], vec![1.0; 3]).unwrap();
        let empty: [&str; 0] = [];
        assert_eq!(
            DesignMatrix::from_covariates(&data, &empty).unwrap(),
            DesignMatrix::intercept_only(3)
        );
        let ols = DesignMatrix::intercept_only(3)
            .ols_coefficients(data.y())
            .unwrap();
        assert!((ols[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn contrast_needs_a_nonzero_entry() {
        assert!(Contrast::new("zero", vec![0.0, 0.0]).is_err());
        assert_eq!(
            Contrast::new("c", vec![1.0, 1.0])
                .unwrap()
                .apply(&[2.0, 3.0]),
            5.0
        );
    }
}
