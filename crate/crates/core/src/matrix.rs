//! Sample matrices: rows are examples, columns are features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n × d` matrix of finite values with at least one row and one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct SampleMatrix(DMatrix<f64>);

impl SampleMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::DegenerateInput(format!(
                "sample matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(values))
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        for row in rows {
            crate::error::check_dim("sample row length", d, row.len())?;
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        self.0.row(i).transpose()
    }

    /// Returns the matrix without row `skip`.
    pub fn without_row(&self, skip: usize) -> Result<Self> {
        Self::new(self.0.clone().remove_row(skip))
    }
}

impl TryFrom<DMatrix<f64>> for SampleMatrix {
    type Error = Error;

    fn try_from(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SampleMatrix> for DMatrix<f64> {
    fn from(m: SampleMatrix) -> Self {
        m.0
    }
}

/// Column means of `m`.
pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Subtracts `offsets` from every row.
pub(crate) fn subtract_row(m: &DMatrix<f64>, offsets: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-offsets[j]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert_eq!(
            SampleMatrix::new(m).unwrap_err(),
            Error::NonFinite { row: 0, col: 1 }
        );
        assert!(SampleMatrix::new(DMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            SampleMatrix::from_rows(&rows),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn centering_helpers() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 9.0]);
        let mu = column_means(&m);
        assert_eq!(mu.as_slice(), &[2.0, 6.0]);
        let c = subtract_row(&m, &mu);
        assert_eq!(column_means(&c).as_slice(), &[0.0, 0.0]);
    }
}
