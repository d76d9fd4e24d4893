//! Square matrices used as mixing, unmixing, whitening and rotation matrices.

use std::ops::{Index, Mul};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real `d × d` matrix.
///
/// Serializes as `{"dim": d, "rows": [[...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct SquareMatrix(DMatrix<f64>);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for SquareMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        if json.rows.len() != json.dim {
            return Err(Error::DimensionMismatch {
                expected: json.dim,
                found: json.rows.len(),
            });
        }
        let m = Self::from_rows(&json.rows)?;
        if !m.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(m)
    }
}

impl From<SquareMatrix> for MatrixJson {
    fn from(m: SquareMatrix) -> Self {
        Self {
            dim: m.dim(),
            rows: m.rows(),
        }
    }
}

impl SquareMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                found: values.ncols(),
            });
        }
        Ok(Self(values))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: values.len(),
            });
        }
        Ok(Self(DMatrix::from_row_slice(dim, dim, values)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(dim, &flat)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = DMatrix::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Result<Self> {
        let sv = self.singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if self.dim() == 0 || max == 0.0 || min <= 1e-13 * max {
            return Err(Error::SingularMatrix);
        }
        self.0
            .clone()
            .try_inverse()
            .map(Self)
            .ok_or(Error::SingularMatrix)
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        singular_values(&self.0)
    }

    /// `max |self − other|` over all entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `max |Q Qᵀ − I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let gram = &self.0 * self.0.transpose();
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.transpose()) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Applies the matrix to a vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.0[(i, j)] * x[j]).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl Mul for &SquareMatrix {
    type Output = SquareMatrix;

    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        SquareMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for SquareMatrix {
    type Output = SquareMatrix;

    fn mul(self, rhs: SquareMatrix) -> SquareMatrix {
        SquareMatrix(self.0 * rhs.0)
    }
}

impl From<SquareMatrix> for DMatrix<f64> {
    fn from(m: SquareMatrix) -> Self {
        m.0
    }
}

/// Singular values of an arbitrary (possibly rectangular) matrix, largest first.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Frobenius distance from `m` (square) to the nearest orthogonal matrix,
/// `sqrt(Σ (σ_k − 1)²)`.
pub(crate) fn distance_to_orthogonal(m: &DMatrix<f64>) -> f64 {
    singular_values(m)
        .iter()
        .map(|s| (s - 1.0).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        assert!(SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(SquareMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn inverse_of_singular_fails() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(m.inverse(), Err(Error::SingularMatrix)));
        let m = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let inv = m.inverse().unwrap();
        assert!((&m * &inv).max_abs_diff(&SquareMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn json_shape() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.5]]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"dim":2,"rows":[[1.0,2.0],[3.0,4.5]]}"#);
        assert_eq!(serde_json::from_str::<SquareMatrix>(&text).unwrap(), m);
        assert!(serde_json::from_str::<SquareMatrix>(r#"{"dim":3,"rows":[[1.0]]}"#).is_err());
    }

    #[test]
    fn orthogonal_distance() {
        let r = SquareMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(r.orthogonality_defect() < 1e-15);
        assert!(distance_to_orthogonal(r.as_matrix()) < 1e-14);
        let s = SquareMatrix::from_diagonal(&[2.0, 1.0]);
        assert!((distance_to_orthogonal(s.as_matrix()) - 1.0).abs() < 1e-14);
    }
}
