//! Plug-in sample moments and cumulants, centering and symmetric whitening.
//!
//! Moments are accumulated over fixed blocks of [`ROW_BLOCK`] rows. Blocks may
//! be processed on any number of threads; the per-block sums are always added
//! in block order, so results are bit-identical regardless of thread count.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::partitions::moments_to_cumulants;
use crate::tensor::{CanonicalIndices, SymmetricTensor, MAX_ORDER};

/// Rows per reduction block.
pub const ROW_BLOCK: usize = 4096;

/// Relative eigenvalue floor for whitening: the covariance is rejected when
/// its smallest eigenvalue is at most `EPS_PD_RELATIVE × λ_max`.
pub const EPS_PD_RELATIVE: f64 = 1e-10;

/// An `n × d` matrix of observations, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    /// Row-major constructor; every value must be finite.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "sample matrix must be non-empty, got {n}×{d}"
            )));
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), d, rows.iter().flatten().copied().collect())
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let mut values = vec![0.0; n * d];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * d + j] = v;
            }
        }
        Self::new(n, d, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    /// Replaces every row `x` by `A·x`.
    pub fn map_rows(&self, a: &SquareMatrix) -> Result<Self> {
        if a.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: a.dim(),
            });
        }
        let d = self.d;
        let mut values = vec![0.0; self.values.len()];
        values
            .par_chunks_mut(d * ROW_BLOCK)
            .zip(self.values.par_chunks(d * ROW_BLOCK))
            .for_each(|(out, input)| {
                for (o, x) in out.chunks_exact_mut(d).zip(input.chunks_exact(d)) {
                    for (i, slot) in o.iter_mut().enumerate() {
                        *slot = (0..d).map(|j| a[(i, j)] * x[j]).sum();
                    }
                }
            });
        Ok(Self { values, ..*self })
    }

    /// Entrywise sum of two equally shaped matrices.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, ..*self })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Output of [`whiten`].
#[derive(Clone, Debug)]
pub struct WhiteningResult {
    /// Centered and whitened data, `(x − mean)·Zᵀ` row by row.
    pub whitened: SampleMatrix,
    /// The symmetric whitening matrix `Z = V Λ^{−1/2} Vᵀ`.
    pub transform: SquareMatrix,
    pub mean: Vec<f64>,
}

fn check_order(r: usize) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&r) {
        return Err(Error::OrderOutOfRange {
            order: r,
            min: 1,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

/// For each order, the storage position of every index's prefix in the
/// previous order together with its last element.
fn product_recipes(d: usize, r: usize) -> Vec<Vec<(usize, usize)>> {
    (1..=r)
        .map(|order| {
            let prev = if order > 1 {
                Some(SymmetricTensor::zeros(order - 1, d).expect("valid order"))
            } else {
                None
            };
            CanonicalIndices::new(d, order)
                .map(|idx| {
                    let last = idx[order - 1];
                    let parent = prev.as_ref().map_or(0, |p| p.position(&idx[..order - 1]));
                    (parent, last)
                })
                .collect()
        })
        .collect()
}

/// Sample moment tensors `μ̂₁, …, μ̂_r`, dividing by `n`.
pub fn sample_moments(x: &SampleMatrix, r: usize) -> Result<Vec<SymmetricTensor>> {
    check_order(r)?;
    let d = x.d();
    let recipes = product_recipes(d, r);
    let zero_sums: Vec<Vec<f64>> = recipes.iter().map(|rec| vec![0.0; rec.len()]).collect();

    let block_sums: Vec<Vec<Vec<f64>>> = x
        .values()
        .par_chunks(d * ROW_BLOCK)
        .map(|block| {
            let mut sums = zero_sums.clone();
            let mut prods = zero_sums.clone();
            for row in block.chunks_exact(d) {
                for (k, rec) in recipes.iter().enumerate() {
                    let (done, rest) = prods.split_at_mut(k);
                    let cur = &mut rest[0];
                    if k == 0 {
                        for (slot, &(_, last)) in cur.iter_mut().zip(rec) {
                            *slot = row[last];
                        }
                    } else {
                        let prev = &done[k - 1];
                        for (slot, &(parent, last)) in cur.iter_mut().zip(rec) {
                            *slot = prev[parent] * row[last];
                        }
                    }
                    for (s, p) in sums[k].iter_mut().zip(cur.iter()) {
                        *s += p;
                    }
                }
            }
            sums
        })
        .collect();

    let mut totals = zero_sums;
    for block in &block_sums {
        for (t, b) in totals.iter_mut().zip(block) {
            for (acc, v) in t.iter_mut().zip(b) {
                *acc += v;
            }
        }
    }
    let inv_n = 1.0 / x.n() as f64;
    totals
        .into_iter()
        .enumerate()
        .map(|(k, sums)| {
            SymmetricTensor::from_values(k + 1, d, sums.into_iter().map(|s| s * inv_n).collect())
        })
        .collect()
}

/// Sample moment tensor of order `r`: `(1/n) Σ_rows Π_k x_{i_k}`.
pub fn sample_moment(x: &SampleMatrix, r: usize) -> Result<SymmetricTensor> {
    Ok(sample_moments(x, r)?.pop().expect("r >= 1"))
}

/// Plug-in sample cumulants `κ̂₁, …, κ̂_r`.
pub fn sample_cumulants(x: &SampleMatrix, r: usize) -> Result<Vec<SymmetricTensor>> {
    moments_to_cumulants(&sample_moments(x, r)?)
}

/// Plug-in sample cumulant tensor of order `r`.
pub fn sample_cumulant(x: &SampleMatrix, r: usize) -> Result<SymmetricTensor> {
    Ok(sample_cumulants(x, r)?.pop().expect("r >= 1"))
}

/// Column means.
pub fn column_means(x: &SampleMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.d()];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.n() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Subtracts the column means; returns the centered data and the means.
pub fn center(x: &SampleMatrix) -> (SampleMatrix, Vec<f64>) {
    let mean = column_means(x);
    let values = x
        .rows()
        .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    (
        SampleMatrix {
            n: x.n,
            d: x.d,
            values,
        },
        mean,
    )
}

/// Plug-in covariance `(1/n) Σ (x − x̄)(x − x̄)ᵀ`.
pub fn covariance(x: &SampleMatrix) -> SquareMatrix {
    let (centered, _) = center(x);
    let d = x.d();
    let mut cov = DMatrix::zeros(d, d);
    for row in centered.rows() {
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += row[i] * row[j];
            }
        }
    }
    let n = x.n() as f64;
    for i in 0..d {
        for j in i..d {
            cov[(i, j)] /= n;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    SquareMatrix::new(cov).expect("square")
}

/// Centers the data and applies the symmetric whitening `Z = V Λ^{−1/2} Vᵀ`
/// built from the eigendecomposition `Σ = V Λ Vᵀ` of the plug-in covariance.
pub fn whiten(x: &SampleMatrix) -> Result<WhiteningResult> {
    let (centered, mean) = center(x);
    let sigma = covariance(&centered);
    let eig = SymmetricEigen::new(sigma.into_inner());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = EPS_PD_RELATIVE * max.max(0.0);
    if max.is_nan() || max <= 0.0 || min <= threshold {
        return Err(Error::DegenerateCovariance {
            min_eigenvalue: min,
            threshold,
        });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let z = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    // Symmetrize away rounding so the transform is exactly symmetric.
    let z = (&z + z.transpose()) * 0.5;
    let transform = SquareMatrix::new(z)?;
    let whitened = centered.map_rows(&transform)?;
    Ok(WhiteningResult {
        whitened,
        transform,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(SampleMatrix::new(0, 2, vec![]).is_err());
        assert!(SampleMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(SampleMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(SampleMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn constant_rows_give_powers() {
        let c = 1.5;
        let x = SampleMatrix::new(7, 3, vec![c; 21]).unwrap();
        for r in 1..=4 {
            let mu = sample_moment(&x, r).unwrap();
            for &v in mu.values() {
                assert!((v - c.powi(r as i32)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_row_second_moment() {
        let x = SampleMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mu = sample_moment(&x, 2).unwrap();
        assert_eq!(mu.values(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn order_range_checked() {
        let x = SampleMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(sample_moment(&x, 0).is_err());
        assert!(sample_cumulant(&x, 9).is_err());
    }

    #[test]
    fn moments_match_direct_products() {
        let rows: Vec<Vec<f64>> = (0..9000)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin(), (t * 0.11).cos() + 0.2, (t * 0.05).sin() * 2.0]
            })
            .collect();
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let mu = sample_moment(&x, 3).unwrap();
        for (idx, v) in mu.entries() {
            let direct: f64 = rows.iter().map(|r| idx.iter().map(|&i| r[i]).product::<f64>()).sum::<f64>()
                / rows.len() as f64;
            assert!((v - direct).abs() < 1e-12, "{idx:?}: {v} vs {direct}");
        }
    }

    #[test]
    fn centering_cases() {
        let x = SampleMatrix::from_rows(&[vec![1.0, 5.0], vec![-1.0, 5.0], vec![0.0, 5.0]]).unwrap();
        let (c, mean) = center(&x);
        assert!(mean[0].abs() < 1e-15);
        assert_eq!(mean[1], 5.0);
        assert_eq!(c.column(0), x.column(0));
        assert!(c.column(1).iter().all(|&v| v == 0.0));
        let (cc, _) = center(&c);
        assert!(cc.max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let x = SampleMatrix::from_rows(&rows).unwrap();
        assert!(matches!(whiten(&x), Err(Error::DegenerateCovariance { .. })));
        let flat = SampleMatrix::new(3, 1, vec![1.0; 3]).unwrap();
        assert!(matches!(whiten(&flat), Err(Error::DegenerateCovariance { .. })));
    }

    #[test]
    fn map_rows_checks_dimension() {
        let x = SampleMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(x.map_rows(&SquareMatrix::identity(3)).is_err());
        let swapped = x
            .map_rows(&SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap())
            .unwrap();
        assert_eq!(swapped.row(0), &[2.0, 1.0]);
    }
}
