//! Dense symmetric tensors and the multilinear action of square matrices.
//!
//! A tensor of order `r` over `ℝ^d` is stored as one value per non-decreasing
//! multi-index, `C(d + r − 1, r)` values in total, laid out in colexicographic
//! order. Indices are 0-based throughout the library; the JSON formats in
//! [`crate::io`] use 1-based indices.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// Largest supported tensor order.
pub const MAX_ORDER: usize = 8;

/// Orders up to this value use the direct `O(d^{2r})` multilinear sum.
const NAIVE_TRANSFORM_MAX_ORDER: usize = 4;

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of distinct entries of a symmetric tensor of order `order` over `ℝ^dim`.
pub fn num_unique_entries(dim: usize, order: usize) -> usize {
    if dim == 0 {
        return 0;
    }
    binomial(dim + order - 1, order)
}

/// Colex rank of a non-decreasing index tuple.
pub(crate) fn colex_rank(sorted: &[usize]) -> usize {
    sorted
        .iter()
        .enumerate()
        .map(|(k, &i)| binomial(i + k, k + 1))
        .sum()
}

fn check_order(order: usize) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::OrderOutOfRange {
            order,
            min: 1,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

/// Number of distinct orderings of the multiset `sorted`, `r! / Π m_i!`.
pub(crate) fn permutation_count(sorted: &[usize]) -> u64 {
    let mut count: u64 = 1;
    let mut run = 0u64;
    for (pos, &v) in sorted.iter().enumerate() {
        if pos > 0 && sorted[pos - 1] == v {
            run += 1;
        } else {
            run = 1;
        }
        count = count * (pos as u64 + 1) / run;
    }
    count
}

/// A symmetric-tensor index stored in canonical (non-decreasing) form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// Builds the canonical form of any index tuple.
    pub fn new(indices: impl Into<Vec<usize>>) -> Self {
        let mut v = indices.into();
        v.sort_unstable();
        Self(v)
    }

    /// Builds an index from 1-based positions.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        let mut v = Vec::with_capacity(indices.len());
        for &i in indices {
            if i == 0 {
                return Err(Error::IndexOutOfRange { index: 0, dim: 0 });
            }
            v.push(i - 1);
        }
        Ok(Self::new(v))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    /// Distinct index values, ascending.
    pub fn distinct(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.dedup();
        v
    }

    /// Multiplicity of each distinct value, in the order of [`Self::distinct`].
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for (pos, &v) in self.0.iter().enumerate() {
            if pos > 0 && self.0[pos - 1] == v {
                *out.last_mut().unwrap() += 1;
            } else {
                out.push(1);
            }
        }
        out
    }

    /// Number of index tuples that canonicalize to this index.
    pub fn permutation_count(&self) -> u64 {
        permutation_count(&self.0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, ")")
    }
}

/// Iterator over all canonical indices of a given order and dimension, in
/// colex order (the storage order of [`SymmetricTensor`]).
#[derive(Clone, Debug)]
pub struct CanonicalIndices {
    dim: usize,
    current: Option<Vec<usize>>,
}

impl CanonicalIndices {
    pub fn new(dim: usize, order: usize) -> Self {
        let current = if dim == 0 { None } else { Some(vec![0; order]) };
        Self { dim, current }
    }
}

impl Iterator for CanonicalIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let r = cur.len();
        // Advance the lowest position that can grow without breaking monotonicity.
        let mut k = 0;
        loop {
            if k == r {
                self.current = None;
                break;
            }
            let limit = if k + 1 < r { cur[k + 1] } else { self.dim - 1 };
            if cur[k] < limit {
                cur[k] += 1;
                for slot in cur.iter_mut().take(k) {
                    *slot = 0;
                }
                break;
            }
            k += 1;
        }
        Some(out)
    }
}

/// A real symmetric tensor of order `r` over `ℝ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensor {
    order: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SymmetricTensor {
    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        check_order(order)?;
        if dim == 0 {
            return Err(Error::InvalidInput("tensor dimension must be positive".into()));
        }
        Ok(Self {
            order,
            dim,
            values: vec![0.0; num_unique_entries(dim, order)],
        })
    }

    /// Builds a tensor from explicit entries; everything unspecified is zero.
    ///
    /// Repeating an index (in any permutation) is accepted only with the same value.
    pub fn from_entries(order: usize, dim: usize, entries: &[(MultiIndex, f64)]) -> Result<Self> {
        let mut t = Self::zeros(order, dim)?;
        let mut seen = vec![false; t.values.len()];
        for (idx, val) in entries {
            t.check_index(idx.as_slice())?;
            let pos = colex_rank(idx.as_slice());
            if seen[pos] && t.values[pos] != *val {
                return Err(Error::ConflictingEntry {
                    index: idx.to_one_based(),
                    first: t.values[pos],
                    second: *val,
                });
            }
            seen[pos] = true;
            t.values[pos] = *val;
        }
        Ok(t)
    }

    /// Builds a tensor by evaluating `f` at every canonical index.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(order, dim)?;
        for (slot, idx) in t.values.iter_mut().zip(CanonicalIndices::new(dim, order)) {
            *slot = f(&idx);
        }
        Ok(t)
    }

    /// Builds a tensor from values listed in colex order.
    pub fn from_values(order: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_order(order)?;
        let expected = num_unique_entries(dim, order);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self { order, dim, values })
    }

    /// Reads the canonical entries out of a dense row-major `d^r` array that is
    /// assumed symmetric.
    pub fn from_full(order: usize, dim: usize, full: &[f64]) -> Result<Self> {
        check_order(order)?;
        let expected = dim.pow(order as u32);
        if full.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: full.len(),
            });
        }
        Self::from_fn(order, dim, |idx| full[flat_offset(idx, dim)])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored (unique) entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unique entries in colex order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn canonical_indices(&self) -> CanonicalIndices {
        CanonicalIndices::new(self.dim, self.order)
    }

    /// `(canonical index, value)` pairs in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.canonical_indices().zip(self.values.iter().copied())
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order {
            return Err(Error::OrderMismatch {
                expected: self.order,
                found: idx.len(),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.dim) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                dim: self.dim,
            });
        }
        Ok(())
    }

    /// Entry at an arbitrary (not necessarily sorted) index tuple.
    pub fn try_get(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx)?;
        Ok(self.get(idx))
    }

    /// Entry at an arbitrary index tuple.
    ///
    /// Panics if the tuple has the wrong length or an index is out of range.
    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.order, "index length must equal tensor order");
        let mut sorted = [0usize; MAX_ORDER];
        let sorted = &mut sorted[..idx.len()];
        sorted.copy_from_slice(idx);
        sorted.sort_unstable();
        assert!(
            sorted.last().is_none_or(|&i| i < self.dim),
            "index out of range"
        );
        self.values[colex_rank(sorted)]
    }

    pub fn lookup(&self, idx: &MultiIndex) -> f64 {
        self.get(idx.as_slice())
    }

    /// Storage position of a canonical index.
    pub fn position(&self, sorted: &[usize]) -> usize {
        colex_rank(sorted)
    }

    /// Dense row-major `d^r` array with every permutation filled in.
    pub fn to_full(&self) -> Vec<f64> {
        let total = self.dim.pow(self.order as u32);
        let mut full = vec![0.0; total];
        let mut idx = vec![0usize; self.order];
        for (offset, slot) in full.iter_mut().enumerate() {
            unflatten(offset, self.dim, &mut idx);
            *slot = self.get(&idx);
        }
        full
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Entrywise equality within `tol`; false for differently shaped tensors.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other).is_ok_and(|d| d <= tol)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, ..*self })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..*self
        }
    }

    /// Squared Frobenius norm of the full tensor (each unique entry counted
    /// once per permutation of its index).
    pub fn squared_norm(&self) -> f64 {
        self.entries()
            .map(|(idx, v)| permutation_count(&idx) as f64 * v * v)
            .sum()
    }

    /// Views an order-2 tensor as a matrix.
    pub fn to_matrix(&self) -> Result<SquareMatrix> {
        if self.order != 2 {
            return Err(Error::OrderMismatch {
                expected: 2,
                found: self.order,
            });
        }
        SquareMatrix::from_row_slice(self.dim, &self.to_full())
    }

    /// Views a symmetric matrix as an order-2 tensor (upper triangle is read).
    pub fn from_matrix(m: &SquareMatrix) -> Result<Self> {
        Self::from_fn(2, m.dim(), |idx| m[(idx[0], idx[1])])
    }
}

fn flat_offset(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

fn unflatten(mut offset: usize, dim: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = offset % dim;
        offset /= dim;
    }
}

fn check_matrix_dim(a: &SquareMatrix, t: &SymmetricTensor) -> Result<()> {
    if a.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: a.dim(),
        });
    }
    Ok(())
}

/// `(A•T)_{i₁…i_r} = Σ_j A_{i₁j₁}⋯A_{i_rj_r} T_{j₁…j_r}`.
///
/// Orders up to 4 use the direct sum; higher orders contract one mode at a time.
pub fn multilinear_transform(a: &SquareMatrix, t: &SymmetricTensor) -> Result<SymmetricTensor> {
    if t.order() <= NAIVE_TRANSFORM_MAX_ORDER {
        multilinear_transform_direct(a, t)
    } else {
        multilinear_transform_modewise(a, t)
    }
}

/// Direct evaluation: every output entry sums over all `d^r` input tuples.
pub fn multilinear_transform_direct(a: &SquareMatrix, t: &SymmetricTensor) -> Result<SymmetricTensor> {
    check_matrix_dim(a, t)?;
    let d = t.dim();
    let r = t.order();
    let full = t.to_full();
    let a = a.as_matrix();

    fn accumulate(
        level: usize,
        out_idx: &[usize],
        a: &nalgebra::DMatrix<f64>,
        full: &[f64],
        d: usize,
        offset: usize,
        weight: f64,
    ) -> f64 {
        if level == out_idx.len() {
            return weight * full[offset];
        }
        let row = out_idx[level];
        (0..d)
            .map(|j| {
                let w = a[(row, j)];
                if w == 0.0 {
                    0.0
                } else {
                    accumulate(level + 1, out_idx, a, full, d, offset * d + j, weight * w)
                }
            })
            .sum()
    }

    SymmetricTensor::from_fn(r, d, |idx| accumulate(0, idx, a, &full, d, 0, 1.0))
}

/// Mode-by-mode contraction on the dense array, `O(r·d^{r+1})`.
pub fn multilinear_transform_modewise(a: &SquareMatrix, t: &SymmetricTensor) -> Result<SymmetricTensor> {
    check_matrix_dim(a, t)?;
    let d = t.dim();
    let r = t.order();
    let mut full = t.to_full();
    let mut next = vec![0.0; full.len()];
    for mode in 0..r {
        contract_mode(&full, &mut next, d, r, mode, a);
        std::mem::swap(&mut full, &mut next);
    }
    SymmetricTensor::from_full(r, d, &full)
}

/// `out = A ×_mode input` on dense row-major arrays.
pub(crate) fn contract_mode(
    input: &[f64],
    out: &mut [f64],
    d: usize,
    r: usize,
    mode: usize,
    a: &SquareMatrix,
) {
    let stride = d.pow((r - 1 - mode) as u32);
    let outer = input.len() / (stride * d);
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * stride * d + inner;
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += a[(i, j)] * input[base + j * stride];
                }
                out[base + i * stride] = acc;
            }
        }
    }
}

/// Sums out one slot: `T_{i₁…i_{r−1} +} = Σ_j T_{i₁…i_{r−1} j}`.
///
/// `position` is 0-based; by symmetry it does not affect the result.
pub fn marginalize(t: &SymmetricTensor, position: usize) -> Result<SymmetricTensor> {
    if t.order() < 2 {
        return Err(Error::OrderOutOfRange {
            order: t.order(),
            min: 2,
            max: MAX_ORDER,
        });
    }
    if position >= t.order() {
        return Err(Error::IndexOutOfRange {
            index: position,
            dim: t.order(),
        });
    }
    let d = t.dim();
    let mut tuple = vec![0usize; t.order()];
    SymmetricTensor::from_fn(t.order() - 1, d, |idx| {
        tuple[..position].copy_from_slice(&idx[..position]);
        tuple[position + 1..].copy_from_slice(&idx[position..]);
        (0..d)
            .map(|j| {
                tuple[position] = j;
                t.get(&tuple)
            })
            .sum()
    })
}

/// Repeatedly marginalizes down to the `d × d` matrix `T_{+⋯+ij}`.
pub fn marginal_matrix(t: &SymmetricTensor) -> Result<SquareMatrix> {
    if t.order() < 2 {
        return Err(Error::OrderOutOfRange {
            order: t.order(),
            min: 2,
            max: MAX_ORDER,
        });
    }
    let mut m = t.clone();
    while m.order() > 2 {
        m = marginalize(&m, 0)?;
    }
    m.to_matrix()
}

fn check_vector(t: &SymmetricTensor, x: &[f64]) -> Result<()> {
    if x.len() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// `f_T(x) = Σ T_{i₁…i_r} x_{i₁}⋯x_{i_r}` over all `r`-tuples.
pub fn polynomial_eval(t: &SymmetricTensor, x: &[f64]) -> Result<f64> {
    check_vector(t, x)?;
    Ok(t.entries()
        .map(|(idx, v)| {
            let mono: f64 = idx.iter().map(|&i| x[i]).product();
            permutation_count(&idx) as f64 * v * mono
        })
        .sum())
}

/// Contracts the trailing `count` modes of a dense array with `x`.
fn contract_with_vector(full: &[f64], d: usize, count: usize, x: &[f64]) -> Vec<f64> {
    let mut cur = full.to_vec();
    for _ in 0..count {
        cur = cur
            .chunks_exact(d)
            .map(|chunk| chunk.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
    }
    cur
}

/// Hessian of `f_T` at `x`: `r(r−1)·T(x, …, x, ·, ·)`.
pub fn hessian_eval(t: &SymmetricTensor, x: &[f64]) -> Result<SquareMatrix> {
    if t.order() < 2 {
        return Err(Error::OrderOutOfRange {
            order: t.order(),
            min: 2,
            max: MAX_ORDER,
        });
    }
    check_vector(t, x)?;
    let r = t.order();
    let d = t.dim();
    let m = contract_with_vector(&t.to_full(), d, r - 2, x);
    let factor = (r * (r - 1)) as f64;
    let scaled: Vec<f64> = m.iter().map(|v| v * factor).collect();
    SquareMatrix::from_row_slice(d, &scaled)
}
