//! Set partitions and the combinatorial moment/cumulant conversion.
//!
//! For a tuple `(i₁, …, i_r)`:
//!
//! ```text
//! κ_{i₁…i_r} = Σ_{π ∈ Π_r} (−1)^{|π|−1} (|π|−1)! Π_{B∈π} μ_{i_B}
//! μ_{i₁…i_r} = Σ_{π ∈ Π_r} Π_{B∈π} κ_{i_B}
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{SymmetricTensor, MAX_ORDER};

/// A partition of `{0, …, r−1}` into non-empty blocks, blocks sorted by their
/// minimum element and each block sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SetPartition {
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Builds the partition described by a restricted-growth string.
    fn from_growth_string(rgs: &[usize]) -> Self {
        let count = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (elem, &b) in rgs.iter().enumerate() {
            blocks[b].push(elem);
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of elements partitioned.
    pub fn size(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Compact notation with 1-based elements, e.g. `1|23`.
    pub fn notation(&self) -> String {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|e| (e + 1).to_string()).collect::<String>())
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// All partitions of `{0, …, r−1}`, in lexicographic order of their
/// restricted-growth strings.
pub fn enumerate_partitions(r: usize) -> Result<Vec<SetPartition>> {
    if !(1..=MAX_ORDER).contains(&r) {
        return Err(Error::OrderOutOfRange {
            order: r,
            min: 1,
            max: MAX_ORDER,
        });
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; r];
    // prefix_max[k] = max(rgs[0..=k])
    let mut prefix_max = vec![0usize; r];
    loop {
        out.push(SetPartition::from_growth_string(&rgs));
        // Find the rightmost position that can be incremented.
        let mut k = r - 1;
        loop {
            if k == 0 {
                return Ok(out);
            }
            if rgs[k] <= prefix_max[k - 1] {
                break;
            }
            k -= 1;
        }
        rgs[k] += 1;
        prefix_max[k] = prefix_max[k - 1].max(rgs[k]);
        for j in k + 1..r {
            rgs[j] = 0;
            prefix_max[j] = prefix_max[k];
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn check_sequence(seq: &[SymmetricTensor]) -> Result<usize> {
    let first = seq
        .first()
        .ok_or_else(|| Error::InvalidInput("empty tensor sequence".into()))?;
    if seq.len() > MAX_ORDER {
        return Err(Error::OrderOutOfRange {
            order: seq.len(),
            min: 1,
            max: MAX_ORDER,
        });
    }
    let dim = first.dim();
    for (k, t) in seq.iter().enumerate() {
        if t.order() != k + 1 {
            return Err(Error::OrderMismatch {
                expected: k + 1,
                found: t.order(),
            });
        }
        if t.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.dim(),
            });
        }
    }
    Ok(dim)
}

/// Evaluates `Σ_π weight(|π|) Π_B seq[|B|−1][i_B]` at every canonical index of
/// every order.
fn convert(seq: &[SymmetricTensor], weight: impl Fn(usize) -> f64 + Sync) -> Result<Vec<SymmetricTensor>> {
    let dim = check_sequence(seq)?;
    let mut out = Vec::with_capacity(seq.len());
    for order in 1..=seq.len() {
        let partitions = enumerate_partitions(order)?;
        let coeffs: Vec<f64> = partitions.iter().map(|p| weight(p.num_blocks())).collect();
        let indices: Vec<Vec<usize>> = crate::tensor::CanonicalIndices::new(dim, order).collect();
        let values: Vec<f64> = indices
            .par_iter()
            .map(|idx| {
                let mut sub = [0usize; MAX_ORDER];
                partitions
                    .iter()
                    .zip(&coeffs)
                    .map(|(p, &c)| {
                        let prod: f64 = p
                            .blocks()
                            .iter()
                            .map(|block| {
                                let sub = &mut sub[..block.len()];
                                for (slot, &pos) in sub.iter_mut().zip(block) {
                                    *slot = idx[pos];
                                }
                                seq[block.len() - 1].get(sub)
                            })
                            .product();
                        c * prod
                    })
                    .sum()
            })
            .collect();
        out.push(SymmetricTensor::from_values(order, dim, values)?);
    }
    Ok(out)
}

/// Converts moment tensors `μ₁, …, μ_r` into cumulant tensors `κ₁, …, κ_r`.
pub fn moments_to_cumulants(moments: &[SymmetricTensor]) -> Result<Vec<SymmetricTensor>> {
    convert(moments, |blocks| {
        let sign = if blocks % 2 == 1 { 1.0 } else { -1.0 };
        sign * factorial(blocks - 1)
    })
}

/// Converts cumulant tensors `κ₁, …, κ_r` into moment tensors `μ₁, …, μ_r`.
pub fn cumulants_to_moments(cumulants: &[SymmetricTensor]) -> Result<Vec<SymmetricTensor>> {
    convert(cumulants, |_| 1.0)
}
