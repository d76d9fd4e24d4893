//! Orthogonal, signed-permutation and block-orthogonal matrix groups:
//! sampling, membership predicates, block classification and the coset
//! residual used to score recovered unmixing matrices.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{distance_to_orthogonal, singular_values, SquareMatrix};
use crate::patterns::{generic_sample, is_member, pattern_from_graph, IndependenceGraph, PartitionSpec, POPULATION_TOL};
use crate::seed;
use crate::tensor::multilinear_transform;

/// Entries at or below this magnitude count as zero when classifying blocks.
pub const TOL_ZERO: f64 = 1e-10;
/// A block is full rank when `σ_min ≥ TOL_RANK_RELATIVE · σ_max`.
pub const TOL_RANK_RELATIVE: f64 = 1e-6;
/// Largest block count for exhaustive block-assignment search.
pub const MAX_BLOCKS: usize = 8;

/// Ordered block sizes `k₁, …, k_m` of a `d × d` block matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidInput(format!("invalid block sizes {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        for &k in &sizes {
            offsets.push(acc);
            acc += k;
        }
        offsets.push(acc);
        Ok(Self { sizes, offsets })
    }

    /// Parses a comma-separated size list such as `"2,2"`.
    pub fn parse(text: &str) -> Result<Self> {
        let sizes = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("bad block size {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }

    pub fn singletons(d: usize) -> Result<Self> {
        Self::new(vec![1; d])
    }

    /// Block structure of a contiguous partition; fails for non-contiguous blocks.
    pub fn from_partition(spec: &PartitionSpec) -> Result<Self> {
        let mut next = 0;
        for block in spec.blocks() {
            if block.iter().enumerate().any(|(k, &i)| i != next + k) {
                return Err(Error::InvalidInput(
                    "partition blocks are not contiguous index ranges".into(),
                ));
            }
            next += block.len();
        }
        Self::new(spec.sizes())
    }

    pub fn to_partition(&self) -> PartitionSpec {
        PartitionSpec::from_sizes(&self.sizes).expect("sizes are positive")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    /// Block permutations `σ` with `k_{σ(i)} = k_i`, in lexicographic order.
    pub fn compatible_permutations(&self) -> Vec<Vec<usize>> {
        permutations(self.num_blocks())
            .into_iter()
            .filter(|p| p.iter().enumerate().all(|(i, &j)| self.sizes[i] == self.sizes[j]))
            .collect()
    }

    fn check(&self, q: &SquareMatrix) -> Result<()> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.dim(),
            });
        }
        if self.num_blocks() > MAX_BLOCKS {
            return Err(Error::InvalidInput(format!(
                "at most {MAX_BLOCKS} blocks supported, got {}",
                self.num_blocks()
            )));
        }
        Ok(())
    }

    fn block(&self, q: &SquareMatrix, i: usize, j: usize) -> DMatrix<f64> {
        let (rows, cols) = (self.range(i), self.range(j));
        q.as_matrix()
            .view((rows.start, cols.start), (rows.len(), cols.len()))
            .into_owned()
    }
}

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..m).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..m).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

pub(crate) fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Haar-distributed element of `O(d)`: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal(d: usize, seed: u64) -> SquareMatrix {
    SquareMatrix::new(haar_orthogonal(d, &mut seed::rng(seed))).expect("square")
}

/// Uniform element of the signed permutation group `SP(d)`.
pub fn random_signed_permutation(d: usize, seed: u64) -> SquareMatrix {
    let mut rng = seed::rng(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    let mut m = SquareMatrix::zeros(d).into_inner();
    for (i, &j) in perm.iter().enumerate() {
        m[(i, j)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    SquareMatrix::new(m).expect("square")
}

/// Random element of `𝒫ₘO(k₁, …, k_m)`: a uniformly chosen size-compatible
/// block permutation with independent Haar orthogonal blocks.
pub fn random_block_orthogonal(b: &BlockStructure, seed: u64) -> SquareMatrix {
    let mut rng = seed::rng(seed);
    let perms = b.compatible_permutations();
    let sigma = &perms[rng.random_range(0..perms.len())];
    let mut m = DMatrix::zeros(b.dim(), b.dim());
    for (i, &j) in sigma.iter().enumerate() {
        let block = haar_orthogonal(b.sizes[i], &mut rng);
        let (rows, cols) = (b.range(i), b.range(j));
        m.view_mut((rows.start, cols.start), (rows.len(), cols.len()))
            .copy_from(&block);
    }
    SquareMatrix::new(m).expect("square")
}

/// Classification of one block of a block matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BlockLabel {
    Zero,
    FullRank,
    SingularNonzero,
}

/// Per-block labels of a block matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockClassification {
    pub labels: Vec<Vec<BlockLabel>>,
    pub min_singular_values: Vec<Vec<f64>>,
}

impl BlockClassification {
    pub fn count(&self, label: BlockLabel) -> usize {
        self.labels.iter().flatten().filter(|&&l| l == label).count()
    }

    /// Whether every block row and block column holds exactly one full-rank
    /// block and nothing else is non-zero.
    pub fn is_block_permutation_shaped(&self) -> bool {
        let m = self.labels.len();
        let rows_ok = self.labels.iter().all(|row| {
            row.iter().filter(|&&l| l == BlockLabel::FullRank).count() == 1
                && !row.contains(&BlockLabel::SingularNonzero)
        });
        let cols_ok = (0..m).all(|j| {
            (0..m).filter(|&i| self.labels[i][j] == BlockLabel::FullRank).count() == 1
        });
        rows_ok && cols_ok
    }
}

/// Labels every block `Zero` (max-abs ≤ `tol_zero`), `FullRank`
/// (`σ_min ≥ tol_rank · σ_max` of that block) or `SingularNonzero`.
pub fn classify_blocks(
    q: &SquareMatrix,
    b: &BlockStructure,
    tol_zero: f64,
    tol_rank: f64,
) -> Result<BlockClassification> {
    b.check(q)?;
    let m = b.num_blocks();
    let mut labels = vec![vec![BlockLabel::Zero; m]; m];
    let mut mins = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let block = b.block(q, i, j);
            let sv = singular_values(&block);
            let (max, min) = (sv[0], *sv.last().unwrap());
            mins[i][j] = min;
            let max_abs = block.iter().map(|v| v.abs()).fold(0.0, f64::max);
            labels[i][j] = if max_abs <= tol_zero {
                BlockLabel::Zero
            } else if min >= tol_rank * max {
                BlockLabel::FullRank
            } else {
                BlockLabel::SingularNonzero
            };
        }
    }
    Ok(BlockClassification {
        labels,
        min_singular_values: mins,
    })
}

/// Membership in `𝒫ₘO(k₁, …, k_m)`: orthogonal with exactly one non-zero block
/// in every block row and block column.
pub fn is_block_orthogonal(q: &SquareMatrix, b: &BlockStructure, tol: f64) -> bool {
    if b.check(q).is_err() || q.orthogonality_defect() > tol {
        return false;
    }
    let m = b.num_blocks();
    let nonzero: Vec<Vec<bool>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| b.block(q, i, j).iter().any(|v| v.abs() > tol))
                .collect()
        })
        .collect();
    (0..m).all(|i| {
        let in_row: Vec<usize> = (0..m).filter(|&j| nonzero[i][j]).collect();
        let in_col = (0..m).filter(|&k| nonzero[k][i]).count();
        in_row.len() == 1 && in_col == 1 && b.sizes[i] == b.sizes[in_row[0]]
    })
}

/// Membership in `SP(d)`: one entry of magnitude 1 per row and column, the
/// rest zero, all within `tol`.
pub fn is_signed_permutation(q: &SquareMatrix, tol: f64) -> bool {
    let d = q.dim();
    let mut col_hits = vec![0usize; d];
    for i in 0..d {
        let mut row_hits = 0;
        for j in 0..d {
            let v = q[(i, j)].abs();
            if (v - 1.0).abs() <= tol {
                row_hits += 1;
                col_hits[j] += 1;
            } else if v > tol {
                return false;
            }
        }
        if row_hits != 1 {
            return false;
        }
    }
    col_hits.iter().all(|&c| c == 1) && q.orthogonality_defect() <= tol
}

/// Membership in `𝒫ₘSP`: block-orthogonal with signed-permutation blocks.
pub fn is_block_signed_permutation(q: &SquareMatrix, b: &BlockStructure, tol: f64) -> bool {
    is_block_orthogonal(q, b, tol) && is_signed_permutation(q, tol)
}

/// Distance of a matrix from the block-orthogonal group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CosetResidual {
    pub residual: f64,
    /// Block row `i` is matched to block column `assignment[i]`.
    pub assignment: Vec<usize>,
    /// Frobenius distance of each assigned block to the nearest orthogonal matrix.
    pub block_distances: Vec<f64>,
}

/// Scores how far `g` is from `𝒫ₘO`: the size-compatible block assignment
/// capturing the most Frobenius mass is chosen, and the residual combines the
/// mass outside it with the orthogonality defect of the assigned blocks,
/// normalized by `√d`. Zero exactly on `𝒫ₘO`.
pub fn coset_residual(g: &SquareMatrix, b: &BlockStructure) -> Result<CosetResidual> {
    b.check(g)?;
    let m = b.num_blocks();
    let mass: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| b.block(g, i, j).norm_squared()).collect())
        .collect();
    let total: f64 = mass.iter().flatten().sum();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for sigma in b.compatible_permutations() {
        let captured: f64 = sigma.iter().enumerate().map(|(i, &j)| mass[i][j]).sum();
        if best.as_ref().is_none_or(|(c, _)| captured > *c) {
            best = Some((captured, sigma));
        }
    }
    let (captured, assignment) = best.expect("identity is always compatible");
    let block_distances: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| distance_to_orthogonal(&b.block(g, i, j)))
        .collect();
    let unassigned = (total - captured).max(0.0);
    let defect: f64 = block_distances.iter().map(|x| x * x).sum();
    let residual = ((unassigned + defect) / b.dim() as f64).sqrt();
    Ok(CosetResidual {
        residual,
        assignment,
        block_distances,
    })
}

/// Nearest signed permutation to `q` under the best row-to-column assignment,
/// and the max-abs distance to it.
pub fn nearest_signed_permutation(q: &SquareMatrix) -> Result<(SquareMatrix, f64)> {
    let d = q.dim();
    let coset = coset_residual(q, &BlockStructure::singletons(d)?)?;
    let mut p = DMatrix::zeros(d, d);
    for (i, &j) in coset.assignment.iter().enumerate() {
        p[(i, j)] = if q[(i, j)] < 0.0 { -1.0 } else { 1.0 };
    }
    let p = SquareMatrix::new(p)?;
    let dist = p.max_abs_diff(q);
    Ok((p, dist))
}

/// Whether `p` is a 0/1 permutation matrix up to `tol`.
pub fn is_permutation_matrix(p: &SquareMatrix, tol: f64) -> bool {
    is_signed_permutation(p, tol) && (0..p.dim()).all(|i| (0..p.dim()).all(|j| p[(i, j)] > -tol))
}

/// Whether the permutation matrix `p` is a graph automorphism: `‖PᵀA P − A‖_max ≤ tol`.
pub fn graph_automorphism_check(p: &SquareMatrix, g: &IndependenceGraph, tol: f64) -> Result<bool> {
    if p.dim() != g.d() {
        return Err(Error::DimensionMismatch {
            expected: g.d(),
            found: p.dim(),
        });
    }
    if !is_permutation_matrix(p, 1e-12) {
        return Err(Error::NotPermutation);
    }
    let a = g.adjacency_matrix();
    let conj = &(&p.transpose() * &a) * p;
    Ok(conj.max_abs_diff(&a) <= tol)
}

/// One signed permutation examined by [`conjecture_probe`].
#[derive(Clone, Debug, Serialize)]
pub struct ProbeCandidate {
    /// `permutation[i]` is the 1-based column of the non-zero entry in row `i`.
    pub permutation: Vec<usize>,
    pub signs: Vec<i8>,
    pub automorphism: bool,
    /// Per-trial verdict: does `Q•T` stay in the graph pattern?
    pub verdicts: Vec<bool>,
    pub preserves: bool,
    pub agrees: bool,
}

/// Result of comparing pattern preservation with graph automorphisms.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub dim: usize,
    pub order: usize,
    pub trials: usize,
    pub seed: u64,
    pub edges: Vec<[usize; 2]>,
    pub exhaustive: bool,
    pub candidates: Vec<ProbeCandidate>,
    pub disagreements: usize,
}

/// Signed permutations sampled when exhaustive enumeration is too large.
pub const PROBE_SAMPLES: usize = 256;

fn signed_permutation_matrix(perm: &[usize], signs: &[i8]) -> SquareMatrix {
    let d = perm.len();
    let mut m = DMatrix::zeros(d, d);
    for (i, (&j, &s)) in perm.iter().zip(signs).enumerate() {
        m[(i, j)] = f64::from(s);
    }
    SquareMatrix::new(m).expect("square")
}

/// Empirical probe: for each signed permutation `Q` (all of `SP(d)` when
/// `d ≤ 4`, otherwise [`PROBE_SAMPLES`] uniform draws) and `trials` generic
/// tensors in the graph pattern, compare "`Q•T` stays in the pattern for every
/// trial" with "`|Q|` is a graph automorphism".
pub fn conjecture_probe(g: &IndependenceGraph, r: usize, trials: usize, seed: u64) -> Result<ProbeReport> {
    let d = g.d();
    if !(1..=6).contains(&d) || !(2..=4).contains(&r) {
        return Err(Error::InvalidInput(format!(
            "probe supports d ≤ 6 and 2 ≤ r ≤ 4, got d = {d}, r = {r}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("probe needs at least one trial".into()));
    }
    let pattern = pattern_from_graph(g, r)?;
    let tensors: Vec<_> = (0..trials)
        .map(|t| generic_sample(&pattern, 1.0, seed::split(seed, t as u64)))
        .collect();

    let exhaustive = d <= 4;
    let candidates: Vec<(Vec<usize>, Vec<i8>)> = if exhaustive {
        let mut out = Vec::new();
        for perm in permutations(d) {
            for mask in 0..(1u32 << d) {
                let signs = (0..d).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect();
                out.push((perm.clone(), signs));
            }
        }
        out
    } else {
        let sampler_seed = seed::split(seed, u64::MAX);
        (0..PROBE_SAMPLES)
            .map(|k| {
                let q = random_signed_permutation(d, seed::split(sampler_seed, k as u64));
                let perm = (0..d).map(|i| (0..d).find(|&j| q[(i, j)] != 0.0).unwrap()).collect::<Vec<_>>();
                let signs = perm.iter().enumerate().map(|(i, &j)| q[(i, j)] as i8).collect();
                (perm, signs)
            })
            .collect()
    };

    let results: Vec<ProbeCandidate> = candidates
        .par_iter()
        .map(|(perm, signs)| {
            let q = signed_permutation_matrix(perm, signs);
            let abs = signed_permutation_matrix(perm, &vec![1; d]);
            let automorphism = graph_automorphism_check(&abs, g, 0.5)?;
            let verdicts = tensors
                .iter()
                .map(|t| Ok(is_member(&multilinear_transform(&q, t)?, &pattern, POPULATION_TOL)?.member))
                .collect::<Result<Vec<bool>>>()?;
            let preserves = verdicts.iter().all(|&v| v);
            Ok(ProbeCandidate {
                permutation: perm.iter().map(|j| j + 1).collect(),
                signs: signs.clone(),
                automorphism,
                verdicts,
                preserves,
                agrees: preserves == automorphism,
            })
        })
        .collect::<Result<_>>()?;

    let disagreements = results.iter().filter(|c| !c.agrees).count();
    Ok(ProbeReport {
        dim: d,
        order: r,
        trials,
        seed,
        edges: g.edges().iter().map(|&(u, v)| [u + 1, v + 1]).collect(),
        exhaustive,
        candidates: results,
        disagreements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_lexicographic() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn block_structure_parsing() {
        let b = BlockStructure::parse("2, 3").unwrap();
        assert_eq!(b.dim(), 5);
        assert_eq!(b.range(1), 2..5);
        assert!(BlockStructure::parse("2,x").is_err());
        assert!(BlockStructure::parse("0").is_err());
        assert_eq!(BlockStructure::new(vec![2, 1]).unwrap().compatible_permutations().len(), 1);
        assert_eq!(BlockStructure::new(vec![2, 2]).unwrap().compatible_permutations().len(), 2);
    }

    #[test]
    fn one_dimensional_samples() {
        for s in 0..20 {
            assert_eq!(random_orthogonal(1, s)[(0, 0)].abs(), 1.0);
            assert_eq!(random_signed_permutation(1, s)[(0, 0)].abs(), 1.0);
        }
    }

    #[test]
    fn size_incompatible_blocks_never_swap() {
        let b = BlockStructure::new(vec![2, 1]).unwrap();
        for s in 0..50 {
            let q = random_block_orthogonal(&b, s);
            assert_eq!(q[(0, 2)], 0.0);
            assert_eq!(q[(1, 2)], 0.0);
            assert_eq!(q[(2, 0)], 0.0);
            assert_eq!(q[(2, 1)], 0.0);
            assert!(is_block_orthogonal(&q, &b, 1e-12));
        }
    }

    #[test]
    fn block_diagonal_classification() {
        let b = BlockStructure::new(vec![2, 2]).unwrap();
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 0), (2, 2)).copy_from(&haar_orthogonal(2, &mut seed::rng(1)));
        m.view_mut((2, 2), (2, 2)).copy_from(&haar_orthogonal(2, &mut seed::rng(2)));
        let q = SquareMatrix::new(m).unwrap();
        let c = classify_blocks(&q, &b, TOL_ZERO, TOL_RANK_RELATIVE).unwrap();
        assert_eq!(c.labels[0], vec![BlockLabel::FullRank, BlockLabel::Zero]);
        assert_eq!(c.labels[1], vec![BlockLabel::Zero, BlockLabel::FullRank]);
        assert!(c.is_block_permutation_shaped());
    }

    #[test]
    fn signed_permutation_residual_and_assignment() {
        let q = signed_permutation_matrix(&[2, 0, 1], &[1, -1, 1]);
        let c = coset_residual(&q, &BlockStructure::singletons(3).unwrap()).unwrap();
        assert_eq!(c.residual, 0.0);
        assert_eq!(c.assignment, vec![2, 0, 1]);
        let (p, dist) = nearest_signed_permutation(&q).unwrap();
        assert_eq!(p, q);
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn automorphism_errors_and_star() {
        let star = IndependenceGraph::star(3, 0).unwrap();
        let not_perm = SquareMatrix::from_diagonal(&[1.0, 1.0, 0.5]);
        assert!(matches!(
            graph_automorphism_check(&not_perm, &star, 0.0),
            Err(Error::NotPermutation)
        ));
        let signed = SquareMatrix::from_diagonal(&[1.0, -1.0, 1.0]);
        assert!(graph_automorphism_check(&signed, &star, 0.0).is_err());
        // swap hub 1 with leaf 2
        let swap = signed_permutation_matrix(&[1, 0, 2], &[1, 1, 1]);
        assert!(!graph_automorphism_check(&swap, &star, 0.0).unwrap());
        let leaves = signed_permutation_matrix(&[0, 2, 1], &[1, 1, 1]);
        assert!(graph_automorphism_check(&leaves, &star, 0.0).unwrap());
    }

    #[test]
    fn probe_input_validation() {
        assert!(conjecture_probe(&IndependenceGraph::chain(7), 3, 1, 0).is_err());
        assert!(conjecture_probe(&IndependenceGraph::chain(3), 5, 1, 0).is_err());
        assert!(conjecture_probe(&IndependenceGraph::chain(3), 3, 0, 0).is_err());
    }

    #[test]
    fn complete_graph_probe_accepts_everything() {
        let report = conjecture_probe(&IndependenceGraph::complete(3), 3, 5, 11).unwrap();
        assert_eq!(report.candidates.len(), 48);
        assert!(report.candidates.iter().all(|c| c.preserves && c.automorphism));
        assert_eq!(report.disagreements, 0);
    }
}
