//! Zero-patterns of cumulant tensors implied by independence assumptions.
//!
//! A [`ZeroPattern`] marks which canonical entries of an order-`r` symmetric
//! tensor are forced to vanish. The zero-set is materialized once at
//! construction; queries are table lookups.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::seed;
use crate::tensor::{colex_rank, marginal_matrix, CanonicalIndices, MultiIndex, SymmetricTensor, MAX_ORDER};

/// Default tolerance for membership checks on exact (population) tensors.
pub const POPULATION_TOL: f64 = 1e-10;

/// An ordered partition `I₁ ⊔ … ⊔ I_m` of `{0, …, d−1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionSpec {
    d: usize,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(d: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidPartition("dimension must be positive".into()));
        }
        let mut block_of = vec![usize::MAX; d];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {} is empty", b + 1)));
            }
            for &i in block {
                if i >= d {
                    return Err(Error::InvalidPartition(format!(
                        "element {} exceeds dimension {d}",
                        i + 1
                    )));
                }
                if block_of[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "element {} appears twice",
                        i + 1
                    )));
                }
                block_of[i] = b;
            }
        }
        if let Some(missing) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "element {} is not covered",
                missing + 1
            )));
        }
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        Ok(Self { d, blocks, block_of })
    }

    /// Contiguous blocks of the given sizes: `{0..k₁}, {k₁..k₁+k₂}, …`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &k in sizes {
            blocks.push((start..start + k).collect());
            start += k;
        }
        Self::new(start, blocks)
    }

    /// `d` singleton blocks.
    pub fn singletons(d: usize) -> Result<Self> {
        Self::new(d, (0..d).map(|i| vec![i]).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }
}

/// An undirected simple graph on `d` vertices; non-adjacent vertices are
/// independent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceGraph {
    d: usize,
    adjacency: Vec<bool>,
}

impl IndependenceGraph {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            adjacency: vec![false; d * d],
        }
    }

    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(d);
        for &(u, v) in edges {
            if u >= d || v >= d {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) outside {d} vertices",
                    u + 1,
                    v + 1
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", u + 1)));
            }
            g.adjacency[u * d + v] = true;
            g.adjacency[v * d + u] = true;
        }
        Ok(g)
    }

    /// Star with internal node `hub` and every other vertex a leaf.
    pub fn star(d: usize, hub: usize) -> Result<Self> {
        let edges: Vec<_> = (0..d).filter(|&v| v != hub).map(|v| (hub, v)).collect();
        if hub >= d {
            return Err(Error::InvalidGraph("hub outside vertex range".into()));
        }
        Self::from_edges(d, &edges)
    }

    /// Path graph `0 - 1 - ... - (d-1)`.
    pub fn chain(d: usize) -> Self {
        let edges: Vec<_> = (1..d).map(|v| (v - 1, v)).collect();
        Self::from_edges(d, &edges).expect("valid chain")
    }

    pub fn complete(d: usize) -> Self {
        let mut g = Self::empty(d);
        for u in 0..d {
            for v in 0..d {
                g.adjacency[u * d + v] = u != v;
            }
        }
        g
    }

    /// Disjoint union of complete graphs on the blocks of `spec`.
    pub fn complete_blocks(spec: &PartitionSpec) -> Self {
        let d = spec.d();
        let mut g = Self::empty(d);
        for u in 0..d {
            for v in 0..d {
                g.adjacency[u * d + v] = u != v && spec.block_of(u) == spec.block_of(v);
            }
        }
        g
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adjacency[u * self.d + v]
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.d).filter(|&u| self.adjacent(v, u)).count()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.d {
            for v in u + 1..self.d {
                if self.adjacent(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn adjacency_matrix(&self) -> SquareMatrix {
        let values: Vec<f64> = self.adjacency.iter().map(|&a| f64::from(u8::from(a))).collect();
        SquareMatrix::from_row_slice(self.d, &values).expect("square")
    }

    /// Whether the subgraph induced on the distinct vertices of `vertices` is
    /// connected. A single vertex counts as connected.
    pub fn induces_connected(&self, vertices: &[usize]) -> bool {
        let mut distinct = [0usize; MAX_ORDER];
        let mut count = 0;
        for &v in vertices {
            if !distinct[..count].contains(&v) {
                distinct[count] = v;
                count += 1;
            }
        }
        let distinct = &distinct[..count];
        // Union-find over positions in `distinct`.
        let mut parent = [0usize; MAX_ORDER];
        for (k, p) in parent.iter_mut().enumerate().take(count) {
            *p = k;
        }
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = count;
        for a in 0..count {
            for b in a + 1..count {
                if self.adjacent(distinct[a], distinct[b]) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra] = rb;
                        components -= 1;
                    }
                }
            }
        }
        components <= 1
    }

    /// The hub if the graph is a star on at least three vertices.
    pub fn star_hub(&self) -> Option<usize> {
        if self.d < 3 || self.edges().len() != self.d - 1 {
            return None;
        }
        (0..self.d).find(|&v| self.degree(v) == self.d - 1)
    }

    /// Vertex order along the path if the graph is a chain on at least three vertices.
    pub fn chain_order(&self) -> Option<Vec<usize>> {
        if self.d < 3 || self.edges().len() != self.d - 1 {
            return None;
        }
        let ends: Vec<usize> = (0..self.d).filter(|&v| self.degree(v) == 1).collect();
        if ends.len() != 2 || (0..self.d).any(|v| self.degree(v) > 2) {
            return None;
        }
        let mut order = vec![ends[0].min(ends[1])];
        let mut prev = usize::MAX;
        while order.len() < self.d {
            let cur = *order.last().unwrap();
            let next = (0..self.d).find(|&u| u != prev && self.adjacent(cur, u))?;
            prev = cur;
            order.push(next);
        }
        Some(order)
    }

    /// The blocks if the graph is a disjoint union of complete graphs.
    pub fn clique_partition(&self) -> Option<PartitionSpec> {
        let mut assigned = vec![false; self.d];
        let mut blocks = Vec::new();
        for v in 0..self.d {
            if assigned[v] {
                continue;
            }
            let block: Vec<usize> = (0..self.d).filter(|&u| u == v || self.adjacent(v, u)).collect();
            for &a in &block {
                for &b in &block {
                    if a != b && !self.adjacent(a, b) {
                        return None;
                    }
                }
                if assigned[a] {
                    return None;
                }
                assigned[a] = true;
            }
            blocks.push(block);
        }
        PartitionSpec::new(self.d, blocks).ok()
    }
}

/// The independence assumption a pattern encodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatternKind {
    Partition(PartitionSpec),
    Graph(IndependenceGraph),
    Diagonal,
    Reflectional,
    MeanIndependence,
    /// Entries constrained by any of the listed patterns.
    Union(Vec<PatternKind>),
}

impl PatternKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Partition(_) => "partition",
            Self::Graph(_) => "graph",
            Self::Diagonal => "diagonal",
            Self::Reflectional => "reflectional",
            Self::MeanIndependence => "mean_independence",
            Self::Union(_) => "union",
        }
    }
}

/// The set of canonical entries of an order-`r` tensor over `ℝ^d` that an
/// independence assumption forces to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroPattern {
    order: usize,
    dim: usize,
    kind: PatternKind,
    zero: Vec<bool>,
}

impl ZeroPattern {
    fn build(order: usize, dim: usize, kind: PatternKind, is_zero: impl Fn(&[usize]) -> bool) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::OrderOutOfRange {
                order,
                min: 2,
                max: MAX_ORDER,
            });
        }
        if dim == 0 {
            return Err(Error::InvalidInput("pattern dimension must be positive".into()));
        }
        let zero = CanonicalIndices::new(dim, order).map(|idx| is_zero(&idx)).collect();
        Ok(Self {
            order,
            dim,
            kind,
            zero,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PatternKind {
        &self.kind
    }

    /// Zero flags in the tensor storage (colex) order.
    pub fn zero_mask(&self) -> &[bool] {
        &self.zero
    }

    /// Whether the entry at `idx` (any permutation) is constrained to zero.
    pub fn is_zero(&self, idx: &[usize]) -> bool {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        self.zero[colex_rank(&sorted)]
    }

    pub fn num_zero(&self) -> usize {
        self.zero.iter().filter(|&&z| z).count()
    }

    pub fn num_free(&self) -> usize {
        self.zero.len() - self.num_zero()
    }

    pub fn zero_indices(&self) -> Vec<MultiIndex> {
        self.filtered(true)
    }

    pub fn free_indices(&self) -> Vec<MultiIndex> {
        self.filtered(false)
    }

    fn filtered(&self, want_zero: bool) -> Vec<MultiIndex> {
        CanonicalIndices::new(self.dim, self.order)
            .zip(&self.zero)
            .filter(|(_, &z)| z == want_zero)
            .map(|(idx, _)| MultiIndex::new(idx))
            .collect()
    }

    /// Whether two patterns constrain exactly the same entries.
    pub fn same_zero_set(&self, other: &Self) -> bool {
        self.order == other.order && self.dim == other.dim && self.zero == other.zero
    }

    /// Pattern whose zero-set is the union of both zero-sets.
    pub fn union(&self, other: &Self) -> Result<Self> {
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
        let zero = self.zero.iter().zip(&other.zero).map(|(a, b)| *a || *b).collect();
        Ok(Self {
            order: self.order,
            dim: self.dim,
            kind: PatternKind::Union(vec![self.kind.clone(), other.kind.clone()]),
            zero,
        })
    }

    /// Whether relabeling `i ↔ j` maps the zero-set onto itself.
    pub fn invariant_under_swap(&self, i: usize, j: usize) -> bool {
        CanonicalIndices::new(self.dim, self.order)
            .zip(&self.zero)
            .all(|(idx, &z)| {
                let swapped: Vec<usize> = idx
                    .iter()
                    .map(|&v| if v == i { j } else if v == j { i } else { v })
                    .collect();
                self.is_zero(&swapped) == z
            })
    }

    fn check_tensor(&self, t: &SymmetricTensor) -> Result<()> {
        if t.order() != self.order {
            return Err(Error::OrderMismatch {
                expected: self.order,
                found: t.order(),
            });
        }
        if t.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: t.dim(),
            });
        }
        Ok(())
    }
}

/// Entries are zero exactly when two indices lie in different blocks.
pub fn pattern_from_partition(spec: &PartitionSpec, r: usize) -> Result<ZeroPattern> {
    let kind = PatternKind::Partition(spec.clone());
    ZeroPattern::build(r, spec.d(), kind, |idx| {
        let b = spec.block_of(idx[0]);
        idx.iter().any(|&i| spec.block_of(i) != b)
    })
}

/// Entries are zero exactly when the subgraph induced on their distinct
/// indices is disconnected.
pub fn pattern_from_graph(g: &IndependenceGraph, r: usize) -> Result<ZeroPattern> {
    ZeroPattern::build(r, g.d(), PatternKind::Graph(g.clone()), |idx| !g.induces_connected(idx))
}

/// Only constant indices `(i, …, i)` are free.
pub fn diagonal_pattern(d: usize, r: usize) -> Result<ZeroPattern> {
    ZeroPattern::build(r, d, PatternKind::Diagonal, |idx| idx[0] != idx[idx.len() - 1])
}

fn multiplicities(sorted: &[usize]) -> impl Iterator<Item = usize> + '_ {
    let mut pos = 0;
    std::iter::from_fn(move || {
        if pos >= sorted.len() {
            return None;
        }
        let start = pos;
        while pos < sorted.len() && sorted[pos] == sorted[start] {
            pos += 1;
        }
        Some(pos - start)
    })
}

/// Free exactly when every distinct index appears an even number of times.
/// Defined for even orders only.
pub fn reflectional_pattern(d: usize, r: usize) -> Result<ZeroPattern> {
    if r % 2 == 1 {
        return Err(Error::InvalidInput(format!(
            "reflectional patterns need an even order, got {r}"
        )));
    }
    ZeroPattern::build(r, d, PatternKind::Reflectional, |idx| {
        multiplicities(idx).any(|m| m % 2 == 1)
    })
}

/// Zero exactly when some distinct index appears only once.
pub fn mean_independence_pattern(d: usize, r: usize) -> Result<ZeroPattern> {
    ZeroPattern::build(r, d, PatternKind::MeanIndependence, |idx| {
        multiplicities(idx).any(|m| m == 1)
    })
}

/// Outcome of [`is_member`].
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Largest `|T_idx|` over zero-constrained entries.
    pub max_violation: f64,
    /// Index attaining `max_violation`; `None` when nothing is constrained.
    pub worst_index: Option<MultiIndex>,
}

/// Checks that every zero-constrained entry of `t` is within `tol` of zero.
pub fn is_member(t: &SymmetricTensor, p: &ZeroPattern, tol: f64) -> Result<Membership> {
    p.check_tensor(t)?;
    let mut worst: Option<(usize, f64)> = None;
    for (pos, (&z, &v)) in p.zero.iter().zip(t.values()).enumerate() {
        if z && worst.is_none_or(|(_, w)| v.abs() > w) {
            worst = Some((pos, v.abs()));
        }
    }
    let max_violation = worst.map_or(0.0, |(_, w)| w);
    let worst_index = worst.map(|(pos, _)| {
        MultiIndex::new(
            CanonicalIndices::new(p.dim, p.order)
                .nth(pos)
                .expect("position in range"),
        )
    });
    Ok(Membership {
        member: max_violation <= tol,
        max_violation,
        worst_index,
    })
}

/// Sample-level tolerance `5·n^{−1/2}·max|free entry|`.
pub fn statistical_tolerance(t: &SymmetricTensor, p: &ZeroPattern, n: usize) -> Result<f64> {
    p.check_tensor(t)?;
    let scale = p
        .zero
        .iter()
        .zip(t.values())
        .filter(|(&z, _)| !z)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    Ok(5.0 / (n as f64).sqrt() * scale)
}

/// A generic member of the pattern: free entries iid `N(0, scale²)`, zero
/// entries exactly zero. Deterministic per seed.
pub fn generic_sample(p: &ZeroPattern, scale: f64, seed: u64) -> SymmetricTensor {
    let mut rng = seed::rng(seed);
    let values = p
        .zero
        .iter()
        .map(|&z| {
            if z {
                0.0
            } else {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * scale
            }
        })
        .collect();
    SymmetricTensor::from_values(p.order, p.dim, values).expect("pattern shape is valid")
}

/// Whether the diagonal of the marginal matrix `M_ij = T_{+⋯+ij}` has
/// pairwise distinct values (separated by more than `tol`).
pub fn marginal_distinctness(t: &SymmetricTensor, tol: f64) -> Result<bool> {
    let m = marginal_matrix(t)?;
    let diag: Vec<f64> = (0..m.dim()).map(|i| m[(i, i)]).collect();
    for a in 0..diag.len() {
        for b in a + 1..diag.len() {
            if (diag[a] - diag[b]).abs() <= tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
