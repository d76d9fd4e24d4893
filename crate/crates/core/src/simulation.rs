//! Synthetic sources realizing each supported independence structure, and
//! linear mixing.
//!
//! Generation runs over blocks of [`ROW_BLOCK`] rows; block `b` draws from its
//! own stream `seed::split(stream_seed, b)`, so output depends only on the seed
//! and never on the number of worker threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{SampleMatrix, ROW_BLOCK};
use crate::groups::haar_orthogonal;
use crate::linalg::SquareMatrix;
use crate::patterns::{IndependenceGraph, PartitionSpec};
use crate::seed;

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const MIXTURE_OFFSET: f64 = 0.8;
const MIXTURE_SPREAD: f64 = 0.6;
const BINARY_P: f64 = 0.1;
const BINARY_JITTER: f64 = 0.2;
/// Weight of the bounded odd coupling inside partitioned blocks.
const BLOCK_COUPLING: f64 = 1.0;

/// Base distribution of a source coordinate; every variant has mean 0 and
/// variance 1 by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// Difference of two iid unit exponentials, scaled by `1/√2`.
    LaplaceLike,
    /// `±0.8` with equal probability plus `N(0, 0.36)` noise.
    RademacherMixture,
    /// Bernoulli(0.1) plus `0.2·U(0, 1)` jitter, standardized; strongly skewed.
    SkewedBinary,
    /// Standard normal. At most one Gaussian column is allowed per source matrix.
    Gaussian,
}

impl Dist {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Dist::Uniform => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
            Dist::LaplaceLike => {
                let e1 = -(1.0 - rng.random::<f64>()).ln();
                let e2 = -(1.0 - rng.random::<f64>()).ln();
                (e1 - e2) / std::f64::consts::SQRT_2
            }
            Dist::RademacherMixture => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let g: f64 = StandardNormal.sample(rng);
                sign * MIXTURE_OFFSET + MIXTURE_SPREAD * g
            }
            Dist::SkewedBinary => {
                let b = if rng.random::<f64>() < BINARY_P { 1.0 } else { 0.0 };
                let raw = b + BINARY_JITTER * rng.random::<f64>();
                let mean = BINARY_P + BINARY_JITTER / 2.0;
                let var = BINARY_P * (1.0 - BINARY_P) + BINARY_JITTER * BINARY_JITTER / 12.0;
                (raw - mean) / var.sqrt()
            }
            Dist::Gaussian => StandardNormal.sample(rng),
        }
    }

    /// Population third cumulant (skewness).
    pub fn kappa3(self) -> f64 {
        match self {
            Dist::SkewedBinary => {
                let p = BINARY_P;
                let var = p * (1.0 - p) + BINARY_JITTER * BINARY_JITTER / 12.0;
                p * (1.0 - p) * (1.0 - 2.0 * p) / var.powf(1.5)
            }
            _ => 0.0,
        }
    }

    /// Population fourth cumulant (excess kurtosis).
    pub fn kappa4(self) -> f64 {
        match self {
            Dist::Uniform => -1.2,
            Dist::LaplaceLike => 3.0,
            Dist::RademacherMixture => {
                let (a, s2) = (MIXTURE_OFFSET, MIXTURE_SPREAD * MIXTURE_SPREAD);
                a.powi(4) + 6.0 * a * a * s2 + 3.0 * s2 * s2 - 3.0
            }
            Dist::SkewedBinary => {
                let p = BINARY_P;
                let pq = p * (1.0 - p);
                let w2 = BINARY_JITTER * BINARY_JITTER / 12.0;
                (pq * (1.0 - 6.0 * pq) - 1.2 * w2 * w2) / (pq + w2).powi(2)
            }
            Dist::Gaussian => 0.0,
        }
    }
}

/// Fills an `n × width` row-major buffer; each row is produced by `row_fn`
/// from the generator of the row's block.
fn generate_rows(
    n: usize,
    width: usize,
    stream_seed: u64,
    row_fn: impl Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
) -> Vec<f64> {
    let mut values = vec![0.0; n * width];
    values
        .par_chunks_mut(width * ROW_BLOCK)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = seed::child_rng(stream_seed, block as u64);
            for row in chunk.chunks_exact_mut(width) {
                row_fn(&mut rng, row);
            }
        });
    values
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    Ok(())
}

/// Independent columns with per-column distributions; at most one Gaussian.
pub fn gen_mixed_sources(n: usize, dists: &[Dist], seed: u64) -> Result<SampleMatrix> {
    check_n(n)?;
    if dists.iter().filter(|&&d| d == Dist::Gaussian).count() > 1 {
        return Err(Error::InvalidInput(
            "at most one Gaussian source is allowed".into(),
        ));
    }
    let d = dists.len();
    let values = generate_rows(n, d, seed, |rng, row| {
        for (slot, dist) in row.iter_mut().zip(dists) {
            *slot = dist.sample(rng);
        }
    });
    SampleMatrix::new(n, d, values)
}

/// `d` mutually independent standardized columns from `dist`.
pub fn gen_independent_sources(n: usize, d: usize, dist: Dist, seed: u64) -> Result<SampleMatrix> {
    gen_mixed_sources(n, &vec![dist; d], seed)
}

/// Symmetric whitening of a small column group in place (columns `cols` of a
/// row-major `n × width` buffer), using the sample mean and covariance.
fn whiten_columns(values: &mut [f64], width: usize, cols: &[usize]) -> Result<()> {
    let k = cols.len();
    let n = values.len() / width;
    let mut mean = vec![0.0; k];
    for row in values.chunks_exact(width) {
        for (m, &c) in mean.iter_mut().zip(cols) {
            *m += row[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for row in values.chunks_exact(width) {
        for a in 0..k {
            for b in 0..k {
                cov[(a, b)] += (row[cols[a]] - mean[a]) * (row[cols[b]] - mean[b]);
            }
        }
    }
    cov /= n as f64;
    let eig = SymmetricEigen::new(cov);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= 0.0 {
        return Err(Error::DegenerateCovariance {
            min_eigenvalue: min,
            threshold: 0.0,
        });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let z = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let mut buf = vec![0.0; k];
    for row in values.chunks_exact_mut(width) {
        for a in 0..k {
            buf[a] = (0..k).map(|b| z[(a, b)] * (row[cols[b]] - mean[b])).sum();
        }
        for (a, &c) in cols.iter().enumerate() {
            row[c] = buf[a];
        }
    }
    Ok(())
}

/// Well-conditioned random invertible matrix `U·diag(s)·V` with `s ∈ [0.5, 1.5]`.
fn random_invertible(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let u = haar_orthogonal(k, rng);
    let v = haar_orthogonal(k, rng);
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(k, |_, _| 0.5 + rng.random::<f64>()));
    u * s * v
}

/// Sources with mutually independent blocks and dependent coordinates inside
/// each block.
///
/// A block of size `k ≥ 2` mixes `k` iid latents from `dist` by a random
/// invertible matrix, adds `tanh(2·u₂)` to its first coordinate, and is then
/// whitened with its sample covariance. Singleton blocks are plain draws from
/// `dist`.
pub fn gen_partitioned_sources(n: usize, spec: &PartitionSpec, dist: Dist, seed: u64) -> Result<SampleMatrix> {
    check_n(n)?;
    let d = spec.d();
    let mut values = vec![0.0; n * d];
    for (b, block) in spec.blocks().iter().enumerate() {
        let block_seed = seed::split(seed, b as u64);
        let k = block.len();
        let mixing = random_invertible(k, &mut seed::child_rng(block_seed, u64::MAX));
        let local = generate_rows(n, k, block_seed, |rng, row| {
            if k == 1 {
                row[0] = dist.sample(rng);
                return;
            }
            let latent: Vec<f64> = (0..k).map(|_| dist.sample(rng)).collect();
            for (a, slot) in row.iter_mut().enumerate() {
                *slot = (0..k).map(|c| mixing[(a, c)] * latent[c]).sum();
            }
            if k >= 2 {
                row[0] += BLOCK_COUPLING * (2.0 * row[1]).tanh();
            }
        });
        scatter_columns(&mut values, d, block, &local);
        if k >= 2 {
            whiten_columns(&mut values, d, block)?;
        }
    }
    SampleMatrix::new(n, d, values)
}

/// Copies the `k = cols.len()` columns of `local` into columns `cols` of `values`.
fn scatter_columns(values: &mut [f64], width: usize, cols: &[usize], local: &[f64]) {
    let k = cols.len();
    for (row, local_row) in values.chunks_exact_mut(width).zip(local.chunks_exact(k)) {
        for (&col, &v) in cols.iter().zip(local_row) {
            row[col] = v;
        }
    }
}

/// Partitioned sources whose blocks are mutually mean independent: inside a
/// block every coordinate is an independent random sign times a magnitude
/// driven by a shared latent, `x_i = ε_i·(0.3 + α_i·z + 0.4·u_i)`, with
/// `α_i = 1, 2, 3, …` so the coordinates have distinct fourth-order marginals.
/// Each coordinate is scaled to unit sample variance. The cumulant tensor of
/// such a block is reflectionally invariant.
pub fn gen_sign_scale_sources(n: usize, spec: &PartitionSpec, seed: u64) -> Result<SampleMatrix> {
    check_n(n)?;
    let d = spec.d();
    let mut values = vec![0.0; n * d];
    for (b, block) in spec.blocks().iter().enumerate() {
        let k = block.len();
        let local = generate_rows(n, k, seed::split(seed, b as u64), |rng, row| {
            let z = rng.random::<f64>();
            for (a, slot) in row.iter_mut().enumerate() {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let alpha = (a + 1) as f64;
                *slot = sign * (0.3 + alpha * z + 0.4 * rng.random::<f64>());
            }
        });
        scatter_columns(&mut values, d, block, &local);
    }
    standardize_columns(&mut values, d, &(0..d).collect::<Vec<_>>());
    SampleMatrix::new(n, d, values)
}

/// Centers and scales the given columns to unit sample variance.
fn standardize_columns(values: &mut [f64], width: usize, cols: &[usize]) {
    let n = (values.len() / width) as f64;
    for &c in cols {
        let mean = values.chunks_exact(width).map(|r| r[c]).sum::<f64>() / n;
        let var = values
            .chunks_exact(width)
            .map(|r| (r[c] - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        for row in values.chunks_exact_mut(width) {
            row[c] = (row[c] - mean) / sd;
        }
    }
}

/// Base distribution of graph-structured sources. It is skewed so that the
/// third-order cumulant entries allowed by the graph are visibly non-zero.
pub const GRAPH_BASE: Dist = Dist::SkewedBinary;

/// Sources whose pairwise independences are exactly the non-edges of `g`.
///
/// Supported families:
/// - disjoint unions of complete graphs: partitioned sources over the cliques;
/// - stars: iid leaves, hub `= Σ_j leaf_j³ + noise` standardized by its sample
///   moments;
/// - chains: moving average `x_k = (ε_k + ε_{k+1})/√2` along the path.
pub fn gen_graph_sources(n: usize, g: &IndependenceGraph, seed: u64) -> Result<SampleMatrix> {
    check_n(n)?;
    let d = g.d();
    if let Some(spec) = g.clique_partition() {
        return gen_partitioned_sources(n, &spec, GRAPH_BASE, seed);
    }
    if let Some(hub) = g.star_hub() {
        let values = generate_rows(n, d, seed, |rng, row| {
            let mut hub_value = 0.0;
            for (v, slot) in row.iter_mut().enumerate() {
                if v != hub {
                    *slot = GRAPH_BASE.sample(rng);
                    hub_value += slot.powi(3);
                }
            }
            row[hub] = hub_value + GRAPH_BASE.sample(rng);
        });
        let mut values = values;
        standardize_columns(&mut values, d, &[hub]);
        return SampleMatrix::new(n, d, values);
    }
    if let Some(order) = g.chain_order() {
        let values = generate_rows(n, d, seed, |rng, row| {
            let mut prev = GRAPH_BASE.sample(rng);
            for &v in &order {
                let next = GRAPH_BASE.sample(rng);
                row[v] = (prev + next) / std::f64::consts::SQRT_2;
                prev = next;
            }
        });
        return SampleMatrix::new(n, d, values);
    }
    Err(Error::UnsupportedGraph)
}

/// Mixes sources: every row `s` becomes `A·s`.
pub fn mix(s: &SampleMatrix, a: &SquareMatrix) -> Result<SampleMatrix> {
    s.map_rows(a)
}

/// Which independence structure a [`SourceSpec`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Independent,
    Partitioned,
    Graph,
}

/// Serializable description of a source generator. Blocks and edges use
/// 1-based vertex labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default = "default_dist")]
    pub dist: Dist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_dist() -> Dist {
    Dist::Uniform
}

fn zero_based(labels: &[usize], d: usize) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&v| {
            if v == 0 || v > d {
                Err(Error::IndexOutOfRange { index: v, dim: d })
            } else {
                Ok(v - 1)
            }
        })
        .collect()
}

impl SourceSpec {
    pub fn partition(&self) -> Result<Option<PartitionSpec>> {
        self.blocks
            .as_ref()
            .map(|blocks| {
                let blocks = blocks
                    .iter()
                    .map(|b| zero_based(b, self.d))
                    .collect::<Result<Vec<_>>>()?;
                PartitionSpec::new(self.d, blocks)
            })
            .transpose()
    }

    pub fn graph(&self) -> Result<Option<IndependenceGraph>> {
        self.edges
            .as_ref()
            .map(|edges| {
                let edges = edges
                    .iter()
                    .map(|e| {
                        let z = zero_based(e, self.d)?;
                        Ok((z[0], z[1]))
                    })
                    .collect::<Result<Vec<_>>>()?;
                IndependenceGraph::from_edges(self.d, &edges)
            })
            .transpose()
    }

    /// Checks that exactly the structure the kind needs is present and that
    /// the base distribution is admissible.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidInput("source dimension must be positive".into()));
        }
        let (want_blocks, want_edges) = match self.kind {
            SourceKind::Independent => (false, false),
            SourceKind::Partitioned => (true, false),
            SourceKind::Graph => (false, true),
        };
        if self.blocks.is_some() != want_blocks || self.edges.is_some() != want_edges {
            return Err(Error::InvalidInput(format!(
                "{:?} sources need {}",
                self.kind,
                match self.kind {
                    SourceKind::Independent => "neither blocks nor edges",
                    SourceKind::Partitioned => "blocks and no edges",
                    SourceKind::Graph => "edges and no blocks",
                }
            )));
        }
        if self.dist == Dist::Gaussian && (self.d > 1 || self.kind != SourceKind::Independent) {
            return Err(Error::InvalidInput(
                "Gaussian base distribution would create more than one Gaussian source".into(),
            ));
        }
        self.partition()?;
        self.graph()?;
        Ok(())
    }

    /// Generates `n` samples with the given seed.
    pub fn generate(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        self.validate()?;
        match self.kind {
            SourceKind::Independent => gen_independent_sources(n, self.d, self.dist, seed),
            SourceKind::Partitioned => {
                let spec = self.partition()?.expect("validated");
                gen_partitioned_sources(n, &spec, self.dist, seed)
            }
            SourceKind::Graph => {
                let g = self.graph()?.expect("validated");
                gen_graph_sources(n, &g, seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = gen_independent_sources(10_000, 3, Dist::LaplaceLike, 5).unwrap();
        let b = gen_independent_sources(10_000, 3, Dist::LaplaceLike, 5).unwrap();
        assert_eq!(a, b);
        let c = gen_independent_sources(10_000, 3, Dist::LaplaceLike, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let spec = PartitionSpec::from_sizes(&[2, 1]).unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| gen_partitioned_sources(20_000, &spec, Dist::Uniform, 3).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| gen_partitioned_sources(20_000, &spec, Dist::Uniform, 3).unwrap());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn gaussian_limit() {
        assert!(gen_independent_sources(10, 2, Dist::Gaussian, 0).is_err());
        assert!(gen_independent_sources(10, 1, Dist::Gaussian, 0).is_ok());
        assert!(gen_mixed_sources(10, &[Dist::Gaussian, Dist::Uniform], 0).is_ok());
        assert!(gen_independent_sources(0, 1, Dist::Uniform, 0).is_err());
    }

    #[test]
    fn unsupported_graph_is_rejected() {
        let cycle = IndependenceGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(matches!(gen_graph_sources(100, &cycle, 0), Err(Error::UnsupportedGraph)));
    }

    #[test]
    fn spec_validation() {
        let ok: SourceSpec = serde_json::from_str(r#"{"kind":"partitioned","d":3,"blocks":[[1,2],[3]]}"#).unwrap();
        ok.validate().unwrap();
        assert_eq!(ok.dist, Dist::Uniform);
        let missing: SourceSpec = serde_json::from_str(r#"{"kind":"graph","d":3}"#).unwrap();
        assert!(missing.validate().is_err());
        let extra: SourceSpec =
            serde_json::from_str(r#"{"kind":"independent","d":3,"edges":[[1,2]]}"#).unwrap();
        assert!(extra.validate().is_err());
        let bad_label: SourceSpec =
            serde_json::from_str(r#"{"kind":"partitioned","d":2,"blocks":[[0,1]]}"#).unwrap();
        assert!(bad_label.validate().is_err());
        let gauss: SourceSpec =
            serde_json::from_str(r#"{"kind":"independent","d":2,"dist":"gaussian"}"#).unwrap();
        assert!(gauss.validate().is_err());
    }

    #[test]
    fn identity_mixing_and_inverse() {
        let s = gen_independent_sources(1000, 3, Dist::Uniform, 1).unwrap();
        assert_eq!(mix(&s, &SquareMatrix::identity(3)).unwrap(), s);
        let a = crate::groups::random_orthogonal(3, 4);
        let back = mix(&mix(&s, &a).unwrap(), &a.inverse().unwrap()).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-10);
        assert!(mix(&s, &SquareMatrix::identity(2)).is_err());
    }
}
