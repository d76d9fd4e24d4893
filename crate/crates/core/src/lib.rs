//! Cumulant-tensor tools for partitioned independent component analysis.
//!
//! The crate estimates higher-order cumulant tensors from data, builds the
//! zero-patterns that independence assumptions impose on them, samples and
//! recognizes the matrix groups that preserve those patterns, simulates
//! sources with prescribed independence structure, and recovers unmixing
//! matrices up to the block-orthogonal ambiguity.
//!
//! Indices are 0-based in the API; the JSON and CSV formats in [`io`] are
//! 1-based where indices appear.

pub mod error;
pub mod estimation;
pub mod groups;
pub mod io;
pub mod linalg;
pub mod partitions;
pub mod patterns;
pub mod recovery;
pub mod seed;
pub mod simulation;
pub mod tensor;

pub use error::{Error, Result};
pub use estimation::{center, covariance, sample_cumulant, sample_moment, whiten, SampleMatrix, WhiteningResult};
pub use groups::{
    classify_blocks, coset_residual, graph_automorphism_check, is_block_orthogonal, is_block_signed_permutation,
    is_signed_permutation, random_block_orthogonal, random_orthogonal, random_signed_permutation, BlockClassification,
    BlockLabel, BlockStructure, CosetResidual,
};
pub use linalg::SquareMatrix;
pub use partitions::{cumulants_to_moments, enumerate_partitions, moments_to_cumulants, SetPartition};
pub use patterns::{
    diagonal_pattern, generic_sample, is_member, marginal_distinctness, mean_independence_pattern,
    pattern_from_graph, pattern_from_partition, reflectional_pattern, IndependenceGraph, Membership, PartitionSpec,
    PatternKind, ZeroPattern,
};
pub use recovery::{
    comon_pipeline, estimate_unmixing, off_pattern_energy, verify_identifiability, RecoveryOptions, RecoveryReport,
};
pub use simulation::{mix, Dist, SourceSpec};
pub use tensor::{hessian_eval, marginalize, multilinear_transform, polynomial_eval, MultiIndex, SymmetricTensor};
