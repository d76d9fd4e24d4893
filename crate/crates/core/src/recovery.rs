//! Unmixing-matrix estimation by minimizing off-pattern cumulant energy over
//! the orthogonal group, and identifiability verification.
//!
//! The optimizer is cyclic Givens coordinate descent. For a rotation by `θ`
//! in the `(i, j)` plane, every entry of the rotated order-`r` tensor is a
//! homogeneous degree-`r` form in `(cos θ, sin θ)`, so the energy is a
//! trigonometric polynomial in `2θ` of degree `r`. It is sampled at `2r + 1`
//! angles to bracket the global minimum on the search interval, then the true
//! energy is minimized by golden-section search and a final parabolic step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{sample_cumulant, whiten, SampleMatrix};
use crate::groups::{coset_residual, nearest_signed_permutation, random_orthogonal, BlockStructure};
use crate::linalg::SquareMatrix;
use crate::patterns::{diagonal_pattern, ZeroPattern};
use crate::seed;
use crate::tensor::{multilinear_transform, permutation_count, SymmetricTensor};

/// Residuals below this count as identified.
pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 0.1;
/// Max-abs distance from a signed permutation accepted by [`comon_pipeline`].
pub const DEFAULT_SIGNED_PERMUTATION_TOL: f64 = 0.05;

const GOLDEN_ITERATIONS: usize = 60;
const GRID_PER_PERIOD: usize = 64;

/// Settings for [`estimate_unmixing`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    /// Cumulant order.
    pub order: usize,
    pub max_sweeps: usize,
    /// A sweep that lowers the objective by less than this ends the descent.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub residual_threshold: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            order: 4,
            max_sweeps: 100,
            tol: 1e-12,
            restarts: 8,
            seed: 0,
            residual_threshold: DEFAULT_RESIDUAL_THRESHOLD,
        }
    }
}

impl RecoveryOptions {
    pub fn validate(&self) -> Result<()> {
        if self.order < 3 {
            return Err(Error::InvalidInput(format!(
                "cumulant order must be at least 3, got {}",
                self.order
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput("at least one restart is required".into()));
        }
        Ok(())
    }
}

/// `Σ_{zero-constrained idx} (#permutations of idx)·T_idx²`, the squared
/// norm of the full tensor restricted to the constrained entries.
pub fn off_pattern_energy(t: &SymmetricTensor, p: &ZeroPattern) -> Result<f64> {
    if t.order() != p.order() {
        return Err(Error::OrderMismatch {
            expected: p.order(),
            found: t.order(),
        });
    }
    if t.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: t.dim(),
        });
    }
    Ok(t.entries()
        .zip(p.zero_mask())
        .filter(|(_, &z)| z)
        .map(|((idx, v), _)| permutation_count(&idx) as f64 * v * v)
        .sum())
}

/// Dense working copy of a rotated tensor.
struct DenseState {
    d: usize,
    r: usize,
    full: Vec<f64>,
    /// Flat offsets of zero-constrained entries.
    constrained: Vec<usize>,
}

impl DenseState {
    fn new(t: &SymmetricTensor, p: &ZeroPattern) -> Self {
        let d = t.dim();
        let r = t.order();
        let full = t.to_full();
        let mut idx = vec![0usize; r];
        let constrained = (0..full.len())
            .filter(|&offset| {
                let mut o = offset;
                for slot in idx.iter_mut().rev() {
                    *slot = o % d;
                    o /= d;
                }
                p.is_zero(&idx)
            })
            .collect();
        Self {
            d,
            r,
            full,
            constrained,
        }
    }

    fn energy_of(&self, full: &[f64]) -> f64 {
        self.constrained.iter().map(|&o| full[o] * full[o]).sum()
    }

    fn energy(&self) -> f64 {
        self.energy_of(&self.full)
    }

    /// Applies the plane rotation `e_i ← c·e_i − s·e_j`, `e_j ← s·e_i + c·e_j`
    /// to every mode of `src`, writing into `dst`.
    fn rotate_into(&self, src: &[f64], dst: &mut [f64], i: usize, j: usize, theta: f64) {
        dst.copy_from_slice(src);
        let (s, c) = theta.sin_cos();
        let d = self.d;
        for mode in 0..self.r {
            let stride = d.pow((self.r - 1 - mode) as u32);
            let outer = dst.len() / (stride * d);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * stride * d + inner;
                    let (pi, pj) = (base + i * stride, base + j * stride);
                    let (vi, vj) = (dst[pi], dst[pj]);
                    dst[pi] = c * vi - s * vj;
                    dst[pj] = s * vi + c * vj;
                }
            }
        }
    }

    fn energy_at(&self, i: usize, j: usize, theta: f64, scratch: &mut [f64]) -> f64 {
        self.rotate_into(&self.full, scratch, i, j, theta);
        self.energy_of(scratch)
    }
}

/// Coefficients of `a₀ + Σ_m a_m cos(2mθ) + b_m sin(2mθ)`, `m = 1..=r`.
struct TrigPoly {
    a0: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigPoly {
    /// Interpolates from `2r + 1` equispaced samples on `[0, π)`.
    fn fit(r: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let n = 2 * r + 1;
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::PI * k as f64 / n as f64;
                (theta, f(theta))
            })
            .collect();
        let a0 = samples.iter().map(|s| s.1).sum::<f64>() / n as f64;
        let (mut a, mut b) = (vec![0.0; r], vec![0.0; r]);
        for m in 1..=r {
            for &(theta, v) in &samples {
                let (s, c) = (2.0 * m as f64 * theta).sin_cos();
                a[m - 1] += 2.0 / n as f64 * v * c;
                b[m - 1] += 2.0 / n as f64 * v * s;
            }
        }
        Self { a0, a, b }
    }

    fn eval(&self, theta: f64) -> f64 {
        self.a0
            + self
                .a
                .iter()
                .zip(&self.b)
                .enumerate()
                .map(|(k, (a, b))| {
                    let (s, c) = (2.0 * (k + 1) as f64 * theta).sin_cos();
                    a * c + b * s
                })
                .sum::<f64>()
    }
}

/// Minimizes the energy of the `(i, j)` plane rotation over `[−half, half)`.
/// Returns the angle and its energy.
fn minimize_plane(state: &DenseState, i: usize, j: usize, half: f64, scratch: &mut [f64]) -> (f64, f64) {
    let poly = TrigPoly::fit(state.r, |theta| state.energy_at(i, j, theta, scratch));
    let width = 2.0 * half;
    let h = width / GRID_PER_PERIOD as f64;
    let best_k = (0..GRID_PER_PERIOD)
        .min_by(|&a, &b| {
            let fa = poly.eval(-half + a as f64 * h);
            let fb = poly.eval(-half + b as f64 * h);
            fa.total_cmp(&fb)
        })
        .unwrap();
    let centre = -half + best_k as f64 * h;

    // Golden-section on the exact energy around the bracketed minimum.
    let mut f = |theta: f64| state.energy_at(i, j, theta, scratch);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (centre - h, centre + h);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let (mut best_theta, mut best_f) = if f1 < f2 { (x1, f1) } else { (x2, f2) };

    // Parabolic step through (x1, x2, midpoint).
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    let (xa, xb, xc) = (x1, xm, x2);
    let (fa, fb, fc) = (f1, fm, f2);
    let denom = (xb - xa) * (fb - fc) - (xb - xc) * (fb - fa);
    if denom.abs() > f64::MIN_POSITIVE {
        let step = xb - 0.5 * ((xb - xa).powi(2) * (fb - fc) - (xb - xc).powi(2) * (fb - fa)) / denom;
        if step.is_finite() && (step - xb).abs() <= h {
            let fs = f(step);
            if fs < best_f {
                best_theta = step;
                best_f = fs;
            }
        }
    }
    if fm < best_f {
        best_theta = xm;
        best_f = fm;
    }
    (best_theta, best_f)
}

/// Result of [`optimize_rotation`].
#[derive(Clone, Debug, PartialEq)]
pub struct RotationFit {
    pub rotation: SquareMatrix,
    pub objective: f64,
    /// Objective before the first sweep, then after each sweep.
    pub sweep_objectives: Vec<f64>,
    pub converged: bool,
}

/// Cyclic Givens descent on `Q ↦ off_pattern_energy(Q•T, P)` starting from `init`.
pub fn optimize_rotation(
    t: &SymmetricTensor,
    p: &ZeroPattern,
    init: &SquareMatrix,
    max_sweeps: usize,
    tol: f64,
) -> Result<RotationFit> {
    let start = multilinear_transform(init, t)?;
    let mut state = DenseState::new(&start, p);
    let d = state.d;
    let mut q = init.clone().into_inner();
    let mut scratch = vec![0.0; state.full.len()];
    let half_widths: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if i < j && p.invariant_under_swap(i, j) {
                        std::f64::consts::FRAC_PI_4
                    } else {
                        std::f64::consts::FRAC_PI_2
                    }
                })
                .collect()
        })
        .collect();

    let mut objective = state.energy();
    let mut history = vec![objective];
    let mut converged = false;
    for _ in 0..max_sweeps {
        let before = objective;
        for i in 0..d {
            for j in i + 1..d {
                let (theta, value) = minimize_plane(&state, i, j, half_widths[i][j], &mut scratch);
                if value < objective {
                    state.rotate_into(&state.full.clone(), &mut scratch, i, j, theta);
                    std::mem::swap(&mut state.full, &mut scratch);
                    objective = state.energy();
                    let (s, c) = theta.sin_cos();
                    for col in 0..d {
                        let (vi, vj) = (q[(i, col)], q[(j, col)]);
                        q[(i, col)] = c * vi - s * vj;
                        q[(j, col)] = s * vi + c * vj;
                    }
                }
            }
        }
        history.push(objective);
        if before - objective < tol {
            converged = true;
            break;
        }
    }
    let rotation = SquareMatrix::new(q)?;
    let objective = off_pattern_energy(&multilinear_transform(&rotation, t)?, p)?;
    Ok(RotationFit {
        rotation,
        objective,
        sweep_objectives: history,
        converged,
    })
}

/// Runs [`optimize_rotation`] from `restarts` Haar-random starting points
/// (stream `k` of `seed` for restart `k`).
pub fn search_rotations(
    t: &SymmetricTensor,
    p: &ZeroPattern,
    restarts: usize,
    seed: u64,
    max_sweeps: usize,
    tol: f64,
) -> Result<Vec<RotationFit>> {
    (0..restarts)
        .into_par_iter()
        .map(|k| {
            let init = random_orthogonal(t.dim(), seed::split(seed, k as u64));
            optimize_rotation(t, p, &init, max_sweeps, tol)
        })
        .collect()
}

/// Comparison of a recovered unmixing matrix with the true mixing matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    /// `W·A_true`.
    pub product: SquareMatrix,
    pub blocks: Vec<usize>,
    pub residual: f64,
    pub assignment: Vec<usize>,
    pub block_distances: Vec<f64>,
    pub identified: bool,
}

/// Output of [`estimate_unmixing`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// `W = Q·Z`.
    pub unmixing: SquareMatrix,
    pub whitening: SquareMatrix,
    pub rotation: SquareMatrix,
    pub mean: Vec<f64>,
    pub order: usize,
    pub objective: f64,
    pub restart_objectives: Vec<f64>,
    pub best_restart: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifiability: Option<IdentifiabilityReport>,
    /// Max-abs distance of `W·A_true` from the nearest signed permutation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_permutation_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_permutation: Option<bool>,
}

impl RecoveryReport {
    /// Attaches a comparison against the true mixing matrix.
    pub fn attach_truth(&mut self, a_true: &SquareMatrix, blocks: &BlockStructure, threshold: f64) -> Result<()> {
        self.identifiability = Some(verify_identifiability(&self.unmixing, a_true, blocks, threshold)?);
        Ok(())
    }
}

/// Scores `W·A_true` against the block-orthogonal group of `blocks`.
pub fn verify_identifiability(
    w: &SquareMatrix,
    a_true: &SquareMatrix,
    blocks: &BlockStructure,
    threshold: f64,
) -> Result<IdentifiabilityReport> {
    if w.dim() != a_true.dim() {
        return Err(Error::DimensionMismatch {
            expected: a_true.dim(),
            found: w.dim(),
        });
    }
    a_true.inverse()?;
    let product = w * a_true;
    let coset = coset_residual(&product, blocks)?;
    Ok(IdentifiabilityReport {
        product,
        blocks: blocks.sizes().to_vec(),
        residual: coset.residual,
        assignment: coset.assignment,
        block_distances: coset.block_distances,
        identified: coset.residual < threshold,
    })
}

/// Centers and whitens `y`, estimates `κ̂_r`, and finds the rotation that best
/// places `Q•κ̂_r` in `p`. Restart 0 starts at the identity, restart `k > 0`
/// at a Haar-random rotation from stream `k` of `opts.seed`. The lowest
/// objective wins, ties going to the lower restart index.
pub fn estimate_unmixing(y: &SampleMatrix, p: &ZeroPattern, opts: &RecoveryOptions) -> Result<RecoveryReport> {
    opts.validate()?;
    if p.order() != opts.order {
        return Err(Error::OrderMismatch {
            expected: opts.order,
            found: p.order(),
        });
    }
    if p.dim() != y.d() {
        return Err(Error::DimensionMismatch {
            expected: y.d(),
            found: p.dim(),
        });
    }
    let white = whiten(y)?;
    let kappa = sample_cumulant(&white.whitened, opts.order)?;
    let d = y.d();
    let fits: Vec<RotationFit> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let init = if k == 0 {
                SquareMatrix::identity(d)
            } else {
                random_orthogonal(d, seed::split(opts.seed, k as u64))
            };
            optimize_rotation(&kappa, p, &init, opts.max_sweeps, opts.tol)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (k, fit) in fits.iter().enumerate() {
        if fit.objective < fits[best].objective {
            best = k;
        }
    }
    let rotation = fits[best].rotation.clone();
    Ok(RecoveryReport {
        unmixing: &rotation * &white.transform,
        whitening: white.transform,
        rotation,
        mean: white.mean,
        order: opts.order,
        objective: fits[best].objective,
        restart_objectives: fits.iter().map(|f| f.objective).collect(),
        best_restart: best,
        identifiability: None,
        signed_permutation_distance: None,
        signed_permutation: None,
    })
}

/// Classical ICA: [`estimate_unmixing`] with the diagonal pattern. With a
/// known mixing matrix the report also scores `W·A` against signed
/// permutations.
pub fn comon_pipeline(y: &SampleMatrix, opts: &RecoveryOptions, truth: Option<&SquareMatrix>) -> Result<RecoveryReport> {
    let pattern = diagonal_pattern(y.d(), opts.order)?;
    let mut report = estimate_unmixing(y, &pattern, opts)?;
    if let Some(a) = truth {
        report.attach_truth(a, &BlockStructure::singletons(y.d())?, opts.residual_threshold)?;
        let product = &report.unmixing * a;
        let (_, dist) = nearest_signed_permutation(&product)?;
        report.signed_permutation_distance = Some(dist);
        report.signed_permutation = Some(dist <= DEFAULT_SIGNED_PERMUTATION_TOL);
    }
    Ok(report)
}
