//! Per-Fourier-mode operators and their semigroups.
//!
//! With `xi = s e_1` the four operators
//!
//! ```text
//! B(xi)  = L - i s v_1 - (i/s) v_1 P_0
//! B1(xi) = P_2 B(xi) P_2                       (4x4 fluid block)
//! B2(xi) = P_3 (L - i s v_1) P_3               (microscopic block)
//! A(xi)  = L - 2 - i s v_1
//! ```
//!
//! only couple basis functions that share `(alpha_2, alpha_3)`.  Each
//! operator is therefore stored as a list of small dense blocks, one per
//! chain of [`BasisSpec::e1_chains`]; exponentials and spectra are computed
//! block by block and the dense matrix is only materialized on request.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{xi_norm, BasisSpec, Projection};
use crate::error::{Result, VpfpError};
use crate::linalg::{eigenvalues, expm, expm_checked, op_norm2};
use crate::{CMat, CVec, C64};

/// Backward-error tolerance for matrix exponentials.
pub const EXPM_TOLERANCE: f64 = 1e-8;

/// Which mode operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    B,
    B1,
    B2,
    A,
}

impl ModeKind {
    /// Projection onto the invariant subspace the operator acts on.
    pub fn support(self) -> Option<Projection> {
        match self {
            ModeKind::B | ModeKind::A => None,
            ModeKind::B1 => Some(Projection::P2),
            ModeKind::B2 => Some(Projection::P3),
        }
    }
}

/// A dense block acting on the listed global basis indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OpBlock {
    pub indices: Vec<usize>,
    pub matrix: CMat,
}

/// Block-diagonal representation of one mode operator.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub kind: ModeKind,
    pub xi_mag: f64,
    pub basis: Arc<BasisSpec>,
    /// Global basis indices of the invariant subspace, ascending.
    pub support: Vec<usize>,
    pub blocks: Vec<OpBlock>,
}

/// Exponential `e^{t Op}` in the same block form.
#[derive(Debug, Clone)]
pub struct SemigroupEval {
    pub kind: ModeKind,
    pub xi_mag: f64,
    pub t: f64,
    pub support: Vec<usize>,
    pub blocks: Vec<OpBlock>,
    dim: usize,
}

/// Tridiagonal chain matrix `diag(shift - (a1 + p)) - i s * ladder(v_1)`.
///
/// `keep[a1]` masks chain members (used for the `P_2`/`P_3` restrictions).
fn chain_block(len: usize, p: usize, s: f64, shift: f64) -> CMat {
    let mut m = CMat::zeros(len, len);
    for a1 in 0..len {
        m[(a1, a1)] = C64::new(shift - (a1 + p) as f64, 0.0);
        if a1 + 1 < len {
            let e = C64::new(0.0, -s * ((a1 + 1) as f64).sqrt());
            m[(a1 + 1, a1)] = e;
            m[(a1, a1 + 1)] = e;
        }
    }
    m
}

fn select(m: &CMat, rows: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), rows.len(), |i, j| m[(rows[i], rows[j])])
}

impl ModeOperator {
    /// Assemble `kind` at `|xi| = xi_mag` on `basis`.
    pub fn assemble(kind: ModeKind, xi_mag: f64, basis: Arc<BasisSpec>) -> Result<Self> {
        if !xi_mag.is_finite() || xi_mag < 0.0 {
            return Err(VpfpError::InvalidParameter {
                name: "xi_mag",
                value: xi_mag,
                reason: "mode magnitude must be finite and non-negative",
            });
        }
        if matches!(kind, ModeKind::B | ModeKind::B1) && xi_mag == 0.0 {
            return Err(VpfpError::SingularMode {
                kind: if kind == ModeKind::B { "B" } else { "B1" },
                xi_mag,
            });
        }
        let s = xi_mag;
        let filter = kind.support();
        let mut blocks = Vec::new();
        for chain in basis.e1_chains() {
            // Poisson coupling -(i/s) v_1 P_0 maps sqrt(M) -> v_1 sqrt(M).
            let m = chain_operator(kind, s, chain.len(), chain.transverse_degree());
            let keep: Vec<usize> = (0..chain.len())
                .filter(|&a1| filter.map_or(true, |f| f.contains(chain.members[a1])))
                .collect();
            if keep.is_empty() {
                continue;
            }
            let indices: Vec<usize> = keep.iter().map(|&a| chain.members[a]).collect();
            let matrix = if keep.len() == chain.len() { m } else { select(&m, &keep) };
            blocks.push(OpBlock { indices, matrix });
        }
        let mut support: Vec<usize> = blocks.iter().flat_map(|b| b.indices.clone()).collect();
        support.sort_unstable();
        Ok(ModeOperator {
            kind,
            xi_mag,
            basis,
            support,
            blocks,
        })
    }

    /// Dense matrix on the operator's support (rows/cols ordered as `support`).
    pub fn matrix(&self) -> CMat {
        dense_on_support(&self.support, &self.blocks)
    }

    /// Dense matrix embedded in the full basis (zero outside the support).
    pub fn full_matrix(&self) -> CMat {
        dense_full(self.basis.dimension(), &self.blocks)
    }

    /// `e^{t Op}`, with the a-posteriori exponential check enabled.
    pub fn semigroup(&self, t: f64) -> Result<SemigroupEval> {
        self.semigroup_with(t, true)
    }

    /// `e^{t Op}`; `checked = false` skips the consistency estimate.
    pub fn semigroup_with(&self, t: f64, checked: bool) -> Result<SemigroupEval> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(VpfpError::InvalidParameter {
                name: "t",
                value: t,
                reason: "semigroup time must be finite and non-negative",
            });
        }
        let tc = C64::new(t, 0.0);
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let scaled = &b.matrix * tc;
                let e = if checked {
                    expm_checked(&scaled, EXPM_TOLERANCE)?
                } else {
                    expm(&scaled)
                };
                Ok(OpBlock {
                    indices: b.indices.clone(),
                    matrix: e,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SemigroupEval {
            kind: self.kind,
            xi_mag: self.xi_mag,
            t,
            support: self.support.clone(),
            blocks,
            dim: self.basis.dimension(),
        })
    }

    /// All eigenvalues, sorted by real part descending.
    pub fn spectrum(&self) -> Result<Vec<C64>> {
        let mut all = Vec::with_capacity(self.support.len());
        for b in &self.blocks {
            all.extend(eigenvalues(&b.matrix)?);
        }
        all.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal));
        Ok(all)
    }

    /// Largest real part of the spectrum.
    pub fn max_real_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectrum()?.first().map_or(f64::NEG_INFINITY, |z| z.re))
    }
}

fn dense_on_support(support: &[usize], blocks: &[OpBlock]) -> CMat {
    let n = support.len();
    let mut m = CMat::zeros(n, n);
    let pos = |g: usize| support.binary_search(&g).expect("block index in support");
    for b in blocks {
        for (i, &gi) in b.indices.iter().enumerate() {
            let pi = pos(gi);
            for (j, &gj) in b.indices.iter().enumerate() {
                m[(pi, pos(gj))] = b.matrix[(i, j)];
            }
        }
    }
    m
}

fn dense_full(dim: usize, blocks: &[OpBlock]) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for b in blocks {
        for (i, &gi) in b.indices.iter().enumerate() {
            for (j, &gj) in b.indices.iter().enumerate() {
                m[(gi, gj)] = b.matrix[(i, j)];
            }
        }
    }
    m
}

/// Full chain matrix of `kind` (no projection applied) for a chain with
/// transverse degree `p`: `B` and `A` as tridiagonal blocks, the Poisson
/// entry placed on the `(0, 0)` chain.
pub fn chain_operator(kind: ModeKind, s: f64, len: usize, p: usize) -> CMat {
    let shift = if kind == ModeKind::A { -2.0 } else { 0.0 };
    let mut m = chain_block(len, p, s, shift);
    if p == 0 && matches!(kind, ModeKind::B | ModeKind::B1) && len > 1 {
        m[(1, 0)] += C64::new(0.0, -1.0 / s);
    }
    m
}

/// Weight `sqrt(1 + |xi|^{-2})` carried by the `sqrt(M)` coefficient in `||.||_xi`.
pub fn density_weight(xi_mag: f64) -> f64 {
    (1.0 + 1.0 / (xi_mag * xi_mag)).sqrt()
}

/// A block-diagonal operator on the full basis (zero outside its blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub xi_mag: f64,
    pub dim: usize,
    pub blocks: Vec<OpBlock>,
}

impl BlockMatrix {
    pub fn full_matrix(&self) -> CMat {
        dense_full(self.dim, &self.blocks)
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        entry_of(&self.blocks, i, j)
    }

    /// Induced `L^2 -> L^2` norm.
    pub fn norm_l2(&self) -> f64 {
        self.blocks.iter().map(|b| op_norm2(&b.matrix)).fold(0.0, f64::max)
    }

    /// Induced `L^2 -> ||.||_xi` norm (`sup_{||f|| = 1} ||T f||_xi`).
    pub fn norm_l2_to_xi(&self) -> f64 {
        norm_l2_to_xi(&self.blocks, self.xi_mag)
    }

    /// Induced `||.||_xi -> ||.||_xi` norm.
    pub fn norm_xi(&self) -> f64 {
        norm_xi_xi(&self.blocks, self.xi_mag)
    }

    /// Largest entry modulus of `self - other` (block structures must agree).
    pub fn max_abs_diff(&self, other: &BlockMatrix) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (&a.matrix - &b.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// `self + c * other` (block structures must agree).
    pub fn add_scaled(&self, other: &BlockMatrix, c: C64) -> BlockMatrix {
        BlockMatrix {
            xi_mag: self.xi_mag,
            dim: self.dim,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| OpBlock { indices: a.indices.clone(), matrix: &a.matrix + &b.matrix * c })
                .collect(),
        }
    }

    pub fn scaled(&self, c: C64) -> BlockMatrix {
        BlockMatrix {
            xi_mag: self.xi_mag,
            dim: self.dim,
            blocks: self
                .blocks
                .iter()
                .map(|a| OpBlock { indices: a.indices.clone(), matrix: &a.matrix * c })
                .collect(),
        }
    }
}

fn entry_of(blocks: &[OpBlock], i: usize, j: usize) -> C64 {
    for b in blocks {
        if let (Some(p), Some(q)) = (
            b.indices.iter().position(|&g| g == i),
            b.indices.iter().position(|&g| g == j),
        ) {
            return b.matrix[(p, q)];
        }
    }
    C64::new(0.0, 0.0)
}

fn norm_l2_to_xi(blocks: &[OpBlock], xi_mag: f64) -> f64 {
    let w = density_weight(xi_mag);
    blocks
        .iter()
        .map(|b| match b.indices.iter().position(|&g| g == 0) {
            None => op_norm2(&b.matrix),
            Some(p) => {
                let mut m = b.matrix.clone();
                for j in 0..m.ncols() {
                    m[(p, j)] *= w;
                }
                op_norm2(&m)
            }
        })
        .fold(0.0, f64::max)
}

fn norm_xi_xi(blocks: &[OpBlock], xi_mag: f64) -> f64 {
    let w = density_weight(xi_mag);
    blocks
        .iter()
        .map(|b| match b.indices.iter().position(|&g| g == 0) {
            None => op_norm2(&b.matrix),
            Some(p) => {
                let mut m = b.matrix.clone();
                for j in 0..m.ncols() {
                    m[(p, j)] *= w;
                }
                for i in 0..m.nrows() {
                    m[(i, p)] /= w;
                }
                op_norm2(&m)
            }
        })
        .fold(0.0, f64::max)
}

impl SemigroupEval {
    /// The exponential as a [`BlockMatrix`].
    pub fn to_block_matrix(&self) -> BlockMatrix {
        BlockMatrix { xi_mag: self.xi_mag, dim: self.dim, blocks: self.blocks.clone() }
    }

    /// Induced `L^2 -> ||.||_xi` norm.
    pub fn norm_l2_to_xi(&self) -> f64 {
        norm_l2_to_xi(&self.blocks, self.xi_mag)
    }

    /// Dense matrix on the support.
    pub fn matrix(&self) -> CMat {
        dense_on_support(&self.support, &self.blocks)
    }

    /// Dense matrix embedded in the full basis.
    pub fn full_matrix(&self) -> CMat {
        dense_full(self.dim, &self.blocks)
    }

    /// Apply to a full-length coefficient vector (components outside the
    /// support are mapped to zero).
    pub fn apply(&self, f: &CVec) -> Result<CVec> {
        if f.len() != self.dim {
            return Err(VpfpError::ShapeMismatch {
                expected: self.dim,
                got: f.len(),
            });
        }
        let mut out = CVec::zeros(self.dim);
        for b in &self.blocks {
            for (i, &gi) in b.indices.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (j, &gj) in b.indices.iter().enumerate() {
                    acc += b.matrix[(i, j)] * f[gj];
                }
                out[gi] = acc;
            }
        }
        Ok(out)
    }

    /// Entry `(i, j)` in global basis indices.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        entry_of(&self.blocks, i, j)
    }

    /// Induced operator norm in plain `L^2_v`.
    pub fn norm_l2(&self) -> f64 {
        self.blocks.iter().map(|b| op_norm2(&b.matrix)).fold(0.0, f64::max)
    }

    /// Induced operator norm in `||.||_xi` (requires `|xi| > 0`).
    ///
    /// The weighted norm becomes Euclidean after scaling the `sqrt(M)`
    /// coefficient by `sqrt(1 + |xi|^{-2})`, so the induced norm is the
    /// spectral norm of the similarity-transformed block.
    pub fn norm_xi(&self) -> f64 {
        norm_xi_xi(&self.blocks, self.xi_mag)
    }
}

/// `||f||_xi` for a full-length coefficient vector (re-exported helper).
pub fn mode_norm(f: &CVec, xi_mag: f64) -> f64 {
    xi_norm(f, xi_mag)
}

/// Spectral-gap summary over a `|xi|` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub max_degree: usize,
    pub xi: Vec<f64>,
    pub max_re: Vec<f64>,
    /// Low-frequency search range for the threshold radius.
    pub low_range: (f64, f64),
    /// Largest grid point in `low_range` below which every max Re λ ≤ `threshold`.
    pub r0_hat: f64,
    pub threshold: f64,
    /// `-max Re λ` over grid points with `|xi| > r0_hat`.
    pub beta0_hat: f64,
    /// `min(beta0_hat, 1/2)`.
    pub beta1_hat: f64,
    /// `beta1_hat / 2`.
    pub eta0_hat: f64,
}

/// Sweep `max Re σ(B(xi))` over `xi_grid` (in parallel) and derive the
/// empirical constants.
///
/// `r0_hat` is the largest grid node in `low_range` such that every node up
/// to it satisfies `max Re λ <= threshold`; `beta0_hat` is the gap over the
/// remaining nodes.
pub fn spectral_gap_sweep(
    basis: Arc<BasisSpec>,
    xi_grid: &[f64],
    low_range: (f64, f64),
    threshold: f64,
) -> Result<GapReport> {
    use rayon::prelude::*;
    let max_re = xi_grid
        .par_iter()
        .map(|&s| ModeOperator::assemble(ModeKind::B, s, basis.clone())?.max_real_eigenvalue())
        .collect::<Result<Vec<f64>>>()?;
    let mut r0 = f64::NAN;
    for (&s, &m) in xi_grid.iter().zip(&max_re) {
        if s > low_range.1 {
            break;
        }
        if m > threshold {
            break;
        }
        if s >= low_range.0 {
            r0 = s;
        }
    }
    let beyond = xi_grid
        .iter()
        .zip(&max_re)
        .filter(|(s, _)| r0.is_nan() || **s > r0)
        .map(|(_, m)| *m)
        .fold(f64::NEG_INFINITY, f64::max);
    let beta0 = -beyond;
    let beta1 = beta0.min(0.5);
    Ok(GapReport {
        max_degree: basis.max_degree(),
        xi: xi_grid.to_vec(),
        max_re,
        low_range,
        r0_hat: r0,
        threshold,
        beta0_hat: beta0,
        beta1_hat: beta1,
        eta0_hat: beta1 / 2.0,
    })
}
