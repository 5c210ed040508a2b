//! High-frequency hierarchy: damped iterates `Î_j`, singular waves and
//! remainders `R̂_k` in the Hermite basis.
//!
//! With `B = A + (B - A)` and `B - A = 2 + P`, `P = -(i/|ξ|) v_1 P_0`,
//!
//! ```text
//! Î_0' = A Î_0,                   Î_0(0) = χ_2
//! Î_j' = A Î_j + (B - A) Î_{j-1}, Î_j(0) = 0
//! R̂_k' = B R̂_k + (B - A) Î_k,     R̂_k(0) = 0
//! ```
//!
//! so `Ŵ_k + R̂_k = e^{tB} χ_2`.  As in the low-frequency module every level
//! comes out of one stacked exponential.  Only the `(0, 0)` chain carries the
//! Poisson term; on all other chains `B - A = 2` commutes with `A` and the
//! levels are the closed forms `Î_j = (2t)^j/j! e^{tA} χ_2`.
//!
//! The singular waves `J_k` are built by a second, independent route: the
//! Dyson expansion of `e^{t(A+2+P)}` in powers of `P` (`T_m`, stacked with
//! diagonal `A + 2` and coupling `P`) recombined with the binomial weights
//! `J_k = e^{-2t} Σ_m (2t)^{k-m}/(k-m)! T_m`.

use std::sync::Arc;

use crate::basis::BasisSpec;
use crate::cutoff::{cutoff_chi, CutoffSide};
use crate::error::{Result, VpfpError};
use crate::linalg::{block_bidiagonal_expm, expm};
use crate::mode_ops::{chain_operator, BlockMatrix, ModeKind, OpBlock};
use crate::{CMat, C64};

/// `Î_j` and its density functional `Ê_j = -(Î_j, sqrt(M)) / |ξ|²`.
#[derive(Debug, Clone)]
pub struct HighFreqIterate {
    pub j: usize,
    pub xi_mag: f64,
    pub t_grid: Vec<f64>,
    pub i_j: Vec<BlockMatrix>,
    /// `Ê_j` as a row over the input basis.
    pub e_j: Vec<Vec<C64>>,
}

/// `R̂_k = Ĝ_H - Ŵ_k` with its density functional `φ̂_k`.
#[derive(Debug, Clone)]
pub struct HighFreqRemainder {
    pub k: usize,
    pub xi_mag: f64,
    pub t_grid: Vec<f64>,
    pub r_k: Vec<BlockMatrix>,
    /// `φ̂_k = -(R̂_k, sqrt(M)) / |ξ|²` as a row over the input basis.
    pub phi_k: Vec<Vec<C64>>,
}

/// Everything computed at one high frequency.
#[derive(Debug, Clone)]
pub struct HighFreqSolution {
    pub xi_mag: f64,
    pub chi: f64,
    pub iterates: Vec<HighFreqIterate>,
    pub remainder: HighFreqRemainder,
    /// Directly exponentiated `Ĝ_H = e^{tB} χ_2`.
    pub green: Vec<BlockMatrix>,
}

impl HighFreqSolution {
    /// `Ŵ_k = Σ_{j≤k} Î_j` at time index `ti`.
    pub fn partial_sum(&self, k: usize, ti: usize) -> BlockMatrix {
        let one = C64::new(1.0, 0.0);
        self.iterates
            .iter()
            .take(k + 1)
            .skip(1)
            .fold(self.iterates[0].i_j[ti].clone(), |acc, it| acc.add_scaled(&it.i_j[ti], one))
    }

    /// `max |Ŵ_k + R̂_k - Ĝ_H|` relative to `max |Ĝ_H|`.
    pub fn sum_identity_defect(&self) -> f64 {
        let k = self.remainder.k;
        (0..self.green.len())
            .map(|ti| {
                let w = self.partial_sum(k, ti).add_scaled(&self.remainder.r_k[ti], C64::new(1.0, 0.0));
                let scale = max_entry(&self.green[ti]).max(1e-300);
                w.max_abs_diff(&self.green[ti]) / scale
            })
            .fold(0.0, f64::max)
    }
}

fn max_entry(m: &BlockMatrix) -> f64 {
    m.blocks.iter().flat_map(|b| b.matrix.iter().map(|z| z.norm())).fold(0.0, f64::max)
}

fn check_inputs(xi_mag: f64, t_grid: &[f64]) -> Result<()> {
    if !(xi_mag > 0.0) || !xi_mag.is_finite() {
        return Err(VpfpError::InvalidParameter {
            name: "xi_mag",
            value: xi_mag,
            reason: "high-frequency hierarchy needs |xi| > 0",
        });
    }
    if let Some(&t) = t_grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(VpfpError::InvalidParameter {
            name: "t",
            value: t,
            reason: "times must be finite and non-negative",
        });
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn density_row(m: &BlockMatrix, dim: usize, s: f64) -> Vec<C64> {
    (0..dim).map(|j| -m.entry(0, j) / (s * s)).collect()
}

/// Solve the high-frequency hierarchy up to `j_max` with remainder `R̂_{j_max}`.
pub fn solve_high(
    basis: Arc<BasisSpec>,
    j_max: usize,
    xi_mag: f64,
    t_grid: &[f64],
    r_hat: f64,
) -> Result<HighFreqSolution> {
    check_inputs(xi_mag, t_grid)?;
    let s = xi_mag;
    let chi = cutoff_chi(s, r_hat, CutoffSide::High)?;
    let chi_c = C64::new(chi, 0.0);
    let dim = basis.dimension();
    let nt = t_grid.len();
    let empty = |_: usize| BlockMatrix { xi_mag: s, dim, blocks: Vec::new() };
    let mut i_j: Vec<Vec<BlockMatrix>> = (0..=j_max).map(|_| (0..nt).map(empty).collect()).collect();
    let mut r_k: Vec<BlockMatrix> = (0..nt).map(empty).collect();
    let mut green = r_k.clone();
    for chain in basis.e1_chains() {
        let len = chain.len();
        let p = chain.transverse_degree();
        let a = chain_operator(ModeKind::A, s, len, p);
        let b = chain_operator(ModeKind::B, s, len, p);
        let push = |target: &mut BlockMatrix, mat: CMat| {
            target.blocks.push(OpBlock { indices: chain.members.clone(), matrix: mat });
        };
        for (ti, &t) in t_grid.iter().enumerate() {
            let g = expm(&(&b * C64::new(t, 0.0))) * chi_c;
            if p == 0 {
                let coupling = &b - &a;
                let mut diag = vec![a.clone(); j_max + 1];
                diag.push(b.clone());
                let sub = vec![coupling; j_max + 1];
                let e = block_bidiagonal_expm(&diag, &sub, t, 1);
                for (j, level) in e.iter().take(j_max + 1).enumerate() {
                    push(&mut i_j[j][ti], &level[0] * chi_c);
                }
                push(&mut r_k[ti], &e[j_max + 1][0] * chi_c);
            } else {
                let ea = expm(&(&a * C64::new(t, 0.0))) * chi_c;
                for j in 0..=j_max {
                    let c = (2.0 * t).powi(j as i32) / factorial(j);
                    push(&mut i_j[j][ti], &ea * C64::new(c, 0.0));
                }
                // e^{tB} = e^{2t} e^{tA} on these chains.
                let tail = crate::coherent::exp_tail(2.0 * t, j_max as i64);
                push(&mut r_k[ti], &ea * C64::new(tail, 0.0));
            }
            push(&mut green[ti], g);
        }
    }
    let iterates = i_j
        .into_iter()
        .enumerate()
        .map(|(j, series)| HighFreqIterate {
            j,
            xi_mag: s,
            t_grid: t_grid.to_vec(),
            e_j: series.iter().map(|m| density_row(m, dim, s)).collect(),
            i_j: series,
        })
        .collect();
    let phi_k = r_k.iter().map(|m| density_row(m, dim, s)).collect();
    Ok(HighFreqSolution {
        xi_mag: s,
        chi,
        iterates,
        remainder: HighFreqRemainder { k: j_max, xi_mag: s, t_grid: t_grid.to_vec(), r_k, phi_k },
        green,
    })
}

/// The iterates `Î_j` for `j ≤ j_max`.
pub fn iterate_high(
    basis: Arc<BasisSpec>,
    j_max: usize,
    xi_mag: f64,
    t_grid: &[f64],
    r_hat: f64,
) -> Result<Vec<HighFreqIterate>> {
    Ok(solve_high(basis, j_max, xi_mag, t_grid, r_hat)?.iterates)
}

/// The remainder `R̂_k`.
pub fn remainder_high(
    basis: Arc<BasisSpec>,
    k: usize,
    xi_mag: f64,
    t_grid: &[f64],
    r_hat: f64,
) -> Result<HighFreqRemainder> {
    Ok(solve_high(basis, k, xi_mag, t_grid, r_hat)?.remainder)
}

/// Number of singular waves summed for derivative order `alpha_order`:
/// `8 + ⌊3α/2⌋` (indices `0..=7 + ⌊3α/2⌋`).
pub fn singular_wave_terms(alpha_order: usize) -> usize {
    8 + 3 * alpha_order / 2
}

/// Individual singular waves `J_k`, `k < count`, by the Dyson route.
pub fn singular_waves(basis: Arc<BasisSpec>, count: usize, xi_mag: f64, t: f64, r_hat: f64) -> Result<Vec<BlockMatrix>> {
    check_inputs(xi_mag, &[t])?;
    let s = xi_mag;
    let chi = C64::new(cutoff_chi(s, r_hat, CutoffSide::High)?, 0.0);
    let dim = basis.dimension();
    let mut waves: Vec<BlockMatrix> = (0..count).map(|_| BlockMatrix { xi_mag: s, dim, blocks: Vec::new() }).collect();
    let damp = (-2.0 * t).exp();
    let weight = |k: usize, m: usize| (2.0 * t).powi((k - m) as i32) / factorial(k - m) * damp;
    for chain in basis.e1_chains() {
        let len = chain.len();
        let p = chain.transverse_degree();
        // A + 2 = L - i s v_1 on every chain.
        let a0 = chain_operator(ModeKind::A, s, len, p) + CMat::identity(len, len) * C64::new(2.0, 0.0);
        let t_m: Vec<CMat> = if p == 0 {
            let mut poisson = CMat::zeros(len, len);
            if len > 1 {
                poisson[(1, 0)] = C64::new(0.0, -1.0 / s);
            }
            let e = block_bidiagonal_expm(&vec![a0; count], &vec![poisson; count.saturating_sub(1)], t, 1);
            e.into_iter().map(|mut col| col.swap_remove(0)).collect()
        } else {
            let mut v = vec![CMat::zeros(len, len); count];
            v[0] = expm(&(a0 * C64::new(t, 0.0)));
            v
        };
        for (k, wave) in waves.iter_mut().enumerate() {
            let mut acc = CMat::zeros(len, len);
            for (m, tm) in t_m.iter().enumerate().take(k + 1) {
                acc += tm * C64::new(weight(k, m), 0.0);
            }
            wave.blocks.push(OpBlock { indices: chain.members.clone(), matrix: acc * chi });
        }
    }
    Ok(waves)
}

/// `Ŵ_α = χ_2 Σ_{k=0}^{7+⌊3α/2⌋} J_k` at each time of `t_grid`.
pub fn singular_wave_w_alpha(
    basis: Arc<BasisSpec>,
    alpha_order: usize,
    xi_mag: f64,
    t_grid: &[f64],
    r_hat: f64,
) -> Result<Vec<BlockMatrix>> {
    let count = singular_wave_terms(alpha_order);
    t_grid
        .iter()
        .map(|&t| {
            let waves = singular_waves(basis.clone(), count, xi_mag, t, r_hat)?;
            let one = C64::new(1.0, 0.0);
            Ok(waves.iter().skip(1).fold(waves[0].clone(), |acc, w| acc.add_scaled(w, one)))
        })
        .collect()
}
