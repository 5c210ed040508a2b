//! Assembly of the Green's function over a radial mode grid and
//! reconstruction of rotation-equivariant observables in physical space.
//!
//! For `ξ = ρ ω` the mode matrix is `Ĝ(ξ) = R_ω Ĝ(ρ e_1) R_ω^{-1}`; a lab-frame
//! matrix element is therefore a sum of spherical harmonics in `ω` with
//! radial coefficients built from `ξ ∥ e_1` elements.  Evaluated along
//! `x = r e_1` the inverse transform of each harmonic of order `ℓ` is the
//! spherical Bessel transform `i^ℓ H_ℓ` of [`crate::radial`].  The
//! observables and their decompositions (frame elements `g_{out,in}`,
//! `h_2 = (v_1² - 1) sqrt(M)/√2` etc.):
//!
//! | observable   | lab element          | reconstruction at `x = r e_1` |
//! |--------------|----------------------|-------------------------------|
//! | `P0`         | `ρ ← ρ`              | `H_0[g_00]` |
//! | `Pm`         | `v_1 ← ρ`            | `i H_1[g_10]` |
//! | `P3`         | `h_2 ← ρ`            | `H_0[g_20]/3 - 2/3 H_2[g_20]` |
//! | `P0·P1`      | `ρ ← v_1`            | `i H_1[g_01]` |
//! | `Pm·P1`      | `v_1 ← v_1`          | `H_0[b + (a-b)/3] - 2/3 H_2[a-b]` |
//! | `P3·P1`      | `h_2 ← v_1`          | `(i/√2)(H_1[3A/5 + 2C] - 2/5 H_3[A])` |
//!
//! with `a = g_11`, `b = g_{(010),(010)}`, `C = g_{(110),(010)}` and
//! `A = √2 g_21 - 2C` (isotropic tensor decomposition; `(α_2, α_3)` chains
//! are invariant so frame elements across chains vanish).  Mode elements
//! come from padded single-chain exponentials, so the truncation does not
//! limit the frequencies reached by the mode grid.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::coherent::exp_tail;
use crate::cutoff::{cutoff_chi, CutoffSide};
use crate::error::{Result, VpfpError};
use crate::fit::{fit_decay, fit_rate, tail_envelope, Component, DecayFit};
use crate::linalg::{block_bidiagonal_expm, expm};
use crate::mode_ops::{chain_operator, ModeKind};
use crate::radial::{radial_prefactor, radial_transform, ModeGrid};
use crate::{CMat, C64};

/// Scalar observables of the Green's function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Density response to density data.
    Density,
    /// Longitudinal momentum response to density data.
    Momentum,
    /// Microscopic `(v_1² - 1)` response to density data.
    Stress,
    /// Density response to momentum (`P_1`) data.
    DensityP1,
    /// Momentum response to momentum data.
    MomentumP1,
    /// Microscopic response to momentum data.
    StressP1,
}

impl Observable {
    pub const ALL: [Observable; 6] = [
        Observable::Density,
        Observable::Momentum,
        Observable::Stress,
        Observable::DensityP1,
        Observable::MomentumP1,
        Observable::StressP1,
    ];

    /// Output projection reported in fits.
    pub fn component(self) -> Component {
        match self {
            Observable::Density | Observable::DensityP1 => Component::P0,
            Observable::Momentum | Observable::MomentumP1 => Component::Pm,
            Observable::Stress | Observable::StressP1 => Component::P3,
        }
    }

    /// The same output with density data (for `P_1` variants) or itself.
    pub fn charged_counterpart(self) -> Observable {
        match self {
            Observable::DensityP1 => Observable::Density,
            Observable::MomentumP1 => Observable::Momentum,
            Observable::StressP1 => Observable::Stress,
            o => o,
        }
    }

    /// The same output with `P_1` data (identity on `P_1` variants).
    pub fn p1_counterpart(self) -> Observable {
        match self {
            Observable::Density => Observable::DensityP1,
            Observable::Momentum => Observable::MomentumP1,
            Observable::Stress => Observable::StressP1,
            o => o,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::Density => "P0",
            Observable::Momentum => "Pm",
            Observable::Stress => "P3",
            Observable::DensityP1 => "P0P1",
            Observable::MomentumP1 => "PmP1",
            Observable::StressP1 => "P3P1",
        }
    }
}

/// Which part of the Green's function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenPart {
    /// `Ĝ_L = e^{tB} χ_1`.
    Low,
    /// `Ĝ_H = e^{tB} χ_2`.
    High,
    /// `Ĝ = Ĝ_L + Ĝ_H`.
    Full,
    /// `Ĝ_H - Ŵ_k` (remainder after `k + 1` singular waves).
    HighRemainder(usize),
}

/// Numerical parameters of the assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub r_hat: f64,
    pub rho_max: f64,
    pub panel_width: f64,
    pub nodes_per_panel: usize,
    /// Length of the padded single-chain exponentials.
    pub chain_len: usize,
    /// Optional Gaussian mollifier width in `x` applied to the data.
    pub mollifier: Option<f64>,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            r_hat: 1.0,
            rho_max: 12.0,
            panel_width: 0.3,
            nodes_per_panel: 8,
            chain_len: 64,
            mollifier: None,
        }
    }
}

impl AssemblyConfig {
    pub fn mode_grid(&self) -> Result<ModeGrid> {
        ModeGrid::new(self.rho_max, self.panel_width, self.nodes_per_panel, self.r_hat)
    }
}

/// `ξ ∥ e_1` matrix elements needed by every observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeElements {
    pub g00: C64,
    pub g10: C64,
    pub g20: C64,
    pub g01: C64,
    pub g11: C64,
    pub g21: C64,
    /// `(0,1,0) ← (0,1,0)`.
    pub g_tt: C64,
    /// `(1,1,0) ← (0,1,0)`.
    pub g_lt: C64,
}

/// Chain propagator of the requested part (before the cut-off factor).
fn chain_part(part: GreenPart, s: f64, len: usize, p: usize, t: f64) -> CMat {
    let b = chain_operator(ModeKind::B, s, len, p);
    match part {
        GreenPart::Low | GreenPart::High | GreenPart::Full => expm(&(b * C64::new(t, 0.0))),
        GreenPart::HighRemainder(k) => {
            let a = chain_operator(ModeKind::A, s, len, p);
            if p == 0 {
                let mut diag = vec![a.clone(); k + 1];
                diag.push(b.clone());
                let sub = vec![&b - &a; k + 1];
                let e = block_bidiagonal_expm(&diag, &sub, t, 1);
                e[k + 1][0].clone()
            } else {
                expm(&(a * C64::new(t, 0.0))) * C64::new(exp_tail(2.0 * t, k as i64), 0.0)
            }
        }
    }
}

fn part_cutoff(part: GreenPart, s: f64, r_hat: f64) -> Result<f64> {
    Ok(match part {
        GreenPart::Low => cutoff_chi(s, r_hat, CutoffSide::Low)?,
        GreenPart::High | GreenPart::HighRemainder(_) => cutoff_chi(s, r_hat, CutoffSide::High)?,
        GreenPart::Full => 1.0,
    })
}

/// Mode elements of `part` at `|ξ| = s`, time `t`.
pub fn mode_elements(part: GreenPart, s: f64, t: f64, cfg: &AssemblyConfig) -> Result<ModeElements> {
    if !(s > 0.0) {
        return Err(VpfpError::SingularMode { kind: "B", xi_mag: s });
    }
    let chi = part_cutoff(part, s, cfg.r_hat)?;
    let mol = cfg.mollifier.map_or(1.0, |sig| (-0.5 * sig * sig * s * s).exp());
    let c = C64::new(chi * mol, 0.0);
    if chi == 0.0 {
        let z = C64::new(0.0, 0.0);
        return Ok(ModeElements { g00: z, g10: z, g20: z, g01: z, g11: z, g21: z, g_tt: z, g_lt: z });
    }
    let e0 = chain_part(part, s, cfg.chain_len, 0, t);
    let e1 = chain_part(part, s, cfg.chain_len, 1, t);
    Ok(ModeElements {
        g00: e0[(0, 0)] * c,
        g10: e0[(1, 0)] * c,
        g20: e0[(2, 0)] * c,
        g01: e0[(0, 1)] * c,
        g11: e0[(1, 1)] * c,
        g21: e0[(2, 1)] * c,
        g_tt: e1[(0, 0)] * c,
        g_lt: e1[(1, 0)] * c,
    })
}

/// A reconstructed radial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub observable: Observable,
    pub part: GreenPart,
    pub t: f64,
    pub x: Vec<f64>,
    pub values: Vec<C64>,
    pub aliasing: bool,
}

impl Profile {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }
}

/// Mode elements on every node of the grid (parallel over nodes).
pub fn assemble_modes(part: GreenPart, t: f64, grid: &ModeGrid, cfg: &AssemblyConfig) -> Result<Vec<ModeElements>> {
    grid.nodes.par_iter().map(|&s| mode_elements(part, s, t, cfg)).collect()
}

/// Reconstruct `observable` along `x = r e_1` from precomputed mode elements.
pub fn reconstruct(
    observable: Observable,
    part: GreenPart,
    t: f64,
    grid: &ModeGrid,
    modes: &[ModeElements],
    x: &[f64],
) -> Result<Profile> {
    let i = C64::new(0.0, 1.0);
    let col = |f: &dyn Fn(&ModeElements) -> C64| modes.iter().map(f).collect::<Vec<C64>>();
    let tr = |h: &[C64], l: usize| radial_transform(grid, h, l, x);
    let mut aliasing = false;
    let mut combine = |terms: Vec<(C64, Vec<crate::radial::RadialValue>)>| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (c, vals) in terms {
            for (o, v) in out.iter_mut().zip(&vals) {
                aliasing |= v.aliasing;
                *o += c * v.value;
            }
        }
        out
    };
    let third = C64::new(1.0 / 3.0, 0.0);
    let values = match observable {
        Observable::Density => combine(vec![(C64::new(1.0, 0.0), tr(&col(&|m| m.g00), 0)?)]),
        Observable::Momentum => combine(vec![(i, tr(&col(&|m| m.g10), 1)?)]),
        Observable::Stress => {
            let h = col(&|m| m.g20);
            combine(vec![(third, tr(&h, 0)?), (C64::new(-2.0 / 3.0, 0.0), tr(&h, 2)?)])
        }
        Observable::DensityP1 => combine(vec![(i, tr(&col(&|m| m.g01), 1)?)]),
        Observable::MomentumP1 => {
            let iso = col(&|m| m.g_tt + (m.g11 - m.g_tt) / 3.0);
            let aniso = col(&|m| m.g11 - m.g_tt);
            combine(vec![(C64::new(1.0, 0.0), tr(&iso, 0)?), (C64::new(-2.0 / 3.0, 0.0), tr(&aniso, 2)?)])
        }
        Observable::StressP1 => {
            let r2 = std::f64::consts::SQRT_2;
            let a = col(&|m| m.g21 * r2 - m.g_lt * 2.0);
            let l1 = col(&|m| (m.g21 * r2 - m.g_lt * 2.0) * 0.6 + m.g_lt * 2.0);
            combine(vec![(i / r2, tr(&l1, 1)?), (-i * 0.4 / r2, tr(&a, 3)?)])
        }
    };
    Ok(Profile { observable, part, t, x: x.to_vec(), values, aliasing })
}

/// `assemble_green`: mode assembly plus reconstruction of one observable.
pub fn assemble_green(
    t: f64,
    observable: Observable,
    part: GreenPart,
    x: &[f64],
    cfg: &AssemblyConfig,
) -> Result<Profile> {
    let grid = cfg.mode_grid()?;
    let modes = assemble_modes(part, t, &grid, cfg)?;
    reconstruct(observable, part, t, &grid, &modes, x)
}

/// Fit the spatial exponent of a profile's tail envelope on `window`.
pub fn fit_profile(profile: &Profile, window: (f64, f64), floor: f64) -> Result<DecayFit> {
    let env = tail_envelope(&profile.magnitudes());
    fit_decay(profile.observable.component(), profile.t, &profile.x, &env, window, floor)
}

/// Exponents of every observable at time `t` (one mode assembly).
pub fn exponent_report(
    t: f64,
    part: GreenPart,
    x: &[f64],
    window: (f64, f64),
    cfg: &AssemblyConfig,
) -> Result<Vec<(Observable, DecayFit)>> {
    let grid = cfg.mode_grid()?;
    let modes = assemble_modes(part, t, &grid, cfg)?;
    Observable::ALL
        .iter()
        .map(|&o| {
            let p = reconstruct(o, part, t, &grid, &modes, x)?;
            let peak = p.magnitudes().iter().fold(0.0, |a: f64, b| a.max(*b));
            Ok((o, fit_profile(&p, window, 1e-13 * peak)?))
        })
        .collect()
}

/// Fitted exponential rate of `sup_x |observable|` over a time sweep.
pub fn profile_rate(
    observable: Observable,
    part: GreenPart,
    t_grid: &[f64],
    x: &[f64],
    cfg: &AssemblyConfig,
) -> Result<(Vec<f64>, DecayFit)> {
    let sups = t_grid
        .iter()
        .map(|&t| {
            let p = assemble_green(t, observable, part, x, cfg)?;
            Ok(p.magnitudes().into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let window = (t_grid[0], *t_grid.last().unwrap());
    let line = fit_rate(t_grid, &sups, window)?;
    Ok((
        sups,
        DecayFit {
            component: observable.component(),
            t: f64::NAN,
            exponent_x: f64::NAN,
            rate_t: line.slope,
            window,
            residual: line.residual,
            points: line.points,
        },
    ))
}

/// `sup_x ||(G_H - W_k)(t, x)||` bound `(2π)^{-3/2} ∫ ||R̂_k(t, ξ)|| dξ` on the
/// full basis, with `||.||` the `L^2 -> L^2` operator norm.
pub fn remainder_sup_bound(basis: Arc<BasisSpec>, k: usize, t: f64, cfg: &AssemblyConfig) -> Result<f64> {
    let grid = ModeGrid::new(cfg.rho_max, cfg.panel_width.max(0.5), cfg.nodes_per_panel, cfg.r_hat)?;
    let vals = grid
        .nodes
        .par_iter()
        .map(|&s| {
            if s <= cfg.r_hat {
                return Ok(0.0);
            }
            let sol = crate::highfreq::solve_high(basis.clone(), k, s, &[t], cfg.r_hat)?;
            Ok(sol.remainder.r_k[0].norm_l2())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(radial_prefactor() * grid.nodes.iter().zip(&grid.weights).zip(&vals).map(|((r, w), v)| w * r * r * v).sum::<f64>())
}

/// `max |Ĝ_L + Ĝ_H - Ĝ|` per mode, with `Ĝ_L` and `Ĝ_H` from the hierarchy
/// sums `Û_k + V̂_k` and `Ŵ_k + R̂_k`, relative to `max |Ĝ|`.
pub fn split_consistency(basis: Arc<BasisSpec>, k: usize, s: f64, t: f64, r_hat: f64) -> Result<f64> {
    let one = C64::new(1.0, 0.0);
    let high = crate::highfreq::solve_high(basis.clone(), k, s, &[t], r_hat)?;
    let mut total = high.partial_sum(k, 0).add_scaled(&high.remainder.r_k[0], one);
    if s <= 2.0 * r_hat {
        let low = crate::lowfreq::solve_low(basis.clone(), k, s, &[t], r_hat)?;
        total = total
            .add_scaled(&low.partial_sum(k, 0), one)
            .add_scaled(&low.remainder.v_k[0], one);
    }
    let direct = crate::mode_ops::ModeOperator::assemble(ModeKind::B, s, basis)?.semigroup(t)?.to_block_matrix();
    let scale = direct.blocks.iter().flat_map(|b| b.matrix.iter().map(|z| z.norm())).fold(0.0, f64::max);
    Ok(total.max_abs_diff(&direct) / scale)
}
