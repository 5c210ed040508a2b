//! Nonlinear VPFP solver for jointly rotation-invariant data.
//!
//! Data of the form `f_0(x, v) = δ_0 (1+|x|²)^{-n} g(|v|)` is invariant under
//! simultaneous rotations of `x` and `v`, and so is the solution.  Such a
//! state is carried exactly by the `m = 0` spherical-Hermite channels
//! `ψ_{nℓ}(v) ∝ |v|^ℓ L_n^{(ℓ+1/2)}(|v|²/2) P_ℓ(v̂·ê) sqrt(M)`, `2n+ℓ ≤ N`,
//! with `ê = x̂` in physical space and `ê = ξ̂` in Fourier space:
//!
//! * `f(x, v) = Σ c_{nℓ}(|x|) ψ_{nℓ}(v; x̂)` and
//!   `f̂(ξ, v) = Σ ĉ_{nℓ}(|ξ|) ψ_{nℓ}(v; ξ̂)`, related by order-ℓ
//!   spherical Bessel transforms with phase `(∓i)^ℓ`;
//! * at `ξ = ρ e_1` the linear generator is the Hermite `B(ρ)` restricted to
//!   the channels, propagated exactly per mode;
//! * at `x = r e_1` the field is radial, `∇Φ = Φ'(r) e_1`, and the
//!   nonlinearity `H(f) = ½ (v·∇Φ) f - ∇Φ·∇_v f = Φ'(r) a_1^† f` is the
//!   Hermite raising operator in `v_1`, local in `r`.
//!
//! The whole-space problem is therefore solved without a periodic box.
//! Time stepping is Lawson (integrating-factor) SSP-RK3 with the exact mode
//! exponentials; the Picard iteration uses the trapezoidal Duhamel rule on
//! the same exponentials.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{dense_from_entries, grad_v_entries, grad_v_norm, mul_v_entries, BasisSpec};
use crate::error::{Result, VpfpError};
use crate::fit::{fit_decay, fit_power, fit_rate, tail_envelope, Component, DecayFit};
use crate::linalg::{expm, op_norm2};
use crate::quadrature::{composite_gauss_legendre, gauss_hermite_prob};
use crate::radial::{HankelMatrices, ModeGrid};
use crate::{CMat, CVec, C64};

/// Decay rate `η̂_0` used for time weights and the rate criterion.
pub const ETA_HAT: f64 = 0.25;

/// Unnormalized spherical-Hermite polynomial `|v|^ℓ L_n^{(ℓ+1/2)}(|v|²/2) P_ℓ(v_1/|v|)`.
pub fn spherical_poly(n: usize, l: usize, v: [f64; 3]) -> f64 {
    let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    // Solid harmonic |v|^ℓ P_ℓ(v_1/|v|).
    let (mut s_prev, mut s) = (1.0, v[0]);
    if l == 0 {
        s = 1.0;
    }
    for k in 1..l.max(1) {
        let next = ((2 * k + 1) as f64 * v[0] * s - k as f64 * r2 * s_prev) / (k + 1) as f64;
        s_prev = s;
        s = next;
    }
    s * laguerre(n, l as f64 + 0.5, 0.5 * r2)
}

/// Generalized Laguerre polynomial `L_n^{(a)}(x)`.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, 1.0 + a - x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0 + a - x) * p1 - (k + a) * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// The `m = 0` spherical-Hermite channels embedded in the Cartesian basis.
#[derive(Debug, Clone)]
pub struct SphericalBasis {
    pub cartesian: Arc<BasisSpec>,
    /// `(n, ℓ)` ordered by degree `2n+ℓ`, then `ℓ`; channel 0 is `sqrt(M)`,
    /// channel 1 is the normalized `v_1 sqrt(M)`.
    pub channels: Vec<(usize, usize)>,
    /// Cartesian coefficients of each normalized channel (columns).
    pub embed: CMat,
    /// `||p_{nℓ} sqrt(M)||` of the unnormalized polynomials.
    pub norms: Vec<f64>,
    /// Eigenvalues `-(2n+ℓ)` of `L`.
    pub l_diag: Vec<f64>,
    /// Multiplication by `v_1` restricted to the channels.
    pub v1: CMat,
    /// `½ v_1 - ∂_{v_1}` restricted to the channels.
    pub raise: CMat,
}

impl SphericalBasis {
    pub fn build(max_degree: usize) -> Result<Self> {
        let cart = Arc::new(BasisSpec::build(max_degree)?);
        let mut channels = Vec::new();
        for deg in 0..=max_degree {
            for l in (deg % 2..=deg).step_by(2) {
                channels.push(((deg - l) / 2, l));
            }
        }
        let nch = channels.len();
        let dim = cart.dimension();
        // E[h_α(Z) p(Z)], Z ~ N(0, I), exact on (N+1)^3 Gauss–Hermite nodes.
        let gh = gauss_hermite_prob(max_degree + 1);
        let h: Vec<Vec<f64>> = gh
            .nodes
            .iter()
            .map(|&z| {
                let mut out = vec![1.0, z];
                for n in 1..max_degree {
                    let next = (z * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
                    out.push(next);
                }
                out.truncate(max_degree + 1);
                out
            })
            .collect();
        let q = gh.nodes.len();
        let mut raw = DMatrix::<f64>::zeros(dim, nch);
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    let w = gh.weights[a] * gh.weights[b] * gh.weights[c];
                    let v = [gh.nodes[a], gh.nodes[b], gh.nodes[c]];
                    let p: Vec<f64> = channels.iter().map(|&(n, l)| w * spherical_poly(n, l, v)).collect();
                    for (i, al) in cart.multi_indices().iter().enumerate() {
                        let he = h[a][al[0]] * h[b][al[1]] * h[c][al[2]];
                        for (k, pk) in p.iter().enumerate() {
                            raw[(i, k)] += he * pk;
                        }
                    }
                }
            }
        }
        let norms: Vec<f64> = (0..nch).map(|k| raw.column(k).norm()).collect();
        let embed = CMat::from_fn(dim, nch, |i, k| C64::new(raw[(i, k)] / norms[k], 0.0));
        let v1c = dense_from_entries(dim, &mul_v_entries(&cart, 0));
        let d1c = dense_from_entries(dim, &grad_v_entries(&cart, 0));
        let eh = embed.adjoint();
        let v1 = &eh * &v1c * &embed;
        let raise = &eh * (&v1c * C64::new(0.5, 0.0) - &d1c) * &embed;
        let l_diag = channels.iter().map(|&(n, l)| -((2 * n + l) as f64)).collect();
        Ok(SphericalBasis { cartesian: cart, channels, embed, norms, l_diag, v1, raise })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Generator `B(ρ)` on the channels (`ρ > 0`).
    pub fn generator(&self, rho: f64) -> CMat {
        let n = self.len();
        let mut b = &self.v1 * C64::new(0.0, -rho);
        for k in 0..n {
            b[(k, k)] += C64::new(self.l_diag[k], 0.0);
            b[(k, 0)] += self.v1[(k, 0)] * C64::new(0.0, -1.0 / rho);
        }
        b
    }

    /// Channel coefficients of an isotropic velocity profile `g(|v|)`
    /// (perturbation convention `F = M + sqrt(M) f`).
    pub fn isotropic_coeffs(&self, g: impl Fn(f64) -> f64) -> CVec {
        let breaks: Vec<f64> = (0..=64).map(|k| k as f64 * 0.25).collect();
        let rule = composite_gauss_legendre(&breaks, 16);
        let sqrt_m0 = (2.0 * std::f64::consts::PI).powf(-0.75);
        CVec::from_fn(self.len(), |k, _| {
            let (n, l) = self.channels[k];
            if l != 0 {
                return C64::new(0.0, 0.0);
            }
            let val: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&v, &w)| {
                    let p = laguerre(n, 0.5, 0.5 * v * v) * (-0.25 * v * v).exp() * sqrt_m0 / self.norms[k];
                    w * 4.0 * std::f64::consts::PI * v * v * p * g(v)
                })
                .sum();
            C64::new(val, 0.0)
        })
    }

    /// `||grad_v f||` for channel coefficients `c`.
    pub fn grad_v_norm(&self, c: &CVec) -> f64 {
        grad_v_norm(&self.cartesian, &(&self.embed * c)).expect("embedding has basis dimension")
    }
}

/// Fourier transform `(2π)^{-3/2} ∫ (1+|x|²)^{-n} e^{-iξ·x} dx` for integer
/// `n ≥ 2` (closed form through half-integer Macdonald functions).
pub fn algebraic_profile_hat(n: u32, rho: f64) -> f64 {
    let k = (n - 2) as i32;
    // ρ^ν K_ν(ρ) with ν = k + 1/2, times 2^{-1/2} / (2^ν Γ(n)).
    let mut sum = 0.0;
    for j in 0..=k {
        let num: f64 = ((k - j + 1)..=(k + j)).map(|m| m as f64).product();
        let jf: f64 = (1..=j).map(|m| m as f64).product();
        sum += num / jf * 0.5_f64.powi(j) * rho.powi(k - j);
    }
    let rk = (std::f64::consts::PI / 2.0).sqrt() * (-rho).exp() * sum;
    let gamma_n: f64 = (1..n).map(|m| m as f64).product();
    rk / (2.0_f64.sqrt() * 2.0_f64.powf(k as f64 + 0.5) * gamma_n)
}

/// Run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearConfig {
    pub max_degree: usize,
    pub delta0: f64,
    /// Spatial decay power `n` of the data (integer `≥ 2`).
    pub decay_power: u32,
    /// Remove the `sqrt(M)` component of the data, `(f_0, sqrt(M)) = 0`.
    pub neutral: bool,
    /// Switch the nonlinearity off (linear regime).
    pub nonlinear: bool,
    pub rho_max: f64,
    pub rho_panel: f64,
    pub r_max: f64,
    pub r_panel: f64,
    pub nodes_per_panel: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Spatial fit window in `|x|` and the time of the fit.
    pub fit_window: (f64, f64),
    pub fit_time: f64,
    /// Early-time window of the `∇_v` channel fit.
    pub grad_window: (f64, f64),
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        NonlinearConfig {
            max_degree: 8,
            delta0: 1e-3,
            decay_power: 2,
            neutral: false,
            nonlinear: true,
            rho_max: 20.0,
            rho_panel: 0.5,
            r_max: 40.0,
            r_panel: 1.0,
            nodes_per_panel: 8,
            dt: 0.05,
            t_end: 8.0,
            fit_window: (4.0, 16.0),
            fit_time: 1.0,
            grad_window: (0.05, 0.5),
        }
    }
}

impl NonlinearConfig {
    fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: f64, reason: &'static str| Err(VpfpError::InvalidParameter { name, value, reason });
        if self.decay_power < 2 {
            return bad("decay_power", self.decay_power as f64, "data must decay at least like (1+|x|^2)^-2");
        }
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) {
            return bad("dt", self.dt, "time step must be positive and t_end non-negative");
        }
        if !(self.delta0 >= 0.0) {
            return bad("delta0", self.delta0, "amplitude must be non-negative");
        }
        if !(self.fit_window.1 < self.r_max) {
            return bad("fit_window", self.fit_window.1, "fit window must lie inside the radial grid");
        }
        Ok(())
    }
}

/// Solution state: channel coefficients on the mode nodes plus the `ξ = 0`
/// coefficients (whose density entry is the conserved total mass).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    /// `modes[(node, channel)] = ĉ_{nℓ}(ρ_node)`.
    pub modes: CMat,
    pub zero: CVec,
}

impl PhaseState {
    pub fn zeros(nodes: usize, channels: usize) -> Self {
        PhaseState { t: 0.0, modes: CMat::zeros(nodes, channels), zero: CVec::zeros(channels) }
    }

    fn axpy(&self, c: f64, other: &PhaseState) -> PhaseState {
        PhaseState {
            t: self.t,
            modes: &self.modes + &other.modes * C64::new(c, 0.0),
            zero: &self.zero + &other.zero * C64::new(c, 0.0),
        }
    }

    fn scaled(&self, c: f64) -> PhaseState {
        PhaseState { t: self.t, modes: &self.modes * C64::new(c, 0.0), zero: &self.zero * C64::new(c, 0.0) }
    }
}

/// Physical-space channel profiles `c_{nℓ}(r)` and the field `Φ'(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    pub r: Vec<f64>,
    /// `values[(r, channel)]`.
    pub values: CMat,
    pub field: Vec<C64>,
}

/// Pointwise observables along a ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub r: Vec<f64>,
    pub density: Vec<f64>,
    pub momentum: Vec<f64>,
    pub field: Vec<f64>,
    pub micro: Vec<f64>,
    pub total: Vec<f64>,
    pub grad_v: Vec<f64>,
}

struct Propagators {
    h: f64,
    full: Vec<CMat>,
    half: Vec<CMat>,
    back: Vec<CMat>,
    zero_full: Vec<f64>,
    zero_half: Vec<f64>,
    zero_back: Vec<f64>,
}

/// Discretized solver: basis, radial grids, transforms and propagators.
pub struct RadialSolver {
    pub config: NonlinearConfig,
    pub basis: SphericalBasis,
    pub rho: ModeGrid,
    pub r: ModeGrid,
    /// `ρ`-grid → `r`-nodes, per `ℓ`.
    inverse: HankelMatrices,
    /// `r`-grid → `[0] ∪ ρ`-nodes, per `ℓ`.
    forward: HankelMatrices,
    props: Propagators,
}

fn grid_breaks(max: f64, panel: f64, fine_to: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = fine_to / 4.0;
    while x < fine_to {
        b.push(x);
        x *= 2.0;
    }
    let m = ((max - fine_to) / panel).ceil().max(1.0) as usize;
    for k in 0..=m {
        b.push(fine_to + (max - fine_to) * k as f64 / m as f64);
    }
    b
}

fn real_times_complex(m: &DMatrix<f64>, v: &CMat) -> CMat {
    let re = v.map(|z| z.re);
    let im = v.map(|z| z.im);
    let (a, b) = (m * re, m * im);
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], b[(i, j)]))
}

fn i_pow(l: usize) -> C64 {
    [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)][l % 4]
}

impl RadialSolver {
    pub fn new(config: NonlinearConfig) -> Result<Self> {
        config.validate()?;
        let basis = SphericalBasis::build(config.max_degree)?;
        let np = config.nodes_per_panel;
        let rho = ModeGrid::from_breaks(grid_breaks(config.rho_max, config.rho_panel, 0.5), np)?;
        let r = ModeGrid::from_breaks(grid_breaks(config.r_max, config.r_panel, 1.0), np)?;
        let l_max = config.max_degree;
        let inverse = HankelMatrices::build(&rho, &r.nodes, l_max);
        let mut ftargets = vec![0.0];
        ftargets.extend_from_slice(&rho.nodes);
        let forward = HankelMatrices::build(&r, &ftargets, l_max);
        let props = Self::propagators(&basis, &rho, config.dt);
        Ok(RadialSolver { config, basis, rho, r, inverse, forward, props })
    }

    fn propagators(basis: &SphericalBasis, rho: &ModeGrid, h: f64) -> Propagators {
        let per: Vec<(CMat, CMat, CMat)> = rho
            .nodes
            .par_iter()
            .map(|&s| {
                let b = basis.generator(s);
                let half = expm(&(&b * C64::new(0.5 * h, 0.0)));
                let back = expm(&(&b * C64::new(-0.5 * h, 0.0)));
                (&half * &half, half, back)
            })
            .collect();
        let mut full = Vec::new();
        let mut half = Vec::new();
        let mut back = Vec::new();
        for (f, hh, b) in per {
            full.push(f);
            half.push(hh);
            back.push(b);
        }
        Propagators {
            h,
            full,
            half,
            back,
            zero_full: basis.l_diag.iter().map(|l| (l * h).exp()).collect(),
            zero_half: basis.l_diag.iter().map(|l| (0.5 * l * h).exp()).collect(),
            zero_back: basis.l_diag.iter().map(|l| (-0.5 * l * h).exp()).collect(),
        }
    }

    fn ensure_step(&mut self, h: f64) {
        if self.props.h != h {
            self.props = Self::propagators(&self.basis, &self.rho, h);
        }
    }

    /// Initial state `δ_0 (1+|x|²)^{-n} g(|v|)` with `g = (1+|v|)^{-3}`
    /// (neutral variant: `sqrt(M)` component removed).
    pub fn initial_state(&self) -> PhaseState {
        let cfg = &self.config;
        let mut g = self.basis.isotropic_coeffs(|v| (1.0 + v).powi(-3));
        if cfg.neutral {
            g[0] = C64::new(0.0, 0.0);
        }
        let n = cfg.decay_power;
        let modes = CMat::from_fn(self.rho.len(), self.basis.len(), |i, k| {
            g[k] * (cfg.delta0 * algebraic_profile_hat(n, self.rho.nodes[i]))
        });
        let zero = &g * C64::new(cfg.delta0 * algebraic_profile_hat(n, 0.0), 0.0);
        PhaseState { t: 0.0, modes, zero }
    }

    /// Physical profiles on the solver's `r` nodes.
    pub fn to_physical(&self, state: &PhaseState) -> PhysicalState {
        self.to_physical_with(state, &self.inverse)
    }

    fn to_physical_with(&self, state: &PhaseState, inv: &HankelMatrices) -> PhysicalState {
        let nr = inv.targets.len();
        let mut values = CMat::zeros(nr, self.basis.len());
        for l in 0..=self.config.max_degree {
            let cols: Vec<usize> = (0..self.basis.len()).filter(|&k| self.basis.channels[k].1 == l).collect();
            if cols.is_empty() {
                continue;
            }
            let sub = CMat::from_fn(self.rho.len(), cols.len(), |i, j| state.modes[(i, cols[j])]);
            let out = real_times_complex(&inv.matrices[l], &sub) * i_pow(l);
            for (j, &k) in cols.iter().enumerate() {
                values.set_column(k, &out.column(j));
            }
        }
        let field = self.field_with(state, inv);
        PhysicalState { r: inv.targets.clone(), values, field }
    }

    fn field_with(&self, state: &PhaseState, inv: &HankelMatrices) -> Vec<C64> {
        // Φ'(r) = (2π)^{-3/2} 4π ∫ ρ̂(ρ) ρ j_1(ρ r) dρ.
        let dens = CMat::from_fn(self.rho.len(), 1, |i, _| state.modes[(i, 0)] / self.rho.nodes[i]);
        real_times_complex(&inv.matrices[1], &dens).column(0).iter().cloned().collect()
    }

    /// `poisson_field`: radial field `Φ'(r)` at arbitrary radii.
    pub fn poisson_field(&self, state: &PhaseState, r: &[f64]) -> Result<Vec<C64>> {
        if self.config.neutral {
            self.check_neutral(state)?;
        }
        let inv = HankelMatrices::build(&self.rho, r, 1);
        Ok(self.field_with(state, &inv))
    }

    fn check_neutral(&self, state: &PhaseState) -> Result<()> {
        let mean = state.zero[0].norm();
        if mean > 1e-12 * self.config.delta0.max(1e-300) {
            return Err(VpfpError::NonNeutral { mean });
        }
        Ok(())
    }

    /// `nonlinear_term`: `Ĥ(f)` on the mode nodes and at `ξ = 0`.
    pub fn nonlinear_term(&self, state: &PhaseState) -> PhaseState {
        let phys = self.to_physical(state);
        let rt = self.basis.raise.transpose();
        let mut h = &phys.values * rt;
        for (i, e) in phys.field.iter().enumerate() {
            let mut row = h.row_mut(i);
            row *= *e;
        }
        let nrho = self.rho.len();
        let mut modes = CMat::zeros(nrho, self.basis.len());
        let mut zero = CVec::zeros(self.basis.len());
        for l in 0..=self.config.max_degree {
            let cols: Vec<usize> = (0..self.basis.len()).filter(|&k| self.basis.channels[k].1 == l).collect();
            if cols.is_empty() {
                continue;
            }
            let sub = CMat::from_fn(h.nrows(), cols.len(), |i, j| h[(i, cols[j])]);
            let out = real_times_complex(&self.forward.matrices[l], &sub) * i_pow(l).conj();
            for (j, &k) in cols.iter().enumerate() {
                zero[k] = out[(0, j)];
                for i in 0..nrho {
                    modes[(i, k)] = out[(i + 1, j)];
                }
            }
        }
        PhaseState { t: state.t, modes, zero }
    }

    fn nonlinear_or_zero(&self, state: &PhaseState) -> PhaseState {
        if self.config.nonlinear {
            self.nonlinear_term(state)
        } else {
            PhaseState::zeros(self.rho.len(), self.basis.len())
        }
    }

    fn propagate(&self, state: &PhaseState, which: u8) -> PhaseState {
        let (mats, zf) = match which {
            0 => (&self.props.full, &self.props.zero_full),
            1 => (&self.props.half, &self.props.zero_half),
            _ => (&self.props.back, &self.props.zero_back),
        };
        let mut modes = state.modes.clone();
        for (i, m) in mats.iter().enumerate() {
            let row = state.modes.row(i).transpose();
            modes.set_row(i, &(m * row).transpose());
        }
        let zero = CVec::from_fn(state.zero.len(), |k, _| state.zero[k] * zf[k]);
        PhaseState { t: state.t, modes, zero }
    }

    /// Step-size limit: the backward half-step of the integrating-factor
    /// scheme amplifies degree-`N` modes by `e^{hN/2}` and the explicit
    /// nonlinear stages need `h ||Φ'||_∞ ||a^†|| ≤ √3`.
    pub fn step_limit(&self, state: &PhaseState) -> (f64, f64) {
        let n = self.config.max_degree as f64;
        let back = 2.0 / n;
        let emax = self.to_physical(state).field.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let nl = if emax > 0.0 && self.config.nonlinear { 3f64.sqrt() / (emax * op_norm2(&self.basis.raise)) } else { f64::INFINITY };
        if back <= nl {
            (back, n)
        } else {
            (nl, 0.0)
        }
    }

    /// `evolve`: Lawson SSP-RK3 from `initial` to `t_end` with step `dt`.
    pub fn evolve(&mut self, initial: &PhaseState, t_end: f64, dt: f64) -> Result<Trajectory> {
        if self.config.neutral {
            self.check_neutral(initial)?;
        }
        let (limit, mode) = self.step_limit(initial);
        if dt > limit {
            return Err(VpfpError::Cfl { dt, limit, mode });
        }
        self.ensure_step(dt);
        let steps = (t_end / dt).round() as usize;
        let mut u = initial.clone();
        let mut states = vec![u.clone()];
        let mass0 = mass_of(&u);
        let mut mass = vec![mass0];
        for m in 0..steps {
            let h = dt;
            let n0 = self.nonlinear_or_zero(&u);
            let u1 = self.propagate(&u.axpy(h, &n0), 0);
            let n1 = self.nonlinear_or_zero(&u1);
            let u2 = self.propagate(&u, 1).scaled(0.75).axpy(0.25, &self.propagate(&u1.axpy(h, &n1), 2));
            let n2 = self.nonlinear_or_zero(&u2);
            let next = self
                .propagate(&u, 0)
                .scaled(1.0 / 3.0)
                .axpy(2.0 / 3.0, &self.propagate(&u2.axpy(h, &n2), 1));
            u = PhaseState { t: (m + 1) as f64 * dt, ..next };
            mass.push(mass_of(&u));
            states.push(u.clone());
        }
        Ok(Trajectory { dt, states, mass })
    }

    /// Observables at radii `r` for one state.
    pub fn observables(&self, state: &PhaseState, r: &[f64]) -> Observables {
        let inv = HankelMatrices::build(&self.rho, r, self.config.max_degree);
        self.observables_with(state, &inv)
    }

    fn observables_with(&self, state: &PhaseState, inv: &HankelMatrices) -> Observables {
        let phys = self.to_physical_with(state, inv);
        let nr = phys.r.len();
        let mut o = Observables {
            r: phys.r.clone(),
            density: Vec::with_capacity(nr),
            momentum: Vec::with_capacity(nr),
            field: Vec::with_capacity(nr),
            micro: Vec::with_capacity(nr),
            total: Vec::with_capacity(nr),
            grad_v: Vec::with_capacity(nr),
        };
        for i in 0..nr {
            let row: CVec = phys.values.row(i).transpose();
            o.density.push(row[0].norm());
            o.momentum.push(row[1].norm());
            o.field.push(phys.field[i].norm());
            o.micro.push(row.iter().skip(2).map(|z| z.norm_sqr()).sum::<f64>().sqrt());
            o.total.push(row.norm());
            o.grad_v.push(self.basis.grad_v_norm(&row));
        }
        o
    }

    /// Weighted sup norm `max_c sup_r (1+r²)^{n_c} |component_c|` with the
    /// target decay weights (`+1/2` for neutral data), over `r ≤ fit_window.1`.
    pub fn weighted_sup(&self, state: &PhaseState) -> f64 {
        let phys = self.to_physical(state);
        let w = Weights::for_config(&self.config);
        let mut best: f64 = 0.0;
        for (i, &r) in phys.r.iter().enumerate() {
            if r > self.config.fit_window.1 {
                break;
            }
            let q = 1.0 + r * r;
            let row: CVec = phys.values.row(i).transpose();
            let micro = row.iter().skip(2).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            best = best
                .max(q.powf(w.density) * row[0].norm())
                .max(q.powf(w.momentum) * (row[1].norm() + phys.field[i].norm()))
                .max(q.powf(w.micro) * micro)
                .max(q.powf(w.total) * row.norm());
        }
        best
    }

    /// `picard_solve`: iterate `f^n = G(t) f_0 + ∫ G(t-s) H(f^{n-1}) ds` on
    /// the step grid of the configuration (trapezoidal Duhamel rule with the
    /// exact mode exponentials), stopping when successive distance ratios
    /// agree to 10% or after `n_max` iterates.
    pub fn picard_solve(&mut self, initial: &PhaseState, n_max: usize) -> Result<IterationTrace> {
        let h = self.config.dt;
        self.ensure_step(h);
        let steps = (self.config.t_end / h).round() as usize;
        let times: Vec<f64> = (0..=steps).map(|m| m as f64 * h).collect();
        let zero = PhaseState::zeros(self.rho.len(), self.basis.len());
        let mut prev: Vec<PhaseState> = vec![zero; steps + 1];
        let mut iterates = Vec::new();
        let mut ratios: Vec<f64> = Vec::new();
        let mut converged = false;
        for n in 1..=n_max {
            let forcing: Vec<PhaseState> = if n == 1 {
                Vec::new()
            } else {
                prev.iter().map(|s| self.nonlinear_term(s)).collect()
            };
            let mut cur = Vec::with_capacity(steps + 1);
            cur.push(initial.clone());
            for m in 0..steps {
                let base = if n == 1 {
                    self.propagate(&cur[m], 0)
                } else {
                    self.propagate(&cur[m].axpy(0.5 * h, &forcing[m]), 0).axpy(0.5 * h, &forcing[m + 1])
                };
                cur.push(PhaseState { t: times[m + 1], ..base });
            }
            let sup_weighted: Vec<f64> = cur.iter().map(|s| self.weighted_sup(s)).collect();
            let distance = cur
                .iter()
                .zip(&prev)
                .zip(&times)
                .map(|((a, b), &t)| (ETA_HAT * t).exp() * self.weighted_sup(&a.axpy(-1.0, b)))
                .fold(0.0, f64::max);
            // Once successive iterates agree to round-off the ratios carry no
            // information about the contraction factor.
            let floor = iterates.first().map_or(0.0, |it: &PicardIterate| 1e-12 * it.distance);
            if distance <= floor {
                converged = true;
                iterates.push(PicardIterate { n, distance, sup_weighted_norms: sup_weighted });
                prev = cur;
                break;
            }
            if let Some(last) = iterates.last().map(|it: &PicardIterate| it.distance) {
                ratios.push(distance / last);
            }
            iterates.push(PicardIterate { n, distance, sup_weighted_norms: sup_weighted });
            prev = cur;
            let k = ratios.len();
            if k >= 2 && ((ratios[k - 1] / ratios[k - 2]) - 1.0).abs() < 0.1 {
                converged = true;
                break;
            }
            if distance == 0.0 {
                converged = true;
                break;
            }
        }
        let contraction_ratio = ratios.last().copied().unwrap_or(0.0);
        Ok(IterationTrace { delta0: self.config.delta0, times, iterates, ratios, contraction_ratio, converged, final_states: prev })
    }
}

fn mass_of(s: &PhaseState) -> f64 {
    (2.0 * std::f64::consts::PI).powf(1.5) * s.zero[0].re
}

/// Target decay weights `n_c` of `(1+|x|²)^{n_c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub density: f64,
    pub momentum: f64,
    pub micro: f64,
    pub total: f64,
}

impl Weights {
    pub fn for_config(cfg: &NonlinearConfig) -> Self {
        let extra = if cfg.neutral { 0.5 } else { 0.0 };
        Weights { density: 2.0 + extra, momentum: 1.0 + extra, micro: 1.5 + extra, total: 1.0 + extra }
    }
}

/// Time series of states produced by [`RadialSolver::evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<PhaseState>,
    /// Total mass `∫∫ f sqrt(M)` at each step.
    pub mass: Vec<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Largest `|mass(t) - mass(0)| / t`.
    pub fn mass_drift_rate(&self) -> f64 {
        let m0 = self.mass[0];
        self.states
            .iter()
            .zip(&self.mass)
            .filter(|(s, _)| s.t > 0.0)
            .map(|(s, m)| (m - m0).abs() / s.t)
            .fold(0.0, f64::max)
    }

    /// State closest to time `t`.
    pub fn at(&self, t: f64) -> &PhaseState {
        let idx = ((t / self.dt).round() as usize).min(self.states.len() - 1);
        &self.states[idx]
    }

    /// Flat little-endian binary snapshots (`t`, then `(re, im)` of the
    /// mode matrix row-major, then the `ξ = 0` coefficients) plus a JSON
    /// sidecar manifest.
    pub fn write(&self, solver: &RadialSolver, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut bin = std::io::BufWriter::new(std::fs::File::create(dir.join("trajectory.bin"))?);
        for s in &self.states {
            bin.write_all(&s.t.to_le_bytes())?;
            for i in 0..s.modes.nrows() {
                for k in 0..s.modes.ncols() {
                    bin.write_all(&s.modes[(i, k)].re.to_le_bytes())?;
                    bin.write_all(&s.modes[(i, k)].im.to_le_bytes())?;
                }
            }
            for z in s.zero.iter() {
                bin.write_all(&z.re.to_le_bytes())?;
                bin.write_all(&z.im.to_le_bytes())?;
            }
        }
        bin.flush()?;
        let manifest = serde_json::json!({
            "layout": "per snapshot: f64 t; complex128 modes[node][channel] row-major; complex128 zero[channel]; little endian",
            "snapshots": self.states.len(),
            "nodes": solver.rho.len(),
            "channels": solver.basis.channels,
            "rho_nodes": solver.rho.nodes,
            "times": self.times(),
            "mass": self.mass,
            "config": solver.config,
        });
        std::fs::write(dir.join("trajectory.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// One Picard iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardIterate {
    pub n: usize,
    /// `sup_t e^{η̂_0 t} W(f^n - f^{n-1})`.
    pub distance: f64,
    pub sup_weighted_norms: Vec<f64>,
}

/// Result of [`RadialSolver::picard_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub delta0: f64,
    pub times: Vec<f64>,
    pub iterates: Vec<PicardIterate>,
    pub ratios: Vec<f64>,
    /// Estimate of the geometric factor `C δ_0`.
    pub contraction_ratio: f64,
    pub converged: bool,
    pub final_states: Vec<PhaseState>,
}

/// One fitted spatial exponent against its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentCheck {
    pub name: String,
    /// Target `n` in `(1+|x|²)^{-n}`.
    pub target: f64,
    /// Measured `n` (half the fitted [`DecayFit::exponent_x`]).
    pub measured: f64,
    pub fit: DecayFit,
}

/// `decay_report` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub neutral: bool,
    pub exponents: Vec<ExponentCheck>,
    /// Rate of the weighted sup norm.
    pub weighted_rate: f64,
    pub weighted_norms: Vec<(f64, f64)>,
    /// `sup_r ||∇_v f|| / sup_r ||f||` over the early window and its slope.
    pub grad_ratio: Vec<(f64, f64)>,
    pub grad_slope: f64,
    pub mass_drift_rate: f64,
}

/// `decay_report`: spatial exponents at the fit time, weighted-norm rate
/// and the early-time `∇_v` slope.
pub fn decay_report(solver: &RadialSolver, traj: &Trajectory) -> Result<DecayReport> {
    let cfg = &solver.config;
    let (lo, hi) = cfg.fit_window;
    let xs: Vec<f64> = (0..=120).map(|i| lo + (hi - lo) * i as f64 / 120.0).collect();
    let obs = solver.observables(traj.at(cfg.fit_time), &xs);
    let w = Weights::for_config(cfg);
    let mf: Vec<f64> = obs.momentum.iter().zip(&obs.field).map(|(a, b)| a + b).collect();
    let series: [(&str, f64, Component, &Vec<f64>); 4] = [
        ("P0", w.density, Component::P0, &obs.density),
        ("Pm+field", w.momentum, Component::Pm, &mf),
        ("P3", w.micro, Component::P3, &obs.micro),
        ("total", w.total, Component::Full, &obs.total),
    ];
    let mut exponents = Vec::new();
    for (name, target, comp, vals) in series {
        let env = tail_envelope(vals);
        let peak = env.iter().fold(0.0, |a: f64, b| a.max(*b));
        let fit = fit_decay(comp, cfg.fit_time, &xs, &env, (lo, hi), 1e-14 * peak)?;
        exponents.push(ExponentCheck { name: name.to_string(), target, measured: 0.5 * fit.exponent_x, fit });
    }
    let weighted_norms: Vec<(f64, f64)> = traj
        .states
        .iter()
        .filter(|s| s.t >= 1.0 - 1e-12)
        .step_by(((0.25 / traj.dt).round() as usize).max(1))
        .map(|s| (s.t, solver.weighted_sup(s)))
        .collect();
    let (ts, ws): (Vec<f64>, Vec<f64>) = weighted_norms.iter().cloned().unzip();
    let weighted_rate = fit_rate(&ts, &ws, (1.0, cfg.t_end))?.slope;
    let (glo, ghi) = cfg.grad_window;
    let probe: Vec<f64> = solver.r.nodes.iter().cloned().filter(|&r| r <= hi).collect();
    let inv = HankelMatrices::build(&solver.rho, &probe, cfg.max_degree);
    let grad_ratio: Vec<(f64, f64)> = traj
        .states
        .iter()
        .filter(|s| s.t >= glo - 1e-12 && s.t <= ghi + 1e-12)
        .map(|s| {
            let o = solver.observables_with(s, &inv);
            let g = o.grad_v.iter().cloned().fold(0.0, f64::max);
            let f = o.total.iter().cloned().fold(0.0, f64::max);
            (s.t, g / f)
        })
        .collect();
    let (gt, gr): (Vec<f64>, Vec<f64>) = grad_ratio.iter().cloned().unzip();
    let grad_slope = fit_power(&gt, &gr, (glo, ghi))?.slope;
    Ok(DecayReport {
        neutral: cfg.neutral,
        exponents,
        weighted_rate,
        weighted_norms,
        grad_ratio,
        grad_slope,
        mass_drift_rate: traj.mass_drift_rate(),
    })
}
