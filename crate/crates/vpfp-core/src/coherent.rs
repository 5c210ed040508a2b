//! Exact large-frequency propagators via coherent-state closed forms.
//!
//! For `xi = s e_1` write `A_0 = L - i s v_1` (so `A = A_0 - 2` and
//! `B = A_0 + P` with the rank-one Poisson term
//! `P = -(i/s) |v_1 sqrt(M)><sqrt(M)|`).  The damped propagator factorizes
//! exactly (Mehler kernel `K_σ = e^{σL}`, `U_ω` multiplication by
//! `e^{-i ω v_1}`):
//!
//! ```text
//! E(σ) := e^{σ A_0} = e^{-q s²} U_ω K_σ U_ω,   ω = s (1-a)/(1+a),  a = e^{-σ},
//!                                             q = 2 D(σ) / (1 - a²)
//! ```
//!
//! so `||E(σ)|| = e^{-q s²}` and `E` maps Gaussian coherent states to
//! coherent states.  With `x(σ) = E(σ) v_1 sqrt(M)`, `y(σ) = E(σ)^* sqrt(M)`
//! and the scalar `φ(σ) = (x(σ), sqrt(M))`, the Dyson expansion in `P` is
//!
//! ```text
//! e^{tB} = Σ_m T_m,   T_0 = E(t),
//! T_m = (-i/s)^m ∫∫ |x(t-ρ)> Φ_{m-1}(ρ-ρ') <y(ρ')| dρ' dρ,
//! ```
//!
//! with `Φ_0 = δ` and `Φ_n = φ * Φ_{n-1}` (Volterra convolution).  The
//! high-frequency iterates and remainders are fixed linear combinations
//! of the `T_m` (see [`DysonWeights`]), so every object is a banded kernel
//! plus a finite-rank integral operator whose vectors are explicit.
//! Operators are discretized on a uniform `v_1` grid (Nyström); the
//! transverse directions contribute the Mehler factor only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VpfpError};
use crate::kernel::variance_value;
use crate::quadrature::composite_gauss_legendre;
use crate::C64;

const I: C64 = Complex64 { re: 0.0, im: 1.0 };

/// Closed-form scalars of `E(σ)` at frequency `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentParams {
    pub s: f64,
    pub sigma: f64,
    pub a: f64,
    /// `1 - a²`.
    pub one_m_a2: f64,
    pub omega: f64,
    /// Output wavenumber `ω (1 + a) = s (1 - a)`.
    pub kappa: f64,
    /// `e^{-q s² - ω²(1-a²)/2}`.
    pub amp: f64,
    /// `q s²`.
    pub qs2: f64,
}

impl CoherentParams {
    pub fn new(s: f64, sigma: f64) -> Self {
        let a = (-sigma).exp();
        let one_m_a2 = -(-2.0 * sigma).exp_m1();
        let c = (0.5 * sigma).tanh();
        let omega = s * c;
        let kappa = -s * (-sigma).exp_m1();
        let qs2 = if sigma > 0.0 {
            2.0 * variance_value(sigma) / one_m_a2 * s * s
        } else {
            0.0
        };
        let amp = (-qs2 - 0.5 * omega * omega * one_m_a2).exp();
        CoherentParams { s, sigma, a, one_m_a2, omega, kappa, amp, qs2 }
    }
}

/// `φ(σ) = (E(σ) v_1 sqrt(M), sqrt(M)) = -i ω (1+a) e^{-q s² - ω²(1+a)}`.
pub fn phi(s: f64, sigma: f64) -> C64 {
    let p = CoherentParams::new(s, sigma);
    -I * p.kappa * (-p.qs2 - p.omega * p.omega * (1.0 + p.a)).exp()
}

/// `ψ(σ) = (E(σ) sqrt(M), sqrt(M)) = e^{-q s² - ω²(1+a)}`.
pub fn psi(s: f64, sigma: f64) -> C64 {
    let p = CoherentParams::new(s, sigma);
    C64::new((-p.qs2 - p.omega * p.omega * (1.0 + p.a)).exp(), 0.0)
}

/// Exact induced `L^2_v` norm of `E(σ)`: `e^{-q s²}`.
pub fn damped_norm(s: f64, sigma: f64) -> f64 {
    (-CoherentParams::new(s, sigma).qs2).exp()
}

/// Uniform Nyström grid on `[-L, L]` for the `v_1` variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VGrid {
    pub v: Vec<f64>,
    pub h: f64,
    sqrt_m: Vec<f64>,
}

/// Half-width of the velocity grid.
pub const V_HALF_WIDTH: f64 = 10.0;

impl VGrid {
    /// Grid resolving the Mehler width `sqrt(1 - e^{-2t})` and the largest
    /// wavenumber `s (1 - e^{-t})` occurring up to time `t`.
    pub fn for_mode(s: f64, t: f64, max_points: usize) -> Result<Self> {
        let width = (-(-2.0 * t).exp_m1()).sqrt();
        let kmax = -s * (-t).exp_m1();
        let h = (0.3 * width).min(0.5 / kmax.max(1e-12)).min(0.1);
        let n = (2.0 * V_HALF_WIDTH / h).ceil() as usize + 1;
        if n > max_points {
            return Err(VpfpError::InvalidParameter {
                name: "velocity grid points",
                value: n as f64,
                reason: "mode/time pair needs a finer Nyström grid than allowed",
            });
        }
        Ok(Self::uniform(n))
    }

    /// `n` equispaced points on `[-L, L]`.
    pub fn uniform(n: usize) -> Self {
        let h = 2.0 * V_HALF_WIDTH / (n - 1) as f64;
        let v: Vec<f64> = (0..n).map(|i| -V_HALF_WIDTH + h * i as f64).collect();
        let sqrt_m = v.iter().map(|&x| sqrt_maxwellian(x)).collect();
        VGrid { v, h, sqrt_m }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Samples of the 1-d `sqrt(M)`.
    pub fn sqrt_m(&self) -> &[f64] {
        &self.sqrt_m
    }

    /// Discrete `L^2` inner product `(f, g) = h Σ f conj(g)`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<C64>() * self.h
    }

    /// Discrete bilinear pairing `h Σ f g`.
    pub fn pair(&self, f: &[C64], g: &[C64]) -> C64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<C64>() * self.h
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.h).sqrt()
    }
}

/// 1-d `sqrt(M)`.
pub fn sqrt_maxwellian(v: f64) -> f64 {
    (-0.25 * v * v).exp() / (2.0 * std::f64::consts::PI).powf(0.25)
}

/// `x(σ) = E(σ) v_1 sqrt(M)` on the grid.
pub fn x_vector(grid: &VGrid, s: f64, sigma: f64) -> Vec<C64> {
    let p = CoherentParams::new(s, sigma);
    grid.v
        .iter()
        .zip(grid.sqrt_m())
        .map(|(&v, &m)| {
            let poly = C64::new(p.a * v, -p.omega * p.one_m_a2);
            poly * C64::from_polar(p.amp * m, -p.kappa * v)
        })
        .collect()
}

/// Bra of `y(σ) = E(σ)^* sqrt(M)`: the function `conj(y)` so that
/// `<y | f> = h Σ conj(y) f`.
pub fn y_bra(grid: &VGrid, s: f64, sigma: f64) -> Vec<C64> {
    let p = CoherentParams::new(s, sigma);
    grid.v
        .iter()
        .zip(grid.sqrt_m())
        .map(|(&v, &m)| C64::from_polar(p.amp * m, -p.kappa * v))
        .collect()
}

/// `E(t)` as a banded Nyström matrix (entries include the grid weight `h`).
#[derive(Debug, Clone)]
pub struct BandedKernel {
    pub rows: Vec<(usize, Vec<C64>)>,
    pub n: usize,
}

impl BandedKernel {
    /// Kernel `e^{-q s²} e^{-iω(v+u)} M^{-1/2}(v) p_σ(v|u) M^{1/2}(u)`,
    /// truncated where the transition Gaussian is below `e^{-40}`.
    pub fn damped(grid: &VGrid, s: f64, sigma: f64) -> Self {
        let p = CoherentParams::new(s, sigma);
        let var = p.one_m_a2;
        let pref = (-p.qs2).exp() / (2.0 * std::f64::consts::PI * var).sqrt() * grid.h;
        let reach = (80.0 * var).sqrt();
        let n = grid.len();
        let rows = grid
            .v
            .iter()
            .map(|&v| {
                // |v - a u| <= reach  <=>  u in [(v - reach)/a, (v + reach)/a].
                let (lo, hi) = if p.a > 1e-300 {
                    ((v - reach) / p.a, (v + reach) / p.a)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                };
                let j0 = (((lo + V_HALF_WIDTH) / grid.h).floor().max(0.0) as usize).min(n);
                let j1 = (((hi + V_HALF_WIDTH) / grid.h).ceil().max(0.0) as usize + 1).min(n);
                let vals = (j0..j1.max(j0))
                    .map(|j| {
                        let u = grid.v[j];
                        let e = -(v - p.a * u).powi(2) / (2.0 * var) + 0.25 * (v * v - u * u);
                        C64::from_polar(pref * e.exp(), -p.omega * (v + u))
                    })
                    .collect();
                (j0, vals)
            })
            .collect();
        BandedKernel { rows, n }
    }

    pub fn apply(&self, f: &[C64], out: &mut [C64], scale: C64) {
        for (o, (j0, row)) in out.iter_mut().zip(&self.rows) {
            let acc: C64 = row.iter().zip(&f[*j0..]).map(|(k, x)| k * x).sum();
            *o += acc * scale;
        }
    }

    pub fn apply_adjoint(&self, f: &[C64], out: &mut [C64], scale: C64) {
        for (i, (j0, row)) in self.rows.iter().enumerate() {
            let fi = f[i];
            for (k, val) in row.iter().enumerate() {
                out[j0 + k] += val.conj() * fi * scale.conj();
            }
        }
    }
}

/// Scalar Volterra machinery on a uniform grid `τ_n = n Δ`, `n = 0..=N`.
#[derive(Debug, Clone)]
pub struct ScalarSeries {
    pub dt: f64,
    pub values: Vec<C64>,
}

impl ScalarSeries {
    pub fn sample(t: f64, n: usize, f: impl Fn(f64) -> C64) -> Self {
        let dt = t / n as f64;
        ScalarSeries { dt, values: (0..=n).map(|k| f(k as f64 * dt)).collect() }
    }

    /// Trapezoidal convolution `(self * other)(τ_n) = ∫_0^{τ_n} self(τ_n - τ') other(τ') dτ'`.
    pub fn convolve(&self, other: &ScalarSeries) -> ScalarSeries {
        let n = self.values.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k in 1..n {
            let mut acc = (self.values[k] * other.values[0] + self.values[0] * other.values[k]) * 0.5;
            for l in 1..k {
                acc += self.values[k - l] * other.values[l];
            }
            out[k] = acc * self.dt;
        }
        ScalarSeries { dt: self.dt, values: out }
    }

    /// Solve `z = f + λ (k * z)` by the trapezoidal rule (`k(0)` may be non-zero).
    pub fn volterra(kernel: &ScalarSeries, f: &ScalarSeries, lambda: C64) -> ScalarSeries {
        let n = f.values.len();
        let h = kernel.dt;
        let mut z = vec![C64::new(0.0, 0.0); n];
        z[0] = f.values[0];
        for k in 1..n {
            let mut acc = kernel.values[k] * z[0] * 0.5;
            for l in 1..k {
                acc += kernel.values[k - l] * z[l];
            }
            let rhs = f.values[k] + lambda * h * acc;
            z[k] = rhs / (C64::new(1.0, 0.0) - lambda * h * 0.5 * kernel.values[0]);
        }
        ScalarSeries { dt: h, values: z }
    }

    /// Linear interpolation at `τ ∈ [0, τ_N]`.
    pub fn at(&self, tau: f64) -> C64 {
        let x = (tau / self.dt).max(0.0);
        let k = (x.floor() as usize).min(self.values.len() - 2);
        let f = x - k as f64;
        self.values[k] * (1.0 - f) + self.values[k + 1] * f
    }

    pub fn scaled(&self, c: C64) -> ScalarSeries {
        ScalarSeries { dt: self.dt, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &ScalarSeries) -> ScalarSeries {
        ScalarSeries {
            dt: self.dt,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Coefficients of a combination `c_E E(t) + Σ_{m≥1} c_m T_m`.
///
/// `tail` is the common coefficient of every `T_m` with `m > explicit.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DysonWeights {
    pub c_e: f64,
    /// `c_1, c_2, …` for the explicitly listed orders.
    pub explicit: Vec<f64>,
    pub tail: f64,
    /// Overall factor (typically `e^{-2t}`).
    pub overall: f64,
}

/// `Σ_{i>r} x^i / i!` (equal to `e^x` for `r < 0`).
pub fn exp_tail(x: f64, r: i64) -> f64 {
    if r < 0 {
        return x.exp();
    }
    let mut term = 1.0;
    for i in 1..=r {
        term *= x / i as f64;
    }
    // term = x^r / r!; sum the tail directly for accuracy.
    let mut sum = 0.0;
    let mut i = r + 1;
    loop {
        term *= x / i as f64;
        sum += term;
        if term < 1e-18 * sum || i > r + 400 {
            break;
        }
        i += 1;
    }
    sum
}

impl DysonWeights {
    /// High-frequency iterate `Î_j`: `e^{-2t} Σ_{m≤j} (2t)^{j-m}/(j-m)! T_m`.
    pub fn iterate(j: usize, t: f64) -> Self {
        let f = |p: usize| (2.0 * t).powi(p as i32) / (1..=p).map(|i| i as f64).product::<f64>();
        DysonWeights {
            c_e: f(j),
            explicit: (1..=j).map(|m| f(j - m)).collect(),
            tail: 0.0,
            overall: (-2.0 * t).exp(),
        }
    }

    /// Remainder `R̂_k = e^{tB} - Σ_{j≤k} Î_j`.
    pub fn remainder(k: usize, t: f64) -> Self {
        DysonWeights {
            c_e: exp_tail(2.0 * t, k as i64),
            explicit: (1..=k).map(|m| exp_tail(2.0 * t, k as i64 - m as i64)).collect(),
            tail: (2.0 * t).exp(),
            overall: (-2.0 * t).exp(),
        }
    }

    /// Partial sum `Ŵ_k = Σ_{j≤k} Î_j`.
    pub fn partial_sum(k: usize, t: f64) -> Self {
        let r = Self::remainder(k, t);
        let e2 = (2.0 * t).exp();
        DysonWeights {
            c_e: e2 - r.c_e,
            explicit: r.explicit.iter().map(|c| e2 - c).collect(),
            tail: 0.0,
            overall: r.overall,
        }
    }

    /// The full propagator `e^{tB}`.
    pub fn full() -> Self {
        DysonWeights { c_e: 1.0, explicit: Vec::new(), tail: 1.0, overall: 1.0 }
    }
}

/// Numerical resolution of a [`DysonOperator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DysonResolution {
    /// Uniform points for the scalar Volterra series.
    pub tau_points: usize,
    /// Gauss–Legendre nodes per panel for the `ρ` integrals.
    pub rho_nodes: usize,
    /// Maximum Nyström grid size.
    pub max_v_points: usize,
}

impl Default for DysonResolution {
    fn default() -> Self {
        DysonResolution { tau_points: 2048, rho_nodes: 6, max_v_points: 6000 }
    }
}

/// Graded panel breakpoints on `[0, τ]`, refined toward both ends.
fn graded_breaks(tau: f64) -> Vec<f64> {
    let rel = [
        0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.15, 0.3, 0.5, 0.7, 0.85, 0.95, 0.99, 0.999, 0.9999, 0.99999, 1.0,
    ];
    rel.iter().map(|r| r * tau).collect()
}

/// `overall · (c_E E(t) + Σ_r w_r |x(t-ρ_r)> <β_r|)` on a `v_1` grid.
#[derive(Debug, Clone)]
pub struct DysonOperator {
    pub s: f64,
    pub t: f64,
    pub grid: VGrid,
    pub e: BandedKernel,
    pub c_e: C64,
    /// Ket vectors (already multiplied by quadrature weights and coefficients).
    pub kets: Vec<Vec<C64>>,
    /// Bra vectors (bilinear pairing, grid weight included in application).
    pub bras: Vec<Vec<C64>>,
}

impl DysonOperator {
    pub fn build(s: f64, t: f64, weights: &DysonWeights, res: DysonResolution) -> Result<Self> {
        if !(s > 0.0) || !(t > 0.0) {
            return Err(VpfpError::InvalidParameter {
                name: "s/t",
                value: s.min(t),
                reason: "Dyson operator needs s > 0 and t > 0",
            });
        }
        let grid = VGrid::for_mode(s, t, res.max_v_points)?;
        let e = BandedKernel::damped(&grid, s, t);
        let lam = -I / s;
        let n_tau = res.tau_points;
        // Scalar kernels Φ_n on the uniform τ-grid.
        let phi_s = ScalarSeries::sample(t, n_tau, |tau| phi(s, tau));
        let k_exp = weights.explicit.len();
        // Ψ_reg(τ) = Σ_{m≥2} c_m λ^m Φ_{m-1}(τ).
        let mut psi_reg = ScalarSeries::sample(t, n_tau, |_| C64::new(0.0, 0.0));
        let mut phi_pow = phi_s.clone(); // Φ_1
        let mut explicit_sum = psi_reg.clone(); // Σ_{m=2}^{K} λ^m Φ_{m-1}
        let mut lam_pow = lam * lam;
        for m in 2..=k_exp.max(1) {
            if m > k_exp {
                break;
            }
            let term = phi_pow.scaled(lam_pow);
            psi_reg = psi_reg.add(&term.scaled(C64::new(weights.explicit[m - 1], 0.0)));
            explicit_sum = explicit_sum.add(&term);
            phi_pow = phi_s.convolve(&phi_pow);
            lam_pow *= lam;
        }
        if weights.tail != 0.0 {
            // Z = Σ_{m≥2} λ^m Φ_{m-1} solves Z = λ² φ + λ φ * Z.
            let z = ScalarSeries::volterra(&phi_s, &phi_s.scaled(lam * lam), lam);
            let rest = z.add(&explicit_sum.scaled(C64::new(-1.0, 0.0)));
            psi_reg = psi_reg.add(&rest.scaled(C64::new(weights.tail, 0.0)));
        }
        let c1 = if k_exp >= 1 { weights.explicit[0] } else { weights.tail };

        let outer = composite_gauss_legendre(&graded_breaks(t), res.rho_nodes);
        let mut kets = Vec::with_capacity(outer.len());
        let mut bras = Vec::with_capacity(outer.len());
        for (&rho, &w) in outer.nodes.iter().zip(&outer.weights) {
            let mut ket = x_vector(&grid, s, t - rho);
            for z in ket.iter_mut() {
                *z *= w * weights.overall;
            }
            let mut bra: Vec<C64> = y_bra(&grid, s, rho).into_iter().map(|z| z * (lam * c1)).collect();
            let has_reg = psi_reg.values.iter().any(|z| z.norm() > 0.0);
            if has_reg && rho > 0.0 {
                let inner = composite_gauss_legendre(&graded_breaks(rho), res.rho_nodes);
                for (&rp, &wp) in inner.nodes.iter().zip(&inner.weights) {
                    let coef = psi_reg.at(rho - rp) * wp;
                    if coef.norm() == 0.0 {
                        continue;
                    }
                    let p = CoherentParams::new(s, rp);
                    for ((b, &v), &m) in bra.iter_mut().zip(&grid.v).zip(grid.sqrt_m()) {
                        *b += coef * C64::from_polar(p.amp * m, -p.kappa * v);
                    }
                }
            }
            kets.push(ket);
            bras.push(bra);
        }
        Ok(DysonOperator {
            s,
            t,
            e,
            c_e: C64::new(weights.c_e * weights.overall, 0.0),
            grid,
            kets,
            bras,
        })
    }

    /// Apply to grid samples of a 1-d function.
    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        self.e.apply(f, &mut out, self.c_e);
        for (ket, bra) in self.kets.iter().zip(&self.bras) {
            let c = self.grid.pair(bra, f);
            for (o, k) in out.iter_mut().zip(ket) {
                *o += k * c;
            }
        }
        out
    }

    /// Apply the adjoint (w.r.t. the discrete inner product).
    pub fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        self.e.apply_adjoint(f, &mut out, self.c_e);
        for (ket, bra) in self.kets.iter().zip(&self.bras) {
            let c = self.grid.inner(f, ket);
            for (o, b) in out.iter_mut().zip(bra) {
                *o += b.conj() * c;
            }
        }
        out
    }

    /// Matrix element `(Op g, f)` between grid functions.
    pub fn element(&self, f: &[C64], g: &[C64]) -> C64 {
        self.grid.inner(&self.apply(g), f)
    }

    /// Induced norm on the `√M ⊗ √M` transverse sector from `L^2` into
    /// `L^2` (`xi_weight = None`) or into `||.||_xi` (`Some(s)`), by power
    /// iteration on `Op^* W² Op`.
    pub fn sector_norm(&self, xi_weight: Option<f64>, iterations: usize) -> f64 {
        let m: Vec<C64> = self.grid.sqrt_m().iter().map(|&x| C64::new(x, 0.0)).collect();
        let w = xi_weight.map_or(1.0, |s| (1.0 + 1.0 / (s * s)).sqrt());
        // Output weighting W = I + (w-1)|√M><√M| (self-adjoint).
        let weight = |f: &[C64]| -> Vec<C64> {
            let c = self.grid.inner(f, &m) * (w - 1.0);
            f.iter().zip(&m).map(|(a, b)| a + b * c).collect()
        };
        let op = |f: &[C64]| weight(&self.apply(f));
        let op_adj = |f: &[C64]| self.apply_adjoint(&weight(f));
        // Start from the top singular vector of E(t): U_ω^* sqrt(M), plus a
        // generic perturbation.
        let p = CoherentParams::new(self.s, self.t);
        let mut f: Vec<C64> = self
            .grid
            .v
            .iter()
            .zip(self.grid.sqrt_m())
            .map(|(&v, &mm)| C64::from_polar(mm, p.omega * v) + C64::new(0.1 * mm * v, 0.05 * mm * v * v))
            .collect();
        let mut best: f64 = 0.0;
        for _ in 0..iterations {
            let nf = self.grid.norm(&f);
            if nf == 0.0 {
                break;
            }
            for z in f.iter_mut() {
                *z /= nf;
            }
            let g = op(&f);
            best = best.max(self.grid.norm(&g));
            f = op_adj(&g);
        }
        best
    }

    /// Full 3-d induced norm (`L^2 -> L^2` or `L^2 -> ||.||_xi`): the
    /// `√M ⊗ √M` transverse sector carries the finite-rank part, every other
    /// transverse sector only `c_E E(t)` damped by at least `e^{-t}`.
    pub fn norm(&self, xi_weight: Option<f64>, iterations: usize) -> f64 {
        let sector = self.sector_norm(xi_weight, iterations);
        let other = self.c_e.norm() * damped_norm(self.s, self.t) * (-self.t).exp();
        sector.max(other)
    }
}

/// Exact density matrix element `(e^{tB} sqrt(M), sqrt(M))` from the
/// renewal equation `u = ψ + (-i/s) φ * u`.
pub fn density_element(s: f64, t: f64, tau_points: usize) -> C64 {
    let phi_s = ScalarSeries::sample(t, tau_points, |tau| phi(s, tau));
    let psi_s = ScalarSeries::sample(t, tau_points, |tau| psi(s, tau));
    let u = ScalarSeries::volterra(&phi_s, &psi_s, -I / s);
    *u.values.last().unwrap()
}

/// Induced norm of `|ξ|^k e^{tA(ξ)}` measured on the Nyström grid.
pub fn damped_semigroup_norm(s: f64, t: f64, k: i32, res: DysonResolution) -> Result<f64> {
    let op = DysonOperator::build(
        s,
        t,
        &DysonWeights { c_e: 1.0, explicit: Vec::new(), tail: 0.0, overall: (-2.0 * t).exp() },
        res,
    )?;
    Ok(s.powi(k) * op.norm(None, 40))
}

/// Result of a small-time scaling probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub k: i32,
    pub t: Vec<f64>,
    /// `sup_s` of the probed norm at each `t`.
    pub sup_norm: Vec<f64>,
    /// Maximizing `s` at each `t`.
    pub argmax_s: Vec<f64>,
    /// Fitted `p` in `sup ~ t^{-p}`.
    pub exponent: f64,
    pub residual: f64,
}

/// Sup over candidate modes anchored at the maximizer `s* = sqrt(k/(2q))` of
/// `s^k e^{-q s²}` (`q ≈ t³/12` is the Kolmogorov phase-space spread), plus
/// a few moderate frequencies where the explicit Dyson terms peak.
pub fn sup_over_modes(
    t: f64,
    k: i32,
    s_min: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let q = 2.0 * variance_value(t) / (-(-2.0 * t).exp_m1());
    let mut grid: Vec<f64> = vec![1.0, 1.5, 2.0, 3.0];
    if k > 0 {
        let s_star = ((k as f64) / (2.0 * q)).sqrt();
        grid.extend([0.5, 0.7, 1.0, 1.4, 2.0].iter().map(|r| r * s_star));
    }
    grid.retain(|&s| s >= s_min);
    if grid.is_empty() {
        grid.push(s_min);
    }
    let mut best = (f64::NEG_INFINITY, s_min);
    for s in grid {
        let v = f(s)?;
        if v > best.0 {
            best = (v, s);
        }
    }
    Ok(best)
}

/// Fit `p` in `sup_{s ≥ s_min} |ξ|^k ||e^{tA(ξ)}|| ~ t^{-p}` over `t_grid`.
pub fn semigroup_scaling_probe(k: i32, t_grid: &[f64], s_min: f64, res: DysonResolution) -> Result<ScalingProbe> {
    use rayon::prelude::*;
    let sups = t_grid
        .par_iter()
        .map(|&t| sup_over_modes(t, k, s_min, |s| damped_semigroup_norm(s, t, k, res)))
        .collect::<Result<Vec<_>>>()?;
    let fit = crate::fit::fit_power(t_grid, &sups.iter().map(|x| x.0).collect::<Vec<_>>(), (0.0, f64::INFINITY))?;
    Ok(ScalingProbe {
        k,
        t: t_grid.to_vec(),
        sup_norm: sups.iter().map(|x| x.0).collect(),
        argmax_s: sups.iter().map(|x| x.1).collect(),
        exponent: -fit.slope,
        residual: fit.residual,
    })
}
