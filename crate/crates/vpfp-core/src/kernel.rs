//! Exact damped Fokker–Planck kernels.
//!
//! `G_0` is the transition density of the kinetic Ornstein–Uhlenbeck
//! process `dX = V dt, dV = -V dt + sqrt(2) dW`; with `a = e^{-t}`,
//! `c = (1-a)/(1+a)` and the variance function
//!
//! ```text
//! D(t) = ( t (1 - e^{-2t}) - 2 (1 - e^{-t})^2 ) / 2
//! ```
//!
//! it is a Gaussian whose velocity marginal is `N(u a, 1-a^2)` and whose
//! position, conditioned on the endpoint velocity, has mean
//! `y + (v+u) c` and variance `4D/(1-a^2)` per axis.
//! `G_1 = e^{-2t} M(v)^{-1/2} G_0 M(u)^{1/2}` is the kernel of `e^{tA}` and
//! `Ĝ_1` its Fourier transform in `x - y` (the kernel of `e^{tA(xi)}` on
//! velocity functions).
//!
//! Prefactors are mass normalized: `∫∫ G_0 dx dv = 1`.  The normalization
//! factor of `G_0` is verified by quadrature once per process
//! ([`normalization`]); the Fourier kernel uses the prefactor
//! `(2π(1-a^2))^{-3/2}` forced by the same unit-mass condition.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Result, VpfpError};
use crate::quadrature::{composite_gauss_legendre, gauss_hermite_prob, Rule};
use crate::{CMat, C64};

/// Below this time `D(t)` is evaluated from its Taylor series.
pub const SERIES_THRESHOLD: f64 = 2e-2;

/// Taylor coefficients of `D(t)` from `t^4` to `t^10`.
const D_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 12.0,
    17.0 / 360.0,
    -7.0 / 360.0,
    43.0 / 6720.0,
    -107.0 / 60480.0,
    769.0 / 1814400.0,
];

/// `D(t)` together with its argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceFunction {
    pub t: f64,
    pub value: f64,
}

/// Evaluate the variance function `D(t)` for `t > 0`.
pub fn variance(t: f64) -> Result<VarianceFunction> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(VpfpError::InvalidParameter {
            name: "t",
            value: t,
            reason: "variance function needs finite t > 0",
        });
    }
    Ok(VarianceFunction { t, value: variance_value(t) })
}

/// `D(t)` without argument checking (`t > 0` assumed).
pub fn variance_value(t: f64) -> f64 {
    if t < SERIES_THRESHOLD {
        let mut acc = 0.0;
        for c in D_SERIES.iter().rev() {
            acc = acc * t + c;
        }
        acc * t.powi(4)
    } else {
        let em1 = -(-t).exp_m1(); // 1 - e^{-t}
        let em2 = -(-2.0 * t).exp_m1(); // 1 - e^{-2t}
        0.5 * (t * em2 - 2.0 * em1 * em1)
    }
}

/// Time-dependent constants shared by all kernel evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub t: f64,
    /// `e^{-t}`.
    pub a: f64,
    /// `1 - e^{-2t}`.
    pub one_m_a2: f64,
    /// `(1-a)/(1+a)`.
    pub c: f64,
    pub d: f64,
}

impl KernelParams {
    pub fn new(t: f64) -> Result<Self> {
        let d = variance(t)?.value;
        let a = (-t).exp();
        let one_m_a2 = -(-2.0 * t).exp_m1();
        let c = (0.5 * t).tanh();
        Ok(KernelParams { t, a, one_m_a2, c, d })
    }

    /// Conditional positional variance per axis, `4D/(1-a^2)`.
    pub fn sigma_x2(&self) -> f64 {
        4.0 * self.d / self.one_m_a2
    }

    /// Spatial damping exponent of `Ĝ_1`: `2D/(1-a^2)`.
    pub fn q(&self) -> f64 {
        2.0 * self.d / self.one_m_a2
    }

    /// Mean of the `u`-Gaussian of `G_1` at fixed `v`: `2a/(1+a^2) v`.
    pub fn mu_u_factor(&self) -> f64 {
        2.0 * self.a / (1.0 + self.a * self.a)
    }

    /// Variance of the `u`-Gaussian of `G_1` at fixed `v`.
    pub fn sigma_u2(&self) -> f64 {
        2.0 * self.one_m_a2 / (1.0 + self.a * self.a)
    }

    /// Coefficient of `|v|^2` in the residual `v`-Gaussian of `G_1`.
    pub fn v_decay(&self) -> f64 {
        self.one_m_a2 / (4.0 * (1.0 + self.a * self.a))
    }
}

fn norm2(x: [f64; 3]) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
}

/// Kernel normalization bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelNormalization {
    /// `∫∫ G_0 dx dv` measured by quadrature with the analytic prefactor
    /// (divided out of every evaluation).
    pub g0_mass: f64,
    /// Ratio of the printed Fourier-kernel prefactor
    /// `(2π)^{-3} (4/(1-a^2))^{3/2}` to the mass-normalized one; this factor
    /// is `8 (2π)^{-3/2}` for every `t`.
    pub fourier_prefactor_ratio: f64,
}

/// Process-wide normalization, computed on first use.
pub fn normalization() -> KernelNormalization {
    static CELL: OnceLock<KernelNormalization> = OnceLock::new();
    *CELL.get_or_init(|| KernelNormalization {
        g0_mass: g0_mass_by_quadrature(0.5, [0.3, -0.2, 0.1], [0.4, 0.0, -0.7]),
        fourier_prefactor_ratio: 8.0 / (2.0 * PI).powf(1.5),
    })
}

/// Raw analytic `G_0` (prefactor `(2π)^{-3} (4D)^{-3/2}`).
fn g0_raw(p: &KernelParams, x: [f64; 3], v: [f64; 3], y: [f64; 3], u: [f64; 3]) -> f64 {
    let mut zx = [0.0; 3];
    let mut zv = [0.0; 3];
    for k in 0..3 {
        zx[k] = x[k] - y[k] - (v[k] + u[k]) * p.c;
        zv[k] = v[k] - u[k] * p.a;
    }
    let pref = (2.0 * PI).powi(-3) * (4.0 * p.d).powf(-1.5);
    pref * (-norm2(zx) / (2.0 * p.sigma_x2()) - norm2(zv) / (2.0 * p.one_m_a2)).exp()
}

/// `∫∫ G_0(t, x, v; y, u) dx dv` by brute-force quadrature of the analytic
/// density (an independent check of its prefactor).
///
/// The density factorizes over the three axes, so the 6-d integral is the
/// product of three 2-d integrals; each is done with composite
/// Gauss–Legendre on a box of ±9 standard deviations.
pub fn g0_mass_by_quadrature(t: f64, y: [f64; 3], u: [f64; 3]) -> f64 {
    let p = KernelParams::new(t).expect("positive time");
    let sv = p.one_m_a2.sqrt();
    let sx = p.sigma_x2().sqrt();
    let rule = composite_gauss_legendre(&crate::quadrature::lin_grid(-9.0, 9.0, 7), 16);
    let pref = (2.0 * PI).powf(-1.0) * (4.0 * p.d).powf(-0.5);
    let mut total = 1.0;
    for k in 0..3 {
        let mut acc = 0.0;
        for (zv, wv) in rule.nodes.iter().zip(&rule.weights) {
            let vk = u[k] * p.a + zv * sv;
            for (zx, wx) in rule.nodes.iter().zip(&rule.weights) {
                let xk = y[k] + (vk + u[k]) * p.c + zx * sx;
                let dx = xk - y[k] - (vk + u[k]) * p.c;
                let dv = vk - u[k] * p.a;
                let dens = pref * (-dx * dx / (2.0 * p.sigma_x2()) - dv * dv / (2.0 * p.one_m_a2)).exp();
                acc += wv * wx * sv * sx * dens;
            }
        }
        total *= acc;
    }
    total
}

/// Result of a pointwise kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub t: f64,
    pub value: f64,
    /// True when the exponent underflowed and the value was clamped to 0.
    pub underflow: bool,
}

/// Mass-normalized `G_0(t, x, v; y, u)`.
pub fn eval_g0(t: f64, x: [f64; 3], v: [f64; 3], y: [f64; 3], u: [f64; 3]) -> Result<f64> {
    let p = KernelParams::new(t)?;
    Ok(g0_raw(&p, x, v, y, u) / normalization().g0_mass)
}

/// `G_1(t, x, v; y, u) = e^{-2t} M(v)^{-1/2} G_0 M(u)^{1/2}`.
pub fn eval_g1(t: f64, x: [f64; 3], v: [f64; 3], y: [f64; 3], u: [f64; 3]) -> Result<KernelEval> {
    let p = KernelParams::new(t)?;
    let g0 = g0_raw(&p, x, v, y, u) / normalization().g0_mass;
    let value = g0 * (-2.0 * t + 0.25 * norm2(v) - 0.25 * norm2(u)).exp();
    let underflow = value == 0.0 || !value.is_finite();
    Ok(KernelEval {
        t,
        value: if value.is_finite() { value } else { 0.0 },
        underflow,
    })
}

/// `∇_v G_1(t, x, v; y, u)`.
pub fn eval_g1_grad_v(t: f64, x: [f64; 3], v: [f64; 3], y: [f64; 3], u: [f64; 3]) -> Result<[f64; 3]> {
    let p = KernelParams::new(t)?;
    let g = eval_g1(t, x, v, y, u)?.value;
    let mut out = [0.0; 3];
    let kv = p.one_m_a2 / (2.0 * (1.0 + p.a * p.a));
    let kx = (1.0 - p.a).powi(2) / (4.0 * p.d);
    let ku = p.a / p.one_m_a2;
    for k in 0..3 {
        let zx = x[k] - y[k] - (v[k] + u[k]) * p.c;
        let zu = v[k] * p.mu_u_factor() - u[k];
        out[k] = (-kv * v[k] + kx * zx - ku * zu) * g;
    }
    Ok(out)
}

/// `Ĝ_1(t, xi, v; u)`, the kernel of `e^{tA(xi)}`.
pub fn eval_g1_hat(t: f64, xi: [f64; 3], v: [f64; 3], u: [f64; 3]) -> Result<C64> {
    let p = KernelParams::new(t)?;
    let mut vu = [0.0; 3];
    let mut phase = 0.0;
    for k in 0..3 {
        vu[k] = v[k] * p.mu_u_factor() - u[k];
        phase += xi[k] * (v[k] + u[k]);
    }
    let pref = (2.0 * PI * p.one_m_a2).powf(-1.5);
    let re_exp = -p.q() * norm2(xi)
        - (1.0 + p.a * p.a) / (4.0 * p.one_m_a2) * norm2(vu)
        - p.v_decay() * norm2(v)
        - 2.0 * t;
    Ok(C64::from_polar(pref * re_exp.exp(), -phase * p.c))
}

/// Short-time (Kolmogorov) limit form of `G_1`, with its normalizing constant.
pub fn kolmogorov_limit(t: f64, x: [f64; 3], v: [f64; 3], y: [f64; 3], u: [f64; 3]) -> f64 {
    let mut zx = [0.0; 3];
    let mut zv = [0.0; 3];
    for k in 0..3 {
        zx[k] = x[k] - y[k] - (v[k] + u[k]) * t / 2.0;
        zv[k] = v[k] - u[k];
    }
    let pref = 3f64.powf(1.5) / (8.0 * PI.powi(3));
    pref * (-2.0 * t).exp() * t.powi(-6) * (-3.0 * norm2(zx) / t.powi(3) - norm2(zv) / (4.0 * t)).exp()
}

/// Long-time (heat-kernel) limit form of `G_1`, up to a constant factor.
pub fn heat_limit_shape(t: f64, x: [f64; 3], v: [f64; 3], y: [f64; 3], u: [f64; 3]) -> f64 {
    let mut z = [0.0; 3];
    for k in 0..3 {
        z[k] = x[k] - y[k] - (v[k] + u[k]);
    }
    (-2.0 * t).exp() * t.powf(-1.5) * (-norm2(z) / (4.0 * t) - (norm2(v) + norm2(u)) / 4.0).exp()
}

/// Schur-test quantity `∫ |∇_v Ĝ_1(t, xi, v; u)| du` by Gauss–Hermite
/// quadrature in the natural `u`-coordinates.
pub fn grad_v_kernel_l1(t: f64, xi: [f64; 3], v: [f64; 3], nodes: usize) -> Result<f64> {
    let p = KernelParams::new(t)?;
    let rule = gauss_hermite_prob(nodes);
    let su = p.sigma_u2().sqrt();
    let kv = p.one_m_a2 / (2.0 * (1.0 + p.a * p.a));
    let ku = p.a / p.one_m_a2;
    // |Ĝ_1| = weight * N(u; mu, sigma_u^2).
    let weight = (-2.0 * t - p.q() * norm2(xi) - p.v_decay() * norm2(v)).exp()
        * (2.0 / (1.0 + p.a * p.a)).powf(1.5);
    let mut acc = 0.0;
    for (w0, q0) in rule.nodes.iter().zip(&rule.weights) {
        for (w1, q1) in rule.nodes.iter().zip(&rule.weights) {
            for (w2, q2) in rule.nodes.iter().zip(&rule.weights) {
                let w = [*w0, *w1, *w2];
                let mut s2 = 0.0;
                for k in 0..3 {
                    // score = -i xi c - kv v + ku (u - mu), u - mu = su w.
                    let re = -kv * v[k] + ku * su * w[k];
                    let im = -xi[k] * p.c;
                    s2 += re * re + im * im;
                }
                acc += q0 * q1 * q2 * s2.sqrt();
            }
        }
    }
    Ok(weight * acc)
}

/// 1-d factor of the Hermite matrix of `Ĝ_1` for `xi = s e_1`, without
/// the `e^{-2t}` damping but including `e^{-2D s^2/(1-a^2)}`:
///
/// `K[m,n] = E_{u,w}[He_m(a u + σ w) He_n(u) e^{-i s c (a u + σ w + u)}] / sqrt(m! n!)`
/// with `u, w ~ N(0,1)` independent and `σ = sqrt(1-a^2)`.
pub fn hermite_matrix_1d(t: f64, s: f64, nmax: usize, nodes: usize) -> Result<CMat> {
    let p = KernelParams::new(t)?;
    let rule = gauss_hermite_prob(nodes);
    let sig = p.one_m_a2.sqrt();
    let mut k = CMat::zeros(nmax + 1, nmax + 1);
    let hu: Vec<Vec<f64>> = rule.nodes.iter().map(|&u| normalized_he(nmax, u)).collect();
    for (iu, &u) in rule.nodes.iter().enumerate() {
        for (&w, &ww) in rule.nodes.iter().zip(&rule.weights) {
            let v = p.a * u + sig * w;
            let hv = normalized_he(nmax, v);
            let wt = rule.weights[iu] * ww;
            let ph = C64::from_polar(wt, -s * p.c * (v + u));
            for m in 0..=nmax {
                let hm = ph * hv[m];
                for n in 0..=nmax {
                    k[(m, n)] += hm * hu[iu][n];
                }
            }
        }
    }
    let damp = (-p.q() * s * s).exp();
    Ok(k * C64::new(damp, 0.0))
}

/// `He_n(x) / sqrt(n!)` for `n = 0..=nmax` (stable recurrence).
pub fn normalized_he(nmax: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(nmax + 1);
    h.push(1.0);
    if nmax >= 1 {
        h.push(x);
    }
    for n in 1..nmax {
        let next = (x * h[n] - (n as f64).sqrt() * h[n - 1]) / ((n + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// Hermite-basis matrix of `Ĝ_1(t, s e_1)` on the full basis.
///
/// The 3-d kernel factorizes over axes; the transverse axes see `xi = 0`,
/// where the factor is the Mehler kernel, diagonal with entries `e^{-n t}`.
pub fn hermite_matrix_of_g1_hat(t: f64, xi_mag: f64, basis: &BasisSpec, nodes: usize) -> Result<CMat> {
    let n = basis.max_degree();
    let k1 = hermite_matrix_1d(t, xi_mag, n, nodes)?;
    let dim = basis.dimension();
    let mut out = CMat::zeros(dim, dim);
    let e2t = (-2.0 * t).exp();
    for chain in basis.e1_chains() {
        let tr = (-(chain.transverse_degree() as f64) * t).exp() * e2t;
        for (i, &gi) in chain.members.iter().enumerate() {
            for (j, &gj) in chain.members.iter().enumerate() {
                out[(gi, gj)] = k1[(i, j)] * tr;
            }
        }
    }
    Ok(out)
}

/// Spatially radial × velocity-separable source `g_0(y, u) = A(|y|) B(u)`.
pub struct SeparableSource<'a> {
    pub spatial: &'a (dyn Fn(f64) -> f64 + Sync),
    pub velocity: &'a (dyn Fn([f64; 3]) -> f64 + Sync),
}

/// Quadrature sizes for [`convolve_g1`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionQuadrature {
    /// Gauss–Hermite nodes per velocity axis.
    pub velocity_nodes: usize,
    /// Gauss–Legendre nodes per radial panel for the spatial smoothing.
    pub radial_nodes: usize,
}

impl Default for ConvolutionQuadrature {
    fn default() -> Self {
        ConvolutionQuadrature { velocity_nodes: 24, radial_nodes: 24 }
    }
}

/// Value and velocity gradient of `G_1(t) * g_0` at `(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionValue {
    pub value: f64,
    pub grad_v: [f64; 3],
}

/// Gaussian smoothing of a radial function:
/// `E_z[A(|w - σ z|)]` with `z ~ N(0, I_3)`, as a function of `r = |w|`.
fn radial_gauss_smooth(a: &(dyn Fn(f64) -> f64 + Sync), sigma: f64, r: f64, n: usize) -> f64 {
    if sigma < 1e-12 {
        return a(r);
    }
    let lo = (r - 10.0 * sigma).max(0.0);
    let hi = r + 10.0 * sigma;
    let panels = ((hi - lo) / sigma).ceil().clamp(1.0, 40.0) as usize;
    let rule = composite_gauss_legendre(&crate::quadrature::lin_grid(lo, hi, panels + 1), n);
    let s2 = 2.0 * sigma * sigma;
    if r < 1e-9 * sigma.max(1.0) {
        // Limit r -> 0: 3-d Gaussian average over shells.
        let c = (2.0 / PI).sqrt() / sigma.powi(3);
        return rule.integrate(|rho| c * rho * rho * a(rho) * (-rho * rho / s2).exp());
    }
    let c = 1.0 / (sigma * (2.0 * PI).sqrt() * r);
    rule.integrate(|rho| c * rho * a(rho) * ((-(r - rho).powi(2) / s2).exp() - (-(r + rho).powi(2) / s2).exp()))
}

/// Physical-space convolution `(G_1(t) * g_0)(x, v)` at `x = r e_1` for
/// each `r` in `x_radii` and each velocity in `v_points`.
///
/// In the shifted variables `u = μ_u(v) + σ_u w`, `y = x - (v+u)c - σ_x z`
/// the kernel is a product of standard Gaussians times
/// `e^{-2t} (2/(1+a^2))^{3/2} e^{-κ|v|^2}`; the `z`-average of the radial
/// spatial factor is done in closed radial form, the `w`-average by tensor
/// Gauss–Hermite quadrature.  The velocity gradient uses the exact score
/// of the Gaussian (Stein's identity for the `z` part).
pub fn convolve_g1(
    t: f64,
    source: &SeparableSource<'_>,
    x_radii: &[f64],
    v_points: &[[f64; 3]],
    quad: ConvolutionQuadrature,
) -> Result<Vec<Vec<ConvolutionValue>>> {
    use rayon::prelude::*;
    let p = KernelParams::new(t)?;
    let rule = gauss_hermite_prob(quad.velocity_nodes);
    let su = p.sigma_u2().sqrt();
    let sx = p.sigma_x2().sqrt();
    let kv = p.one_m_a2 / (2.0 * (1.0 + p.a * p.a));
    let ku = p.a / p.one_m_a2;
    let kx = (1.0 - p.a).powi(2) / (4.0 * p.d);
    let h = 1e-5 * (1.0 + sx);
    let out = x_radii
        .par_iter()
        .map(|&r| {
            v_points
                .iter()
                .map(|&v| {
                    let pref = (-2.0 * t - p.v_decay() * norm2(v)).exp()
                        * (2.0 / (1.0 + p.a * p.a)).powf(1.5);
                    let mut val = 0.0;
                    let mut grad = [0.0; 3];
                    for (w0, q0) in rule.nodes.iter().zip(&rule.weights) {
                        for (w1, q1) in rule.nodes.iter().zip(&rule.weights) {
                            for (w2, q2) in rule.nodes.iter().zip(&rule.weights) {
                                let w = [*w0, *w1, *w2];
                                let q = q0 * q1 * q2;
                                let mut u = [0.0; 3];
                                let mut centre = [0.0; 3];
                                for k in 0..3 {
                                    u[k] = p.mu_u_factor() * v[k] + su * w[k];
                                    centre[k] = -(v[k] + u[k]) * p.c;
                                }
                                centre[0] += r;
                                let b = (source.velocity)(u);
                                if b == 0.0 {
                                    continue;
                                }
                                let rc = norm2(centre).sqrt();
                                let sm = |rr: f64| radial_gauss_smooth(source.spatial, sx, rr, quad.radial_nodes);
                                let a0 = sm(rc);
                                val += q * b * a0;
                                // Stein: E[z A(c - σ z)] = -σ ∇_c E[A(c - σ z)].
                                let da = (sm(rc + h) - sm((rc - h).max(0.0))) / (rc + h - (rc - h).max(0.0));
                                for k in 0..3 {
                                    let dir = if rc > 0.0 { centre[k] / rc } else { 0.0 };
                                    let ez = -sx * da * dir;
                                    grad[k] += q * b * ((-kv * v[k] + ku * su * w[k]) * a0 + kx * sx * ez);
                                }
                            }
                        }
                    }
                    ConvolutionValue {
                        value: pref * val,
                        grad_v: [pref * grad[0], pref * grad[1], pref * grad[2]],
                    }
                })
                .collect()
        })
        .collect();
    Ok(out)
}

/// Convenience rule re-export for tests that need the same velocity nodes.
pub fn velocity_rule(nodes: usize) -> Rule {
    gauss_hermite_prob(nodes)
}
