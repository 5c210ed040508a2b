//! Radial Fourier inversion by spherical Bessel transforms.
//!
//! With the symmetric convention `f̂(ξ) = (2π)^{-3/2} ∫ e^{-ix·ξ} f dx`, a
//! transform of the form `Y_ℓ(ξ/|ξ|) h(|ξ|)` inverts to
//! `i^ℓ Y_ℓ(x/|x|) H_ℓ(|x|)` with
//!
//! ```text
//! H_ℓ(r) = (2π)^{-3/2} 4π ∫_0^∞ h(ρ) j_ℓ(ρ r) ρ² dρ.
//! ```
//!
//! `ℓ = 0` is the familiar `(2π)^{-3/2} (4π/r) ∫ ρ sin(ρ r) h(ρ) dρ`.
//!
//! The integral is evaluated Filon-style: the smooth amplitude
//! `a(ρ) = ρ² h(ρ)` is sampled once on a [`ModeGrid`] (Gauss–Legendre nodes
//! per panel), interpolated by the panel polynomial, and the product with
//! the oscillatory `j_ℓ(ρ r)` is integrated on a fine rule.  Expensive mode
//! evaluations therefore stay at a few hundred while the oscillation at
//! large `r` is still resolved.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpfpError};
use crate::quadrature::gauss_legendre;
use crate::C64;

/// `(2π)^{-3/2} 4π`.
pub fn radial_prefactor() -> f64 {
    4.0 * std::f64::consts::PI / (2.0 * std::f64::consts::PI).powf(1.5)
}

/// Spherical Bessel function `j_ℓ(x)`.
pub fn spherical_bessel(l: usize, x: f64) -> f64 {
    let x = x.abs();
    if x < 1.5 || l > 3 {
        return spherical_bessel_all(l, x)[l];
    }
    let (s, c) = x.sin_cos();
    match l {
        0 => s / x,
        1 => s / (x * x) - c / x,
        2 => (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x),
        _ => (15.0 / (x * x * x) - 6.0 / x) * s / x - (15.0 / (x * x) - 1.0) * c / x,
    }
}

/// `j_0(x), …, j_{l_max}(x)`: power series for small `x`, upward recurrence
/// where it is stable (`ℓ < x`), Miller's downward recurrence otherwise.
pub fn spherical_bessel_all(l_max: usize, x: f64) -> Vec<f64> {
    let x = x.abs();
    let mut out = vec![0.0; l_max + 1];
    if x < 1.5 {
        let mut lead = 1.0;
        for (l, o) in out.iter_mut().enumerate() {
            if l > 0 {
                lead *= x / (2 * l + 1) as f64;
            }
            // Σ_k (-x²/2)^k / (k! (2ℓ+3)(2ℓ+5)…(2ℓ+2k+1)).
            let mut term = lead;
            let mut sum = term;
            for k in 1..40 {
                term *= -0.5 * x * x / (k as f64 * (2 * l + 2 * k + 1) as f64);
                sum += term;
                if term.abs() <= 1e-18 * sum.abs() {
                    break;
                }
            }
            *o = sum;
        }
        return out;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    if (l_max as f64) < x {
        out[0] = j0;
        if l_max >= 1 {
            out[1] = j1;
        }
        for l in 1..l_max {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return out;
    }
    let start = l_max + 16 + x as usize;
    let (mut hi, mut cur) = (0.0_f64, 1e-30_f64);
    let mut scale_seq = vec![0.0; l_max + 2];
    for l in (0..=start).rev() {
        if l <= l_max + 1 {
            scale_seq[l] = cur;
        }
        if l == 0 {
            break;
        }
        let next = (2 * l + 1) as f64 / x * cur - hi;
        hi = cur;
        cur = next;
        if cur.abs() > 1e250 {
            hi *= 1e-250;
            cur *= 1e-250;
            for v in scale_seq.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // Normalize against whichever of j_0, j_1 is better conditioned.
    let norm = if j0.abs() >= j1.abs() { j0 / scale_seq[0] } else { j1 / scale_seq[1] };
    for (o, v) in out.iter_mut().zip(&scale_seq) {
        *o = v * norm;
    }
    out
}

/// Radial quadrature grid in `|ξ|`: Gauss–Legendre nodes on panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub breaks: Vec<f64>,
    pub nodes_per_panel: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ModeGrid {
    /// Panels of width at most `max_width` on `[0, rho_max]`, with extra
    /// breakpoints at `R/4, R/2, R, 3R/2, 2R`; inside the cut-off
    /// transition `[R, 2R]` panels are at most `R/10` wide so the steep
    /// derivatives of the bump profile are resolved.
    pub fn new(rho_max: f64, max_width: f64, nodes_per_panel: usize, r_hat: f64) -> Result<Self> {
        if !(rho_max > 0.0) || !(max_width > 0.0) || nodes_per_panel < 2 {
            return Err(VpfpError::InvalidParameter {
                name: "mode grid",
                value: rho_max,
                reason: "needs rho_max > 0, panel width > 0 and at least 2 nodes per panel",
            });
        }
        let mut fixed: Vec<f64> = vec![0.0, rho_max];
        for f in [0.25, 0.5, 1.0, 1.5, 2.0] {
            if f * r_hat < rho_max {
                fixed.push(f * r_hat);
            }
        }
        fixed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fixed.dedup();
        let mut breaks = vec![0.0];
        for w in fixed.windows(2) {
            let in_transition = w[0] >= r_hat * (1.0 - 1e-12) && w[1] <= 2.0 * r_hat * (1.0 + 1e-12);
            let width = if in_transition { max_width.min(0.1 * r_hat) } else { max_width };
            let m = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
            for k in 1..=m {
                breaks.push(w[0] + (w[1] - w[0]) * k as f64 / m as f64);
            }
        }
        let base = gauss_legendre(nodes_per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let h = 0.5 * (w[1] - w[0]);
            let c = 0.5 * (w[1] + w[0]);
            for (x, wt) in base.nodes.iter().zip(&base.weights) {
                nodes.push(c + h * x);
                weights.push(h * wt);
            }
        }
        Ok(ModeGrid { breaks, nodes_per_panel, nodes, weights })
    }

    /// Gauss–Legendre panels on explicit breakpoints.
    pub fn from_breaks(breaks: Vec<f64>, nodes_per_panel: usize) -> Result<Self> {
        if breaks.len() < 2 || nodes_per_panel < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(VpfpError::InvalidParameter {
                name: "breaks",
                value: breaks.len() as f64,
                reason: "need at least two strictly increasing breakpoints and 2 nodes per panel",
            });
        }
        let base = gauss_legendre(nodes_per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let h = 0.5 * (w[1] - w[0]);
            let c = 0.5 * (w[1] + w[0]);
            for (x, wt) in base.nodes.iter().zip(&base.weights) {
                nodes.push(c + h * x);
                weights.push(h * wt);
            }
        }
        Ok(ModeGrid { breaks, nodes_per_panel, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn rho_max(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// Largest panel width.
    pub fn max_panel_width(&self) -> f64 {
        self.breaks.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Fine nodes per panel used for the oscillatory product.
const FINE_NODES: usize = 64;

/// Interpolation matrix from the panel's coarse Gauss–Legendre nodes to the
/// fine nodes (reference interval), with the fine weights.
struct PanelInterp {
    fine_nodes: Vec<f64>,
    fine_weights: Vec<f64>,
    /// `matrix[f][c]`: Lagrange basis `c` evaluated at fine node `f`.
    matrix: Vec<Vec<f64>>,
}

impl PanelInterp {
    fn new(coarse: usize) -> Self {
        let c = gauss_legendre(coarse);
        let f = gauss_legendre(FINE_NODES);
        let matrix = f
            .nodes
            .iter()
            .map(|&x| {
                (0..coarse)
                    .map(|k| {
                        (0..coarse)
                            .filter(|&m| m != k)
                            .map(|m| (x - c.nodes[m]) / (c.nodes[k] - c.nodes[m]))
                            .product()
                    })
                    .collect()
            })
            .collect();
        PanelInterp { fine_nodes: f.nodes, fine_weights: f.weights, matrix }
    }
}

/// Result of a radial inversion at one `|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialValue {
    pub x: f64,
    pub value: C64,
    /// Set when a panel spans more than a quarter period on the fine rule.
    pub aliasing: bool,
}

/// `H_ℓ(r)` for each `r` in `x_mags`, from samples `h` of `ĝ` on `grid.nodes`.
pub fn radial_transform(grid: &ModeGrid, h: &[C64], l: usize, x_mags: &[f64]) -> Result<Vec<RadialValue>> {
    if h.len() != grid.len() {
        return Err(VpfpError::ShapeMismatch { expected: grid.len(), got: h.len() });
    }
    let np = grid.nodes_per_panel;
    let interp = PanelInterp::new(np);
    // Interpolated amplitudes a = ρ² h on the fine nodes.
    let mut fine_rho = Vec::new();
    let mut fine_w = Vec::new();
    let mut fine_a = Vec::new();
    for (p, w) in grid.breaks.windows(2).enumerate() {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        let coarse: Vec<C64> = (0..np)
            .map(|k| {
                let i = p * np + k;
                h[i] * grid.nodes[i] * grid.nodes[i]
            })
            .collect();
        for (f, (&x, &wt)) in interp.fine_nodes.iter().zip(&interp.fine_weights).enumerate() {
            fine_rho.push(mid + half * x);
            fine_w.push(half * wt);
            fine_a.push(
                interp.matrix[f]
                    .iter()
                    .zip(&coarse)
                    .map(|(l, c)| c * *l)
                    .sum::<C64>(),
            );
        }
    }
    let pref = radial_prefactor();
    let spacing = grid.max_panel_width() / FINE_NODES as f64 * 2.0;
    Ok(x_mags
        .iter()
        .map(|&r| {
            let value: C64 = fine_rho
                .iter()
                .zip(&fine_w)
                .zip(&fine_a)
                .map(|((&rho, &w), a)| a * (w * spherical_bessel(l, rho * r)))
                .sum::<C64>()
                * pref;
            RadialValue { x: r, value, aliasing: spacing * r > std::f64::consts::FRAC_PI_4 }
        })
        .collect())
}

/// Scalar radial inversion (`ℓ = 0`): `g(x) = (2π)^{-3/2} (4π/|x|) ∫ ρ sin(ρ|x|) ĝ(ρ) dρ`.
pub fn radial_reconstruct(grid: &ModeGrid, g_hat: &[C64], x_mags: &[f64]) -> Result<Vec<RadialValue>> {
    radial_transform(grid, g_hat, 0, x_mags)
}

/// Dense spherical-Bessel transforms between two radial grids.
///
/// `matrices[ℓ][(i, j)]` maps samples `h_j` on the source nodes to
/// `(2π)^{-3/2} 4π ∫ h(ρ) j_ℓ(ρ r_i) ρ² dρ` at the targets, with the same
/// per-panel interpolation onto a fine rule as [`radial_transform`].  The
/// phase `i^ℓ` (inverse) or `(-i)^ℓ` (forward) is left to the caller.
#[derive(Debug, Clone)]
pub struct HankelMatrices {
    pub targets: Vec<f64>,
    pub matrices: Vec<nalgebra::DMatrix<f64>>,
}

impl HankelMatrices {
    pub fn build(source: &ModeGrid, targets: &[f64], l_max: usize) -> Self {
        let np = source.nodes_per_panel;
        let interp = PanelInterp::new(np);
        let pref = radial_prefactor();
        let mut mats = vec![nalgebra::DMatrix::<f64>::zeros(targets.len(), source.len()); l_max + 1];
        for (p, w) in source.breaks.windows(2).enumerate() {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            for (f, (&x, &wt)) in interp.fine_nodes.iter().zip(&interp.fine_weights).enumerate() {
                let rho = mid + half * x;
                let base = pref * half * wt * rho * rho;
                for (i, &r) in targets.iter().enumerate() {
                    let j = spherical_bessel_all(l_max, rho * r);
                    for (l, m) in mats.iter_mut().enumerate() {
                        let c = base * j[l];
                        for k in 0..np {
                            m[(i, p * np + k)] += c * interp.matrix[f][k];
                        }
                    }
                }
            }
        }
        HankelMatrices { targets: targets.to_vec(), matrices: mats }
    }
}
