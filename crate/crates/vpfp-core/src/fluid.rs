//! Closed-form eigen-system of the fluid block `B1(xi)`.
//!
//! On `span{sqrt(M), v_1 sqrt(M), v_2 sqrt(M), v_3 sqrt(M)}` with
//! `xi = s e_1` the fluid operator is
//!
//! ```text
//!        [ 0           -i s   0   0 ]
//! B1  =  [ -i(s+1/s)   -1     0   0 ]
//!        [ 0            0    -1   0 ]
//!        [ 0            0     0  -1 ]
//! ```
//!
//! whose acoustic pair solves `λ² + λ + s² + 1 = 0`, i.e.
//! `λ_{0,1} = -1/2 ∓ (i/2) sqrt(4s² + 3)`, with eigenvectors
//! `ψ_k = s a_k sqrt(M) + b_k v_1 sqrt(M)`, `a_k = -i b_k / λ_k`,
//! `b_k² = λ_k² / (λ_k² - s² - 1)`.  The transverse modes are
//! `ψ_j = v_j sqrt(M)` with `λ_j = -1`.  The family is biorthonormal for the
//! *bilinear* form `<f, g>_xi = Σ f_i g_i + f_0 g_0 / s²`, which gives the
//! spectral resolution `e^{t B1} = Σ_j e^{λ_j t} ψ_j <ψ_j, ·>_xi`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpfpError};
use crate::linalg::op_norm2;
use crate::{CMat, C64};

/// Guard for `|λ² - s² - 1|` in the `b_k` formula.
pub const BRANCH_GUARD: f64 = 1e-14;

/// The four eigenpairs of `B1(s e_1)`; vectors are coefficients on the
/// fluid indices `0..4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidEigenSystem {
    pub xi_mag: f64,
    pub lambdas: [C64; 4],
    pub a: [C64; 2],
    pub b: [C64; 2],
    /// Transverse directions `Y^2, Y^3` (fixed to `e_2, e_3`).
    pub transverse_dirs: [[f64; 3]; 2],
    pub vectors: [[C64; 4]; 4],
}

/// Acoustic eigenvalues `λ_0 = -1/2 - (i/2) sqrt(4s²+3)`, `λ_1 = conj(λ_0)`.
pub fn acoustic_eigenvalues(s: f64) -> [C64; 2] {
    let w = 0.5 * (4.0 * s * s + 3.0).sqrt();
    [C64::new(-0.5, -w), C64::new(-0.5, w)]
}

/// Closed-form eigen-system at `|xi| = s` (principal branch for `b_k`).
pub fn solve_fluid_eigensystem(s: f64) -> Result<FluidEigenSystem> {
    solve_with_signs(s, [1.0, 1.0])
}

fn solve_with_signs(s: f64, signs: [f64; 2]) -> Result<FluidEigenSystem> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(VpfpError::SingularMode { kind: "B1", xi_mag: s });
    }
    let lam = acoustic_eigenvalues(s);
    let mut a = [C64::new(0.0, 0.0); 2];
    let mut b = [C64::new(0.0, 0.0); 2];
    for k in 0..2 {
        let l2 = lam[k] * lam[k];
        let den = l2 - s * s - 1.0;
        if den.norm() < BRANCH_GUARD {
            return Err(VpfpError::DegenerateBranch { xi_mag: s, gap: den.norm() });
        }
        b[k] = (l2 / den).sqrt() * signs[k];
        a[k] = C64::new(0.0, -1.0) * b[k] / lam[k];
    }
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let vectors = [
        [a[0] * s, b[0], z, z],
        [a[1] * s, b[1], z, z],
        [z, z, one, z],
        [z, z, z, one],
    ];
    Ok(FluidEigenSystem {
        xi_mag: s,
        lambdas: [lam[0], lam[1], C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)],
        a,
        b,
        transverse_dirs: [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        vectors,
    })
}

/// Eigen-systems along an increasing grid with the sign of each `b_k`
/// chosen to continue the previous node (the principal branch is used at
/// the first node).
pub fn solve_fluid_branch_tracked(grid: &[f64]) -> Result<Vec<FluidEigenSystem>> {
    let mut out: Vec<FluidEigenSystem> = Vec::with_capacity(grid.len());
    for &s in grid {
        let mut sys = solve_fluid_eigensystem(s)?;
        if let Some(prev) = out.last() {
            let mut signs = [1.0, 1.0];
            for k in 0..2 {
                if (sys.b[k] - prev.b[k]).norm() > (sys.b[k] + prev.b[k]).norm() {
                    signs[k] = -1.0;
                }
            }
            if signs != [1.0, 1.0] {
                sys = solve_with_signs(s, signs)?;
            }
        }
        out.push(sys);
    }
    Ok(out)
}

impl FluidEigenSystem {
    /// Bilinear weighted pairing `<f, g>_xi = Σ f_i g_i + f_0 g_0 / s²`.
    pub fn pairing(&self, f: &[C64; 4], g: &[C64; 4]) -> C64 {
        let s2 = self.xi_mag * self.xi_mag;
        (0..4).map(|i| f[i] * g[i]).sum::<C64>() + f[0] * g[0] / s2
    }

    /// Gram matrix `<ψ_j, ψ_k>_xi` (identity for a biorthonormal system).
    pub fn gram(&self) -> CMat {
        CMat::from_fn(4, 4, |j, k| self.pairing(&self.vectors[j], &self.vectors[k]))
    }

    /// `B1 ψ_j - λ_j ψ_j` residual norms.
    pub fn residuals(&self) -> [f64; 4] {
        let b1 = fluid_matrix(self.xi_mag);
        let mut out = [0.0; 4];
        for (j, r) in out.iter_mut().enumerate() {
            let v = nalgebra::DVector::from_row_slice(&self.vectors[j]);
            *r = (&b1 * &v - v * self.lambdas[j]).norm();
        }
        out
    }

    /// Spectral-sum evaluation of `e^{t B1}` on the fluid block.
    pub fn semigroup(&self, t: f64) -> CMat {
        let s2 = self.xi_mag * self.xi_mag;
        let mut m = CMat::zeros(4, 4);
        for j in 0..4 {
            let e = (self.lambdas[j] * t).exp();
            let psi = &self.vectors[j];
            for r in 0..4 {
                for c in 0..4 {
                    let w = if c == 0 { 1.0 + 1.0 / s2 } else { 1.0 };
                    m[(r, c)] += e * psi[r] * psi[c] * w;
                }
            }
        }
        m
    }

    /// Induced `||.||_xi` norm of `e^{t B1}`.
    pub fn semigroup_norm_xi(&self, t: f64) -> f64 {
        let mut m = self.semigroup(t);
        let w = (1.0 + 1.0 / (self.xi_mag * self.xi_mag)).sqrt();
        for j in 0..4 {
            m[(0, j)] *= w;
        }
        for i in 0..4 {
            m[(i, 0)] /= w;
        }
        op_norm2(&m)
    }
}

/// Explicit 4x4 fluid matrix `B1(s e_1)`.
pub fn fluid_matrix(s: f64) -> CMat {
    let z = C64::new(0.0, 0.0);
    let mut m = CMat::from_element(4, 4, z);
    m[(0, 1)] = C64::new(0.0, -s);
    m[(1, 0)] = C64::new(0.0, -(s + 1.0 / s));
    m[(1, 1)] = C64::new(-1.0, 0.0);
    m[(2, 2)] = C64::new(-1.0, 0.0);
    m[(3, 3)] = C64::new(-1.0, 0.0);
    m
}

/// Dispersion curves as CSV rows `|xi|, Re λ_j, Im λ_j (j = 0..3)`.
pub fn dispersion_csv(grid: &[f64]) -> String {
    let mut out = String::from("xi,re_l0,im_l0,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3\n");
    for &s in grid {
        let l = acoustic_eigenvalues(s);
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s, l[0].re, l[0].im, l[1].re, l[1].im, -1.0, 0.0, -1.0, 0.0
        ));
    }
    out
}
