//! Truncated tensor-Hermite representation of velocity space.
//!
//! The basis functions are
//!
//! ```text
//! phi_alpha(v) = prod_k He_{alpha_k}(v_k) sqrt(M_1(v_k)) / sqrt(alpha_k!)
//! ```
//!
//! with `He_n` the probabilists' Hermite polynomials and `M_1` the 1-d
//! standard Gaussian, so the family is orthonormal in plain `L^2(dv)` and
//! `phi_0 = sqrt(M)`.  In this basis the linearized Fokker–Planck operator
//! `L` is diagonal (`L phi_alpha = -|alpha| phi_alpha`), multiplication by
//! `v_k` and differentiation `d/dv_k` are two-term ladders in `alpha_k`.
//!
//! Multi-indices are enumerated in *graded lexicographic* order: total
//! degree ascending, and within one degree lexicographically descending.
//! Index 0 is `sqrt(M)`, indices 1..=3 are `v_1 sqrt(M)`, `v_2 sqrt(M)`,
//! `v_3 sqrt(M)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VpfpError};
use crate::{CMat, CVec, C64};

/// A velocity multi-index `(alpha_1, alpha_2, alpha_3)`.
pub type MultiIndex = [usize; 3];

/// Description of a truncated Hermite basis of total degree `<= max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    max_degree: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

/// One invariant chain of the basis under operators built from `L` and
/// `v_1`: all multi-indices sharing `(alpha_2, alpha_3)`.
///
/// `members[a1]` is the global basis index of `(a1, alpha_2, alpha_3)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainBlock {
    pub alpha2: usize,
    pub alpha3: usize,
    pub members: Vec<usize>,
}

impl ChainBlock {
    /// Sum `alpha_2 + alpha_3` (the transverse degree shared by the chain).
    pub fn transverse_degree(&self) -> usize {
        self.alpha2 + self.alpha3
    }

    /// Number of basis functions in the chain.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// True when the chain has no members (never produced by [`BasisSpec`]).
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Serializable manifest emitted next to every data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisManifest {
    pub max_degree: usize,
    pub dimension: usize,
    pub ordering: String,
    pub indices: Vec<MultiIndex>,
}

/// Number of multi-indices of total degree at most `n` in three variables.
pub fn binomial_dimension(n: usize) -> usize {
    (n + 1) * (n + 2) * (n + 3) / 6
}

impl BasisSpec {
    /// Enumerate all multi-indices of total degree `<= max_degree`.
    ///
    /// Rejects `max_degree < 2`: the microscopic block `P_3` would be empty
    /// and the fluid/kinetic splitting degenerate.
    pub fn build(max_degree: usize) -> Result<Self> {
        if max_degree < 2 {
            return Err(VpfpError::BasisTooSmall(max_degree));
        }
        Ok(Self::build_unchecked(max_degree))
    }

    /// Same enumeration without the lower bound (used internally for the
    /// one-degree extension needed by exact ladder norms).
    pub(crate) fn build_unchecked(max_degree: usize) -> Self {
        let mut indices = Vec::with_capacity(binomial_dimension(max_degree));
        for n in 0..=max_degree {
            for a1 in (0..=n).rev() {
                for a2 in (0..=(n - a1)).rev() {
                    indices.push([a1, a2, n - a1 - a2]);
                }
            }
        }
        let lookup = indices.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        BasisSpec {
            max_degree,
            indices,
            lookup,
        }
    }

    /// Total degree cutoff `N`.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of basis functions, `C(N+3, 3)`.
    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    /// Multi-index of basis function `i`.
    pub fn multi_index(&self, i: usize) -> MultiIndex {
        self.indices[i]
    }

    /// All multi-indices in basis order.
    pub fn multi_indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Basis position of a multi-index, if it is inside the truncation.
    pub fn index_of(&self, alpha: MultiIndex) -> Option<usize> {
        self.lookup.get(&alpha).copied()
    }

    /// Total degree `|alpha|` of basis function `i`.
    pub fn degree(&self, i: usize) -> usize {
        let a = self.indices[i];
        a[0] + a[1] + a[2]
    }

    /// Decomposition into chains of fixed `(alpha_2, alpha_3)`.
    ///
    /// Every operator assembled from `L`, `v_1` and `P_0` (i.e. every mode
    /// operator with `xi` along `e_1`) is block diagonal in this partition.
    /// Chains are returned with `(0,0)` first, followed by increasing
    /// transverse degree.
    pub fn e1_chains(&self) -> Vec<ChainBlock> {
        let n = self.max_degree;
        let mut out = Vec::new();
        for p in 0..=n {
            for a2 in (0..=p).rev() {
                let a3 = p - a2;
                let members = (0..=(n - p))
                    .map(|a1| self.lookup[&[a1, a2, a3]])
                    .collect();
                out.push(ChainBlock {
                    alpha2: a2,
                    alpha3: a3,
                    members,
                });
            }
        }
        out
    }

    /// JSON-serializable manifest (`max_degree`, `dimension`, index table).
    pub fn manifest(&self) -> BasisManifest {
        BasisManifest {
            max_degree: self.max_degree,
            dimension: self.dimension(),
            ordering: "graded-lexicographic (degree ascending, lex descending within degree)".into(),
            indices: self.indices.clone(),
        }
    }

    /// SHA-256 of the canonical manifest JSON, hex encoded.
    pub fn manifest_hash(&self) -> String {
        let json = serde_json::to_string(&self.manifest()).expect("manifest serializes");
        hex_digest(json.as_bytes())
    }
}

/// Lower-case hex SHA-256 digest of `bytes`.
pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Coordinate projections of the macro–micro decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Projection {
    /// Density: span of `sqrt(M)`.
    P0,
    /// Momentum: span of `v_k sqrt(M)`.
    Pm,
    /// Complement of `P0`.
    P1,
    /// Fluid part `P0 + Pm`.
    P2,
    /// Microscopic part, complement of `P2`.
    P3,
}

impl Projection {
    /// Whether basis index `i` lies in the range of the projection.
    ///
    /// Relies on the graded ordering: indices 0..=3 span the fluid block.
    pub fn contains(self, i: usize) -> bool {
        match self {
            Projection::P0 => i == 0,
            Projection::Pm => (1..=3).contains(&i),
            Projection::P1 => i != 0,
            Projection::P2 => i <= 3,
            Projection::P3 => i > 3,
        }
    }

    /// Every projection, in declaration order.
    pub const ALL: [Projection; 5] = [
        Projection::P0,
        Projection::Pm,
        Projection::P1,
        Projection::P2,
        Projection::P3,
    ];
}

/// Coefficient vector of a velocity function in a [`BasisSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityVector {
    pub coeffs: CVec,
}

impl VelocityVector {
    /// Zero function.
    pub fn zeros(basis: &BasisSpec) -> Self {
        VelocityVector {
            coeffs: CVec::zeros(basis.dimension()),
        }
    }

    /// The `i`-th basis function.
    pub fn unit(basis: &BasisSpec, i: usize) -> Self {
        let mut v = Self::zeros(basis);
        v.coeffs[i] = C64::new(1.0, 0.0);
        v
    }

    /// Wrap a coefficient vector after checking its length.
    pub fn from_coeffs(basis: &BasisSpec, coeffs: CVec) -> Result<Self> {
        check_len(basis, coeffs.len())?;
        Ok(VelocityVector { coeffs })
    }

    /// `L^2_v` norm (the basis is orthonormal).
    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// True when every coefficient is finite.
    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

fn check_len(basis: &BasisSpec, got: usize) -> Result<()> {
    if got != basis.dimension() {
        return Err(VpfpError::ShapeMismatch {
            expected: basis.dimension(),
            got,
        });
    }
    Ok(())
}

/// Apply the Fokker–Planck operator: coefficient of degree `n` times `-n`.
pub fn apply_l(basis: &BasisSpec, f: &VelocityVector) -> Result<VelocityVector> {
    check_len(basis, f.coeffs.len())?;
    let mut out = f.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        *c *= -(basis.degree(i) as f64);
    }
    Ok(out)
}

/// Zero every coefficient outside the range of `which`.
pub fn project(basis: &BasisSpec, f: &VelocityVector, which: Projection) -> Result<VelocityVector> {
    check_len(basis, f.coeffs.len())?;
    let mut out = f.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        if !which.contains(i) {
            *c = C64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// Weighted inner product `(f,g) + |xi|^{-2} (P0 f, P0 g)`, conjugate-linear in `g`.
pub fn weighted_inner(f: &VelocityVector, g: &VelocityVector, xi_mag: f64) -> Result<C64> {
    if !(xi_mag > 0.0) {
        return Err(VpfpError::InvalidParameter {
            name: "xi_mag",
            value: xi_mag,
            reason: "weighted inner product needs |xi| > 0",
        });
    }
    if f.coeffs.len() != g.coeffs.len() {
        return Err(VpfpError::ShapeMismatch {
            expected: f.coeffs.len(),
            got: g.coeffs.len(),
        });
    }
    let plain: C64 = f
        .coeffs
        .iter()
        .zip(g.coeffs.iter())
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(plain + f.coeffs[0] * g.coeffs[0].conj() / (xi_mag * xi_mag))
}

/// Weighted norm `||f||_xi` for a raw coefficient slice.
pub fn xi_norm(coeffs: &CVec, xi_mag: f64) -> f64 {
    (coeffs.norm_squared() + coeffs[0].norm_sqr() / (xi_mag * xi_mag)).sqrt()
}

/// Dissipation norm `sqrt(||grad_v f||^2 + ||<v> f||^2)`.
///
/// Evaluated exactly: the ladder images of degree-`N` coefficients land in
/// degree `N+1`, which is kept in a one-degree extended basis rather than
/// truncated.
pub fn sigma_norm(basis: &BasisSpec, f: &VelocityVector) -> Result<f64> {
    check_len(basis, f.coeffs.len())?;
    let ext = BasisSpec::build_unchecked(basis.max_degree() + 1);
    let mut total = f.coeffs.norm_squared();
    for k in 0..3 {
        let mut vf = vec![C64::new(0.0, 0.0); ext.dimension()];
        let mut df = vec![C64::new(0.0, 0.0); ext.dimension()];
        for (i, alpha) in basis.multi_indices().iter().enumerate() {
            let c = f.coeffs[i];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let n = alpha[k] as f64;
            let mut up = *alpha;
            up[k] += 1;
            let iu = ext.index_of(up).expect("extended basis holds degree N+1");
            vf[iu] += c * (n + 1.0).sqrt();
            df[iu] -= c * (0.5 * (n + 1.0).sqrt());
            if alpha[k] > 0 {
                let mut dn = *alpha;
                dn[k] -= 1;
                let id = ext.index_of(dn).expect("lower index inside basis");
                vf[id] += c * n.sqrt();
                df[id] += c * (0.5 * n.sqrt());
            }
        }
        total += vf.iter().map(|c| c.norm_sqr()).sum::<f64>();
        total += df.iter().map(|c| c.norm_sqr()).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Sparse entries `(row, col, value)` of multiplication by `v_k`,
/// truncated to the basis.
pub fn mul_v_entries(basis: &BasisSpec, k: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (j, alpha) in basis.multi_indices().iter().enumerate() {
        let n = alpha[k];
        let mut up = *alpha;
        up[k] += 1;
        if let Some(i) = basis.index_of(up) {
            out.push((i, j, ((n + 1) as f64).sqrt()));
        }
        if n > 0 {
            let mut dn = *alpha;
            dn[k] -= 1;
            out.push((basis.index_of(dn).unwrap(), j, (n as f64).sqrt()));
        }
    }
    out
}

/// Sparse entries of `d/dv_k`, truncated to the basis.
pub fn grad_v_entries(basis: &BasisSpec, k: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (j, alpha) in basis.multi_indices().iter().enumerate() {
        let n = alpha[k];
        let mut up = *alpha;
        up[k] += 1;
        if let Some(i) = basis.index_of(up) {
            out.push((i, j, -0.5 * ((n + 1) as f64).sqrt()));
        }
        if n > 0 {
            let mut dn = *alpha;
            dn[k] -= 1;
            out.push((basis.index_of(dn).unwrap(), j, 0.5 * (n as f64).sqrt()));
        }
    }
    out
}

/// Dense complex matrix from sparse real entries.
pub fn dense_from_entries(dim: usize, entries: &[(usize, usize, f64)]) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for &(i, j, v) in entries {
        m[(i, j)] += C64::new(v, 0.0);
    }
    m
}

/// Orthonormal 1-d Hermite functions `phi_0..=phi_nmax` evaluated at `v`.
pub fn hermite_functions_1d(nmax: usize, v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    let p0 = (-0.25 * v * v).exp() / (2.0 * std::f64::consts::PI).powf(0.25);
    out.push(p0);
    if nmax >= 1 {
        out.push(v * p0);
    }
    for n in 1..nmax {
        let next = (v * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Value at `v` of the function with coefficients `f`.
pub fn evaluate(basis: &BasisSpec, f: &VelocityVector, v: [f64; 3]) -> C64 {
    let n = basis.max_degree();
    let h: Vec<Vec<f64>> = v.iter().map(|&x| hermite_functions_1d(n, x)).collect();
    basis
        .multi_indices()
        .iter()
        .zip(f.coeffs.iter())
        .map(|(a, c)| c * (h[0][a[0]] * h[1][a[1]] * h[2][a[2]]))
        .sum()
}

/// `||grad_v f||` in `L^2(dv)`, evaluated exactly in a one-degree extended
/// basis (the derivative of a degree-`N` mode reaches degree `N+1`).
pub fn grad_v_norm(basis: &BasisSpec, coeffs: &CVec) -> Result<f64> {
    check_len(basis, coeffs.len())?;
    let ext = BasisSpec::build_unchecked(basis.max_degree() + 1);
    let mut total = 0.0;
    for k in 0..3 {
        let mut df = vec![C64::new(0.0, 0.0); ext.dimension()];
        for (i, alpha) in basis.multi_indices().iter().enumerate() {
            let c = coeffs[i];
            let n = alpha[k] as f64;
            let mut up = *alpha;
            up[k] += 1;
            df[ext.index_of(up).expect("extended basis holds degree N+1")] -= c * (0.5 * (n + 1.0).sqrt());
            if alpha[k] > 0 {
                let mut dn = *alpha;
                dn[k] -= 1;
                df[ext.index_of(dn).expect("lower index inside basis")] += c * (0.5 * n.sqrt());
            }
        }
        total += df.iter().map(|c| c.norm_sqr()).sum::<f64>();
    }
    Ok(total.sqrt())
}
