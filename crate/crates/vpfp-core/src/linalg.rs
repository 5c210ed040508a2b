//! Dense complex linear-algebra kernels: matrix exponential, spectra and
//! induced norms.
//!
//! Every operator in this crate is block diagonal with blocks of at most a
//! few dozen rows, so plain dense algorithms are the right tool.  The
//! exponential is the scaling-and-squaring Padé(13) scheme; it carries an
//! optional a-posteriori check that compares `e^A` with `(e^{A/2})^2`.

use nalgebra::linalg::Schur;

use crate::error::{Result, VpfpError};
use crate::{CMat, C64};

/// Padé(13) numerator coefficients for the exponential.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm bound under which Padé(13) needs no scaling.
const THETA13: f64 = 5.371920351148152;

/// Maximum absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Padé(13) approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5_f64.powi(s);
    let a = a * C64::new(scale, 0.0);
    let id = CMat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Exponential with an a-posteriori consistency estimate.
///
/// The estimate is `||e^A - (e^{A/2})^2||_1 / max(1, ||e^A||_1)`, a cheap
/// proxy for the backward error: both sides are exact exponentials but are
/// computed with different scaling, so their disagreement measures the
/// rounding/truncation error actually committed.
pub fn expm_checked(a: &CMat, tolerance: f64) -> Result<CMat> {
    let full = expm(a);
    let half = expm(&(a * C64::new(0.5, 0.0)));
    let sq = &half * &half;
    let estimate = norm1(&(&full - &sq)) / norm1(&full).max(1.0);
    if !(estimate <= tolerance) {
        return Err(VpfpError::Conditioning {
            estimate,
            tolerance,
        });
    }
    Ok(full)
}

/// Eigenvalues of a complex square matrix, sorted by real part descending.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), 1e-15, 10_000).ok_or(VpfpError::EigenFailure { dim: n })?;
    let (_, t) = schur.unpack();
    let scale = norm1(a).max(1.0);
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > 1e-13 * scale {
            // Unreduced 2x2 block: solve its characteristic polynomial.
            let (p, q, r, s) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let tr = p + s;
            let det = p * s - q * r;
            let disc = (tr * tr - det * 4.0).sqrt();
            out.push((tr + disc) * 0.5);
            out.push((tr - disc) * 0.5);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    out.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Spectral (largest singular value) norm.
pub fn op_norm2(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Diagonal matrix with the given real entries.
pub fn real_diag(d: &[f64]) -> CMat {
    let mut m = CMat::zeros(d.len(), d.len());
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = C64::new(x, 0.0);
    }
    m
}

/// Exponential of a block lower-bidiagonal generator.
///
/// `diag[n]` are the diagonal blocks (all `d x d`) and `sub[n - 1]` couples
/// block `n - 1` into block `n`.  The exponential of such a matrix stores the
/// iterated Duhamel integrals of the hierarchy
/// `u_n' = diag[n] u_n + sub[n-1] u_{n-1}` in its block lower triangle, so
/// one exponential yields every level of the hierarchy exactly.  Returns the
/// blocks `e^{tM}[n][c]` for `c < cols`.
pub fn block_bidiagonal_expm(diag: &[CMat], sub: &[CMat], t: f64, cols: usize) -> Vec<Vec<CMat>> {
    let nb = diag.len();
    assert_eq!(sub.len() + 1, nb, "need one coupling per block boundary");
    let d = diag[0].nrows();
    let mut m = CMat::zeros(nb * d, nb * d);
    for (n, blk) in diag.iter().enumerate() {
        m.view_mut((n * d, n * d), (d, d)).copy_from(blk);
    }
    for (n, blk) in sub.iter().enumerate() {
        m.view_mut(((n + 1) * d, n * d), (d, d)).copy_from(blk);
    }
    let e = expm(&(m * C64::new(t, 0.0)));
    (0..nb)
        .map(|n| {
            (0..cols.min(nb))
                .map(|c| e.view((n * d, c * d), (d, d)).into_owned())
                .collect()
        })
        .collect()
}
