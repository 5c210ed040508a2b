//! Oracle tests for the Hermite basis and the per-mode operators.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpfp_core::basis::{self, apply_l, project, sigma_norm, weighted_inner};
use vpfp_core::linalg::{eigenvalues, expm};
use vpfp_core::mode_ops::{ModeKind, ModeOperator};
use vpfp_core::quadrature::{gauss_hermite_prob, gauss_legendre_on};
use vpfp_core::{BasisSpec, CMat, CVec, Projection, VelocityVector, VpfpError, C64};

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

#[test]
fn dimensions_match_binomial_counts() {
    assert_eq!(BasisSpec::build(1), Err(VpfpError::BasisTooSmall(1)));
    assert_eq!(BasisSpec::build(2).unwrap().dimension(), 10);
    assert_eq!(BasisSpec::build(4).unwrap().dimension(), 35);
    assert_eq!(BasisSpec::build(16).unwrap().dimension(), 969);
}

#[test]
fn leading_indices_are_fluid_moments() {
    let b = BasisSpec::build(3).unwrap();
    assert_eq!(b.multi_index(0), [0, 0, 0]);
    assert_eq!(b.multi_index(1), [1, 0, 0]);
    assert_eq!(b.multi_index(2), [0, 1, 0]);
    assert_eq!(b.multi_index(3), [0, 0, 1]);
    assert_eq!(b.multi_index(4), [2, 0, 0]);
}

#[test]
fn chains_partition_the_basis() {
    let b = BasisSpec::build(6).unwrap();
    let mut seen = vec![false; b.dimension()];
    for c in b.e1_chains() {
        assert_eq!(c.len(), 6 - c.transverse_degree() + 1);
        for (a1, &g) in c.members.iter().enumerate() {
            assert_eq!(b.multi_index(g), [a1, c.alpha2, c.alpha3]);
            assert!(!seen[g]);
            seen[g] = true;
        }
    }
    assert!(seen.iter().all(|&x| x));
}

#[test]
fn l_eigenvalues() {
    let b = BasisSpec::build(4).unwrap();
    for i in [0usize, 1, 4] {
        let f = VelocityVector::unit(&b, i);
        let lf = apply_l(&b, &f).unwrap();
        assert_abs_diff_eq!(lf.coeffs[i].re, -(b.degree(i) as f64), epsilon = 0.0);
    }
}

/// Apply `Δ_v − |v|²/4 + 3/2` to `(v_1² − 1) sqrt(M)/sqrt(2)` by finite
/// differences in 1-d and compare with `−2` times the function.
#[test]
fn degree_two_mode_is_eigenfunction_of_fokker_planck() {
    let phi = |v: f64| (v * v - 1.0) * (-v * v / 4.0).exp() / (2.0 * std::f64::consts::PI).powf(0.25) / 2f64.sqrt();
    let h = 1e-4;
    for &v in &[-2.0, -0.3, 0.7, 1.9] {
        let lap = (phi(v + h) - 2.0 * phi(v) + phi(v - h)) / (h * h);
        let lf = lap - v * v / 4.0 * phi(v) + 0.5 * phi(v);
        // 1-d factor of L: d²/dv² - v²/4 + 1/2 (the transverse factors act on sqrt(M) as 0).
        assert!((lf + 2.0 * phi(v)).abs() < 1e-6, "v={v}: {lf} vs {}", -2.0 * phi(v));
    }
}

#[test]
fn projections_and_weighted_inner() {
    let b = BasisSpec::build(3).unwrap();
    let m = VelocityVector::unit(&b, 0);
    let v1 = VelocityVector::unit(&b, 1);
    assert_eq!(project(&b, &m, Projection::P0).unwrap(), m);
    assert_eq!(project(&b, &v1, Projection::P0).unwrap().norm(), 0.0);
    assert_eq!(project(&b, &v1, Projection::Pm).unwrap(), v1);
    assert_abs_diff_eq!(weighted_inner(&m, &m, 1.0).unwrap().re, 2.0, epsilon = 1e-15);
    for s in [0.1, 1.0, 7.0] {
        assert_abs_diff_eq!(weighted_inner(&v1, &v1, s).unwrap().re, 1.0, epsilon = 1e-15);
    }
    assert_eq!(weighted_inner(&m, &v1, 1.0).unwrap(), C64::new(0.0, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = VelocityVector::from_coeffs(&b, random_vector(&mut rng, b.dimension())).unwrap();
    let p2 = project(&b, &f, Projection::P2).unwrap();
    let p3 = project(&b, &f, Projection::P3).unwrap();
    assert_eq!(p2.coeffs.clone() + p3.coeffs, f.coeffs);
    let p0 = project(&b, &f, Projection::P0).unwrap();
    let p1 = project(&b, &f, Projection::P1).unwrap();
    assert_eq!(p0.coeffs + p1.coeffs, f.coeffs);
    assert_eq!(project(&b, &p2, Projection::P2).unwrap(), p2);
}

#[test]
fn sigma_norm_of_maxwellian_root() {
    let b = BasisSpec::build(2).unwrap();
    let m = VelocityVector::unit(&b, 0);
    assert_abs_diff_eq!(sigma_norm(&b, &m).unwrap().powi(2), 19.0 / 4.0, epsilon = 1e-14);
    assert_eq!(sigma_norm(&b, &VelocityVector::zeros(&b)).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = VelocityVector::from_coeffs(&b, random_vector(&mut rng, 10)).unwrap();
    let g = VelocityVector { coeffs: &f.coeffs * C64::new(0.0, -2.5) };
    assert_abs_diff_eq!(sigma_norm(&b, &g).unwrap(), 2.5 * sigma_norm(&b, &f).unwrap(), epsilon = 1e-12);
    assert!(sigma_norm(&b, &f).unwrap() >= f.norm());
}

/// Coercivity: `(Lf, f) <= -||P1 f||^2`, and the σ-ratio is positive.
#[test]
fn coercivity_of_l() {
    for n in [2usize, 4, 8] {
        let b = BasisSpec::build(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut mu = f64::INFINITY;
        for _ in 0..1000 {
            let f = VelocityVector::from_coeffs(&b, random_vector(&mut rng, b.dimension())).unwrap();
            let lf = apply_l(&b, &f).unwrap();
            let lff: f64 = lf.coeffs.dotc(&f.coeffs).re;
            let p1 = project(&b, &f, Projection::P1).unwrap();
            assert!(lff <= -p1.norm().powi(2) + 1e-12);
            mu = mu.min(-lff / sigma_norm(&b, &p1).unwrap().powi(2));
        }
        assert!(mu > 0.0, "N={n}: mu_N={mu}");
    }
}

/// Parseval against a 3-d Gauss–Hermite quadrature of the reconstructed function.
#[test]
fn parseval_by_quadrature() {
    let b = BasisSpec::build(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = VelocityVector::from_coeffs(&b, random_vector(&mut rng, b.dimension())).unwrap();
    // |f|^2 = g(v) M(v) with g polynomial of degree 2N: integrate g against M.
    let rule = gauss_hermite_prob(10);
    let mut total = 0.0;
    for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
        for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
            for (z, wz) in rule.nodes.iter().zip(&rule.weights) {
                let val = basis::evaluate(&b, &f, [*x, *y, *z]);
                let m = (-(x * x + y * y + z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).powf(1.5);
                total += wx * wy * wz * val.norm_sqr() / m;
            }
        }
    }
    assert!((total - f.norm().powi(2)).abs() < 1e-10 * f.norm().powi(2));
}

#[test]
fn manifest_is_stable() {
    let b = BasisSpec::build(3).unwrap();
    let m = b.manifest();
    assert_eq!(m.dimension, 20);
    let json = serde_json::to_string(&m).unwrap();
    let back: vpfp_core::BasisManifest = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
    assert_eq!(b.manifest_hash(), BasisSpec::build(3).unwrap().manifest_hash());
    assert_ne!(b.manifest_hash(), BasisSpec::build(4).unwrap().manifest_hash());
}

#[test]
fn gauss_rules_integrate_polynomials() {
    let gh = gauss_hermite_prob(8);
    assert_abs_diff_eq!(gh.integrate(|x| x.powi(4)), 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(gh.integrate(|x| x.powi(6)), 15.0, epsilon = 1e-11);
    let gl = gauss_legendre_on(12, 0.0, 2.0);
    assert_abs_diff_eq!(gl.integrate(|x| x.powi(5)), 64.0 / 6.0, epsilon = 1e-12);
}

#[test]
fn expm_matches_closed_forms() {
    // Rotation generator and a nilpotent Jordan block.
    let a = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(-3.0, 0.0), C64::new(3.0, 0.0), C64::new(0.0, 0.0)]);
    let e = expm(&a);
    assert_abs_diff_eq!(e[(0, 0)].re, 3f64.cos(), epsilon = 1e-13);
    assert_abs_diff_eq!(e[(1, 0)].re, 3f64.sin(), epsilon = 1e-13);
    let j = CMat::from_row_slice(2, 2, &[C64::new(-1.0, 0.0), C64::new(40.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]);
    let e = expm(&j);
    assert_abs_diff_eq!(e[(0, 1)].re, 40.0 * (-1f64).exp(), epsilon = 1e-12);
    let d = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(0.0, 2.0), C64::new(-30.0, 0.0)]));
    let ev = eigenvalues(&d).unwrap();
    assert_eq!(ev.len(), 2);
    assert_abs_diff_eq!(ev[0].im, 2.0, epsilon = 1e-14);
}

#[test]
fn mode_operator_entries() {
    let b = Arc::new(BasisSpec::build(4).unwrap());
    for s in [0.3, 1.0, 4.0] {
        let op = ModeOperator::assemble(ModeKind::B, s, b.clone()).unwrap();
        let m = op.full_matrix();
        let want = C64::new(0.0, -(s + 1.0 / s));
        assert!((m[(1, 0)] - want).norm() < 1e-14);
        assert_eq!(m[(0, 0)], C64::new(0.0, 0.0));
    }
    assert!(matches!(
        ModeOperator::assemble(ModeKind::B, 0.0, b.clone()),
        Err(VpfpError::SingularMode { .. })
    ));
    let a0 = ModeOperator::assemble(ModeKind::A, 0.0, b.clone()).unwrap().full_matrix();
    for i in 0..b.dimension() {
        assert_eq!(a0[(i, i)].re, -2.0 - b.degree(i) as f64);
    }
    let spec = ModeOperator::assemble(ModeKind::A, 0.0, b.clone()).unwrap().spectrum().unwrap();
    assert_eq!(spec.len(), b.dimension());
    assert_abs_diff_eq!(spec[0].re, -2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(spec.last().unwrap().re, -6.0, epsilon = 1e-12);
    // A = L - 2 - i s V1 as dense matrices.
    let s = 2.5;
    let a = ModeOperator::assemble(ModeKind::A, s, b.clone()).unwrap().full_matrix();
    let v1 = basis::dense_from_entries(b.dimension(), &basis::mul_v_entries(&b, 0));
    let l = CMat::from_fn(b.dimension(), b.dimension(), |i, j| {
        if i == j { C64::new(-(b.degree(i) as f64) - 2.0, 0.0) } else { C64::new(0.0, 0.0) }
    });
    let diff = &a - (l - v1 * C64::new(0.0, s));
    assert!(diff.norm() < 1e-14);
}

#[test]
fn block_invariance_of_b1_b2() {
    let b = Arc::new(BasisSpec::build(5).unwrap());
    let b1 = ModeOperator::assemble(ModeKind::B1, 0.7, b.clone()).unwrap();
    assert_eq!(b1.support, vec![0, 1, 2, 3]);
    let full = ModeOperator::assemble(ModeKind::B, 0.7, b.clone()).unwrap().full_matrix();
    let m1 = b1.matrix();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(m1[(i, j)], full[(i, j)]);
        }
    }
    let b2 = ModeOperator::assemble(ModeKind::B2, 0.7, b.clone()).unwrap();
    assert_eq!(b2.support.len(), b.dimension() - 4);
    assert!(b2.support.iter().all(|&g| g >= 4));
    let e = b2.semigroup(0.9).unwrap();
    assert!(e.norm_l2() <= (-0.9f64).exp() + 1e-12);
}

#[test]
fn semigroup_identity_and_contraction() {
    let b = Arc::new(BasisSpec::build(8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in [0.05, 0.5, 3.0] {
        let op = ModeOperator::assemble(ModeKind::B, s, b.clone()).unwrap();
        let e0 = op.semigroup(0.0).unwrap();
        assert!((e0.full_matrix() - CMat::identity(b.dimension(), b.dimension())).norm() < 1e-14);
        for t in [0.1, 1.0, 10.0] {
            let e = op.semigroup(t).unwrap();
            assert!(e.norm_xi() <= 1.0 + 1e-10, "s={s} t={t} norm={}", e.norm_xi());
            let f = random_vector(&mut rng, b.dimension());
            let g = e.apply(&f).unwrap();
            assert!(basis::xi_norm(&g, s) <= basis::xi_norm(&f, s) * (1.0 + 1e-10));
        }
    }
}

/// Column 0 of e^{tB} satisfies the mode ODE (central differences).
#[test]
fn density_column_satisfies_mode_equation() {
    let b = Arc::new(BasisSpec::build(8).unwrap());
    let s = 0.8;
    let op = ModeOperator::assemble(ModeKind::B, s, b.clone()).unwrap();
    let bm = op.full_matrix();
    let e0 = CVec::from_fn(b.dimension(), |i, _| if i == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    let t = 1.3;
    let h = 1e-4;
    let col = |tt: f64| op.semigroup(tt).unwrap().apply(&e0).unwrap();
    let deriv = (col(t + h) - col(t - h)) / C64::new(2.0 * h, 0.0);
    let resid = deriv - &bm * col(t);
    assert!(basis::xi_norm(&resid, s) < 1e-6);
}

#[test]
fn spectral_gap_at_low_frequency() {
    let b = Arc::new(BasisSpec::build(16).unwrap());
    let m = ModeOperator::assemble(ModeKind::B, 0.01, b.clone()).unwrap().max_real_eigenvalue().unwrap();
    assert!((m + 0.5).abs() < 1e-3, "{m}");
    for s in [0.05, 0.5, 1.0, 2.0, 10.0, 60.0] {
        let m = ModeOperator::assemble(ModeKind::B, s, b.clone()).unwrap().max_real_eigenvalue().unwrap();
        assert!(m <= -0.45, "s={s}: {m}");
    }
}
