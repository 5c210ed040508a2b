//! Low- and high-frequency hierarchies, the frequency split and the exact
//! large-frequency propagator, each against an independent computation.

use std::sync::Arc;

use vpfp_core::coherent::{density_element, DysonOperator, DysonResolution, DysonWeights};
use vpfp_core::cutoff::{chi_r, cutoff_chi, smooth_step, CutoffSide};
use vpfp_core::highfreq::{singular_wave_terms, singular_wave_w_alpha, singular_waves, solve_high};
use vpfp_core::linalg::expm;
use vpfp_core::lowfreq::{duhamel_first_levels, solve_low};
use vpfp_core::mode_ops::{chain_operator, ModeKind, ModeOperator};
use vpfp_core::{BasisSpec, C64};

fn chain_entry_of_b(s: f64, t: f64) -> C64 {
    expm(&(chain_operator(ModeKind::B, s, 90, 0) * C64::new(t, 0.0)))[(0, 0)]
}

#[test]
fn renewal_density_element_matches_long_hermite_chain() {
    for &(s, t) in &[(0.5, 1.0), (1.0, 0.5), (2.0, 2.0)] {
        let renewal = density_element(s, t, 4096);
        let hermite = chain_entry_of_b(s, t);
        assert!((renewal - hermite).norm() < 1e-5, "s={s} t={t}: {renewal} vs {hermite}");
    }
}

#[test]
fn dyson_operator_reproduces_semigroup_on_maxwellian() {
    for &(s, t) in &[(1.0, 0.5), (3.0, 1.0)] {
        let op = DysonOperator::build(s, t, &DysonWeights::full(), DysonResolution::default()).unwrap();
        let m: Vec<C64> = op.grid.sqrt_m().iter().map(|&x| C64::new(x, 0.0)).collect();
        let got = op.element(&m, &m);
        let want = chain_entry_of_b(s, t);
        assert!((got - want).norm() < 1e-5, "s={s} t={t}: {got} vs {want}");
    }
}

#[test]
fn dyson_iterates_sum_to_partial_sum_and_remainder_to_full() {
    let (s, t) = (2.0, 0.7);
    let res = DysonResolution::default();
    let k = 4;
    let build = |w: &DysonWeights| DysonOperator::build(s, t, w, res).unwrap();
    let partial = build(&DysonWeights::partial_sum(k, t));
    let rem = build(&DysonWeights::remainder(k, t));
    let full = build(&DysonWeights::full());
    let iterates: Vec<DysonOperator> = (0..=k).map(|j| build(&DysonWeights::iterate(j, t))).collect();
    let f: Vec<C64> = partial.grid.v.iter().zip(partial.grid.sqrt_m()).map(|(&v, &m)| C64::new(m * (1.0 + v), 0.3 * m * v * v)).collect();
    let apply_sum: Vec<C64> = iterates.iter().map(|op| op.apply(&f)).fold(vec![C64::new(0.0, 0.0); f.len()], |acc, x| {
        acc.iter().zip(&x).map(|(a, b)| a + b).collect()
    });
    let p = partial.apply(&f);
    let r = rem.apply(&f);
    let g = full.apply(&f);
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..f.len() {
        assert!((apply_sum[i] - p[i]).norm() < 1e-10 * scale);
        assert!((p[i] + r[i] - g[i]).norm() < 1e-9 * scale);
    }
}

#[test]
fn low_frequency_sum_identity_and_duhamel_cross_check() {
    let n = 6;
    let basis = Arc::new(BasisSpec::build(n).unwrap());
    let s = 0.3;
    let t = 1.5;
    let sol = solve_low(basis.clone(), 3, s, &[0.5, t], 1.0).unwrap();
    assert!(sol.sum_identity_defect() < 1e-10, "{}", sol.sum_identity_defect());
    assert_eq!(sol.chi, 1.0);

    let (j0, i1) = duhamel_first_levels(s, n + 1, t, 1e-11).unwrap();
    let chain: Vec<usize> = (0..=n).map(|a| basis.index_of([a, 0, 0]).unwrap()).collect();
    let mut worst: f64 = 0.0;
    for (i, &gi) in chain.iter().enumerate() {
        for (j, &gj) in chain.iter().enumerate() {
            worst = worst.max((j0[(i, j)] - sol.iterates[0].j_k[1].entry(gi, gj)).norm());
            worst = worst.max((i1[(i, j)] - sol.iterates[1].i_k[1].entry(gi, gj)).norm());
        }
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn low_frequency_ladder_scales_with_xi() {
    let basis = Arc::new(BasisSpec::build(5).unwrap());
    let a = solve_low(basis.clone(), 2, 0.01, &[1.0], 1.0).unwrap();
    let b = solve_low(basis, 2, 0.02, &[1.0], 1.0).unwrap();
    // ||J_k|| ~ |xi|^{2k}: doubling |xi| multiplies J_2 by about 16.
    let ratio = b.iterates[2].j_k[0].norm_l2() / a.iterates[2].j_k[0].norm_l2();
    assert!((ratio.log2() - 4.0).abs() < 0.1, "{ratio}");
}

#[test]
fn low_frequency_rejects_high_modes() {
    let basis = Arc::new(BasisSpec::build(3).unwrap());
    assert!(solve_low(basis.clone(), 1, 2.5, &[1.0], 1.0).is_err());
    assert!(solve_low(basis, 1, 0.5, &[-1.0], 1.0).is_err());
}

#[test]
fn high_frequency_sum_identity_and_cutoff_scaling() {
    let basis = Arc::new(BasisSpec::build(6).unwrap());
    let sol = solve_high(basis.clone(), 5, 1.4, &[0.2, 1.0, 3.0], 1.0).unwrap();
    assert!(sol.sum_identity_defect() < 1e-10);
    let chi = cutoff_chi(1.4, 1.0, CutoffSide::High).unwrap();
    assert!((sol.chi - chi).abs() < 1e-15);
    // Ĝ_H = χ_2 e^{tB}.
    let e = ModeOperator::assemble(ModeKind::B, 1.4, basis.clone()).unwrap().semigroup(1.0).unwrap();
    let g = &sol.green[1];
    for i in 0..basis.dimension() {
        for j in 0..basis.dimension() {
            assert!((g.entry(i, j) - e.entry(i, j) * chi).norm() < 1e-12);
        }
    }
}

#[test]
fn singular_waves_are_partial_sums_of_high_iterates() {
    let basis = Arc::new(BasisSpec::build(5).unwrap());
    let (s, t) = (3.0, 0.6);
    let sol = solve_high(basis.clone(), 7, s, &[t], 1.0).unwrap();
    let waves = singular_waves(basis.clone(), 8, s, t, 1.0).unwrap();
    for j in 0..8 {
        assert!(waves[j].max_abs_diff(&sol.iterates[j].i_j[0]) < 1e-11, "wave {j}");
    }
    assert_eq!(singular_wave_terms(0), 8);
    assert_eq!(singular_wave_terms(2), 11);
    let w = singular_wave_w_alpha(basis, 0, s, &[t], 1.0).unwrap();
    assert!(w[0].max_abs_diff(&sol.partial_sum(7, 0)) < 1e-11);
}

#[test]
fn cutoff_partition_and_smoothness() {
    let r = 1.3;
    assert_eq!(chi_r(0.5 * r, r), 0.0);
    assert_eq!(chi_r(r, r), 0.0);
    assert_eq!(chi_r(2.0 * r, r), 1.0);
    assert_eq!(chi_r(5.0 * r, r), 1.0);
    for i in 0..=50 {
        let s = r * (0.8 + 1.6 * i as f64 / 50.0);
        let lo = cutoff_chi(s, r, CutoffSide::Low).unwrap();
        let hi = cutoff_chi(s, r, CutoffSide::High).unwrap();
        assert!((lo + hi - 1.0).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&hi));
    }
    // Odd symmetry about the midpoint and monotonicity.
    let mut prev = 0.0;
    for i in 1..100 {
        let x = i as f64 / 100.0;
        assert!((smooth_step(x) + smooth_step(1.0 - x) - 1.0).abs() < 1e-14);
        assert!(smooth_step(x) >= prev);
        prev = smooth_step(x);
    }
    // Flat at both ends: every finite-difference derivative vanishes there.
    assert!(smooth_step(0.02) < 1e-20);
    assert!(cutoff_chi(1.0, 0.0, CutoffSide::Low).is_err());
    assert!(cutoff_chi(-1.0, 1.0, CutoffSide::High).is_err());
}
