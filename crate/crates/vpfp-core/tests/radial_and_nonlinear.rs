//! Spherical-Bessel transforms, physical-space assembly and the radially
//! symmetric nonlinear solver.

use std::f64::consts::PI;
use std::sync::Arc;

use vpfp_core::assembly::{assemble_green, mode_elements, split_consistency, AssemblyConfig, GreenPart, Observable};
use vpfp_core::cutoff::{cutoff_chi, CutoffSide};
use vpfp_core::fit::{fit_decay, tail_envelope, Component};
use vpfp_core::mode_ops::{ModeKind, ModeOperator};
use vpfp_core::nonlinear::{algebraic_profile_hat, NonlinearConfig, PhaseState, RadialSolver};
use vpfp_core::radial::{radial_reconstruct, radial_transform, spherical_bessel, spherical_bessel_all, ModeGrid};
use vpfp_core::{BasisSpec, VpfpError, C64};

#[test]
fn spherical_bessel_reference_values() {
    // Reference values from an arbitrary-precision library.
    let cases = [
        (0, 0.3, 0.985_067_355_537_798_6),
        (1, 1.0, 0.301_168_678_939_756_8),
        (2, 5.0, 0.134_731_210_085_125_2),
        (5, 2.0, 0.002_635_169_770_244_117),
        (8, 20.0, 0.008_653_318_837_183_848),
        (10, 0.5, 7.064_123_963_661_878e-14),
        (3, 40.0, -0.019_306_946_387_479_67),
    ];
    for (l, x, want) in cases {
        let got = spherical_bessel(l, x);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-3), "j_{l}({x}) = {got}, want {want}");
        let all = spherical_bessel_all(l, x);
        assert!((all[l] - want).abs() <= 1e-12 * want.abs().max(1e-3));
    }
}

#[test]
fn gaussian_is_its_own_transform() {
    let grid = ModeGrid::new(12.0, 0.3, 8, 1.0).unwrap();
    let h: Vec<C64> = grid.nodes.iter().map(|&r| C64::new((-0.5 * r * r).exp(), 0.0)).collect();
    let x = [0.0, 0.5, 1.0, 2.0, 3.5];
    for v in radial_reconstruct(&grid, &h, &x).unwrap() {
        assert!((v.value.re - (-0.5 * v.x * v.x).exp()).abs() < 1e-12, "{v:?}");
        assert!(!v.aliasing);
    }
    // ℓ = 1: ρ e^{-ρ²/2} ↦ r e^{-r²/2} (the phase i^ℓ is left to callers).
    let h1: Vec<C64> = grid.nodes.iter().map(|&r| C64::new(r * (-0.5 * r * r).exp(), 0.0)).collect();
    for v in radial_transform(&grid, &h1, 1, &x).unwrap() {
        assert!((v.value.re - v.x * (-0.5 * v.x * v.x).exp()).abs() < 1e-12, "{v:?}");
    }
}

#[test]
fn smooth_low_frequency_cutoff_transform_steepens_with_distance() {
    let cfg = AssemblyConfig::default();
    let grid = cfg.mode_grid().unwrap();
    assert!(grid.len() <= 400);
    let h: Vec<C64> = grid
        .nodes
        .iter()
        .map(|&r| C64::new(cutoff_chi(r, 1.0, CutoffSide::Low).unwrap(), 0.0))
        .collect();
    let x: Vec<f64> = (0..=200).map(|i| 2.0 + 0.3 * i as f64).collect();
    let vals: Vec<f64> = radial_reconstruct(&grid, &h, &x).unwrap().iter().map(|v| v.value.norm()).collect();
    let env = tail_envelope(&vals);
    let fit = |w: (f64, f64)| fit_decay(Component::P0, 0.0, &x, &env, w, 0.0).unwrap().exponent_x;
    // A C^∞ compactly supported profile transforms to a super-algebraically
    // decaying one: the local exponent keeps growing with |x|.
    let (near, far) = (fit((5.0, 20.0)), fit((20.0, 60.0)));
    assert!(far > near + 1.0, "{near} {far}");
    assert!(far >= 6.0, "{far}");
}

#[test]
fn frequency_split_recombines_to_the_full_semigroup() {
    let basis = Arc::new(BasisSpec::build(6).unwrap());
    for &s in &[0.4, 1.3, 1.8, 3.0] {
        let d = split_consistency(basis.clone(), 3, s, 0.8, 1.0).unwrap();
        assert!(d < 1e-10, "s={s}: {d}");
    }
    let cfg = AssemblyConfig::default();
    for &s in &[0.3, 1.5, 4.0] {
        let lo = mode_elements(GreenPart::Low, s, 1.2, &cfg).unwrap();
        let hi = mode_elements(GreenPart::High, s, 1.2, &cfg).unwrap();
        let full = mode_elements(GreenPart::Full, s, 1.2, &cfg).unwrap();
        assert!((lo.g00 + hi.g00 - full.g00).norm() < 1e-12);
        assert!((lo.g21 + hi.g21 - full.g21).norm() < 1e-12);
    }
}

#[test]
fn assembled_profile_is_stable_under_grid_refinement() {
    let x = [0.0, 2.0, 6.0, 12.0];
    let coarse = AssemblyConfig { panel_width: 0.5, ..Default::default() };
    let fine = AssemblyConfig::default();
    for obs in [Observable::Density, Observable::Momentum, Observable::StressP1] {
        let a = assemble_green(1.0, obs, GreenPart::Low, &x, &coarse).unwrap();
        let b = assemble_green(1.0, obs, GreenPart::Low, &x, &fine).unwrap();
        let scale = b.magnitudes().iter().cloned().fold(0.0, f64::max);
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).norm() < 1e-8 * scale, "{obs:?}: {u} vs {v}");
        }
    }
}

fn small_config() -> NonlinearConfig {
    NonlinearConfig { max_degree: 4, t_end: 1.0, dt: 0.05, ..Default::default() }
}

#[test]
fn algebraic_profile_transform_closed_form() {
    // ∫ (1+|x|²)^{-2} e^{-iξ·x} dx = π² e^{-|ξ|}.
    for &rho in &[0.0, 0.3, 1.0, 4.0] {
        let want = PI * PI * (-rho as f64).exp() / (2.0 * PI).powf(1.5);
        assert!((algebraic_profile_hat(2, rho) - want).abs() < 1e-13, "{rho}");
    }
}

#[test]
fn poisson_field_matches_enclosed_charge() {
    let solver = RadialSolver::new(small_config()).unwrap();
    let u0 = solver.initial_state();
    let cfg = &solver.config;
    // Density δ_0 g_0 (1+r²)^{-2} encloses 2π δ_0 g_0 (atan r - r/(1+r²)).
    let g0 = solver.basis.isotropic_coeffs(|v| (1.0 + v).powi(-3))[0].re;
    let r = [0.5, 1.0, 2.0, 5.0, 10.0];
    let field = solver.poisson_field(&u0, &r).unwrap();
    for (&ri, e) in r.iter().zip(&field) {
        let want = cfg.delta0 * g0 * (ri.atan() - ri / (1.0 + ri * ri)) / (2.0 * ri * ri);
        assert!((e.norm() - want.abs()).abs() <= 0.01 * want.abs(), "r={ri}: {e} vs {want}");
    }
}

#[test]
fn nonlinear_term_conserves_mass_and_maps_density_into_momentum_channel() {
    let cfg = NonlinearConfig { delta0: 0.1, ..small_config() };
    let solver = RadialSolver::new(cfg).unwrap();
    let nch = solver.basis.len();
    // Density-only state: only the sqrt(M) channel is populated.
    let mut u = PhaseState::zeros(solver.rho.len(), nch);
    for (i, &rho) in solver.rho.nodes.iter().enumerate() {
        u.modes[(i, 0)] = C64::new(0.1 * (-0.5 * rho * rho).exp(), 0.0);
    }
    u.zero[0] = C64::new(0.1, 0.0);
    let h = solver.nonlinear_term(&u);
    let scale = h.modes.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(scale > 0.0);
    for i in 0..solver.rho.len() {
        assert!(h.modes[(i, 0)].norm() <= 1e-12 * scale);
    }
    assert!(h.zero[0].norm() <= 1e-12 * scale);
    // (½ v_1 - ∂_{v_1}) sqrt(M) = v_1 sqrt(M): with c = c_00 only, H lives in
    // channel (0, 1) alone, with amplitude Φ'(r) c_00(r).
    for k in 0..nch {
        if solver.basis.channels[k] != (0, 1) {
            for i in 0..solver.rho.len() {
                assert!(h.modes[(i, k)].norm() <= 1e-10 * scale, "channel {k}");
            }
        }
    }
    assert!((solver.basis.raise[(1, 0)].re - 1.0).abs() < 1e-12);
}

#[test]
fn linear_regime_matches_cartesian_semigroup() {
    let cfg = NonlinearConfig { nonlinear: false, ..small_config() };
    let mut solver = RadialSolver::new(cfg).unwrap();
    let u0 = solver.initial_state();
    let traj = solver.evolve(&u0, 1.0, 0.05).unwrap();
    let last = traj.states.last().unwrap();
    let basis = solver.basis.cartesian.clone();
    for i in (0..solver.rho.len()).step_by(7) {
        let rho = solver.rho.nodes[i];
        let e = ModeOperator::assemble(ModeKind::B, rho, basis.clone()).unwrap().semigroup(1.0).unwrap();
        let start = &solver.basis.embed * u0.modes.row(i).transpose();
        let want = e.apply(&start).unwrap();
        let got = &solver.basis.embed * last.modes.row(i).transpose();
        let scale = start.norm().max(1e-300);
        assert!((got - want).norm() <= 1e-6 * scale, "rho={rho}");
    }
}

#[test]
fn zero_data_stays_zero_and_mass_is_conserved() {
    let mut solver = RadialSolver::new(NonlinearConfig { delta0: 0.0, ..small_config() }).unwrap();
    let u0 = solver.initial_state();
    let traj = solver.evolve(&u0, 0.5, 0.05).unwrap();
    assert!(traj.states.iter().all(|s| s.modes.iter().all(|z| z.norm() == 0.0)));

    let mut solver = RadialSolver::new(NonlinearConfig { delta0: 1e-2, ..small_config() }).unwrap();
    let u0 = solver.initial_state();
    let traj = solver.evolve(&u0, 1.0, 0.05).unwrap();
    assert!(traj.mass[0] > 0.0);
    assert!(traj.mass_drift_rate() <= 1e-10 * traj.mass[0].max(1.0));
}

#[test]
fn oversized_step_and_charged_neutral_data_are_rejected() {
    let mut solver = RadialSolver::new(small_config()).unwrap();
    let u0 = solver.initial_state();
    match solver.evolve(&u0, 1.0, 1.0) {
        Err(VpfpError::Cfl { dt, limit, .. }) => assert!(dt > limit),
        other => panic!("expected a step-size error, got {:?}", other.map(|t| t.states.len())),
    }
    let neutral = RadialSolver::new(NonlinearConfig { neutral: true, ..small_config() }).unwrap();
    let charged = solver.initial_state();
    assert!(matches!(neutral.poisson_field(&charged, &[1.0]), Err(VpfpError::NonNeutral { .. })));
    assert!(neutral.poisson_field(&neutral.initial_state(), &[1.0]).is_ok());
    assert!(RadialSolver::new(NonlinearConfig { decay_power: 1, ..small_config() }).is_err());
}

#[test]
fn first_picard_iterate_is_the_linear_evolution() {
    let cfg = small_config();
    let mut solver = RadialSolver::new(cfg.clone()).unwrap();
    let u0 = solver.initial_state();
    let trace = solver.picard_solve(&u0, 1).unwrap();
    let mut linear = RadialSolver::new(NonlinearConfig { nonlinear: false, ..cfg.clone() }).unwrap();
    let traj = linear.evolve(&u0, cfg.t_end, cfg.dt).unwrap();
    assert_eq!(trace.final_states.len(), traj.states.len());
    for (a, b) in trace.final_states.iter().zip(&traj.states) {
        let scale = b.modes.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = (&a.modes - &b.modes).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-12 * scale);
    }
}

#[test]
fn picard_ratio_shrinks_with_amplitude() {
    let ratio = |d: f64| {
        let mut s = RadialSolver::new(NonlinearConfig { delta0: d, ..small_config() }).unwrap();
        let u0 = s.initial_state();
        s.picard_solve(&u0, 6).unwrap().contraction_ratio
    };
    let (a, b) = (ratio(1e-3), ratio(1e-2));
    assert!(a > 0.0 && a < 0.1);
    assert!((b / a).log10() > 0.8 && (b / a).log10() < 1.2, "{a} {b}");
}
