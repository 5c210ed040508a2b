//! Randomized invariants of the mode operators and kernels.

use std::sync::Arc;

use proptest::prelude::*;
use vpfp_core::basis::{apply_l, project, xi_norm, BasisSpec, Projection, VelocityVector};
use vpfp_core::kernel::eval_g1_hat;
use vpfp_core::mode_ops::{ModeKind, ModeOperator};
use vpfp_core::{CVec, C64};

fn coeffs(dim: usize) -> impl Strategy<Value = CVec> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_never_increases_xi_norm(f in coeffs(35), s in 0.02f64..30.0, t in 0.0f64..10.0) {
        let basis = Arc::new(BasisSpec::build(4).unwrap());
        let e = ModeOperator::assemble(ModeKind::B, s, basis).unwrap().semigroup(t).unwrap();
        let before = xi_norm(&f, s);
        let after = xi_norm(&e.apply(&f).unwrap(), s);
        prop_assert!(after <= before * (1.0 + 1e-10));
    }

    #[test]
    fn fokker_planck_operator_is_dissipative(f in coeffs(35)) {
        let basis = BasisSpec::build(4).unwrap();
        let v = VelocityVector::from_coeffs(&basis, f).unwrap();
        let lv = apply_l(&basis, &v).unwrap();
        let re: f64 = v.coeffs.iter().zip(lv.coeffs.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        prop_assert!(re <= 1e-12);
        // Microscopic part is damped at rate at least one.
        let micro = project(&basis, &v, Projection::P1).unwrap();
        let lm = apply_l(&basis, &micro).unwrap();
        let rm: f64 = micro.coeffs.iter().zip(lm.coeffs.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        prop_assert!(rm <= -micro.norm().powi(2) * (1.0 - 1e-12));
    }

    #[test]
    fn projections_are_idempotent_and_complementary(f in coeffs(35)) {
        let basis = BasisSpec::build(4).unwrap();
        let v = VelocityVector::from_coeffs(&basis, f).unwrap();
        for p in Projection::ALL {
            let once = project(&basis, &v, p).unwrap();
            let twice = project(&basis, &once, p).unwrap();
            prop_assert!((&once.coeffs - &twice.coeffs).norm() == 0.0);
        }
        let a = project(&basis, &v, Projection::P2).unwrap();
        let b = project(&basis, &v, Projection::P3).unwrap();
        prop_assert!((&a.coeffs + &b.coeffs - &v.coeffs).norm() < 1e-15);
    }

    #[test]
    fn damped_kernel_is_symmetric_in_velocities(
        t in 0.05f64..5.0,
        xi in prop::array::uniform3(-3.0f64..3.0),
        v in prop::array::uniform3(-3.0f64..3.0),
        u in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let a = eval_g1_hat(t, xi, v, u).unwrap();
        let b = eval_g1_hat(t, xi, u, v).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
    }
}
