use approx::assert_relative_eq;
use combqft::gaussian::{
    dn_glued, verify_critical_action_gluing, verify_determinant_gluing, verify_partition_gluing, Mass,
};
use combqft::instances::{c4, gluing_instance, massless_instance, preset_battery};
use proptest::prelude::*;

/// Determinant of the `n × n` tridiagonal matrix with `a` on the diagonal
/// and −1 beside it, closed into a circulant when `cyclic`.
fn tridiagonal_det(n: usize, a: f64, cyclic: bool) -> f64 {
    if cyclic {
        (0..n)
            .map(|k| a - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
            .product()
    } else {
        let (mut prev, mut cur) = (1.0, a);
        for _ in 1..n {
            (prev, cur) = (cur, a * cur - prev);
        }
        cur
    }
}

#[test]
fn square_at_unit_mass_matches_tridiagonal_determinants() {
    let inst = c4(1.0, None).unwrap();
    let report = verify_determinant_gluing(&inst.setup, 1.0).unwrap();
    let expected = tridiagonal_det(4, 3.0, true) / tridiagonal_det(3, 3.0, false);
    assert_relative_eq!(expected, 45.0 / 21.0, max_relative = 1e-14);
    assert_relative_eq!(report.lhs, expected.ln(), epsilon = 1e-12);
    assert_relative_eq!(report.rhs, expected.ln(), epsilon = 1e-12);
    let seam = dn_glued(&inst.setup, &Mass::constant(1.0)).unwrap();
    assert_relative_eq!(seam.dn.local[(0, 0)].re, 15.0 / 7.0, max_relative = 1e-12);
}

#[test]
fn untwisted_square_is_massless_mismatched() {
    let inst = c4(0.0, None).unwrap();
    let report = verify_determinant_gluing(&inst.setup, 0.0).unwrap();
    assert_eq!((report.kernel_glued, report.kernel_cut), (1, 0));
    assert!(!report.kernel_matched());
    assert_eq!(dn_glued(&inst.setup, &Mass::constant(0.0)).unwrap().dn.local[(0, 0)].norm(), 0.0);
}

#[test]
fn twisted_square_satisfies_the_massless_identity() {
    let inst = c4(0.0, Some(std::f64::consts::PI)).unwrap();
    let report = verify_determinant_gluing(&inst.setup, 0.0).unwrap();
    assert!(report.kernel_matched());
    assert!(report.residual < 1e-12 && report.q_residual < 1e-12);
    // spectrum 2 − 2cos((2k+1)π/4) on the closed square over 2 − 2cos(kπ/4) on the path interior
    let glued: f64 = (0..4).map(|k| 2.0 - 2.0 * ((2 * k + 1) as f64 * std::f64::consts::PI / 4.0).cos()).product();
    let cut = tridiagonal_det(3, 2.0, false);
    assert_relative_eq!(report.lhs, (glued / cut).ln(), epsilon = 1e-12);
}

#[test]
fn named_presets_pass() {
    for name in ["c4-massive", "c4-twisted", "random-1d", "random-2d"] {
        for inst in preset_battery(name, 3, 6).unwrap() {
            let det = verify_determinant_gluing(&inst.setup, inst.m2).unwrap();
            assert!(det.residual < 1e-8, "{name}: {}", inst.label());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gluing_identities_hold(seed in any::<u64>(), index in 0usize..144) {
        let inst = gluing_instance(seed, index).unwrap();
        let det = verify_determinant_gluing(&inst.setup, inst.m2).unwrap();
        prop_assert!(det.residual < 1e-8, "{}: det {}", inst.label(), det.residual);
        prop_assert!(det.q_residual < 1e-8, "{}: Q-factored {}", inst.label(), det.q_residual);
        let z = verify_partition_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap();
        prop_assert!(z.residual < 1e-8, "{}: partition {}", inst.label(), z.residual);
        let s = verify_critical_action_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap();
        prop_assert!(s.residual < 1e-12, "{}: action {}", inst.label(), s.residual);
        let seam = dn_glued(&inst.setup, &Mass::constant(inst.m2)).unwrap();
        prop_assert!(seam.schur_residual() < 1e-12);
    }

    #[test]
    fn matched_massless_gluing_holds(seed in any::<u64>(), index in 0usize..30) {
        let inst = massless_instance(seed, index).unwrap();
        let det = verify_determinant_gluing(&inst.setup, 0.0).unwrap();
        if det.kernel_matched() {
            prop_assert!(det.residual < 1e-8 && det.q_residual < 1e-8, "{}: {:?}", inst.label(), det);
        } else {
            prop_assert!(det.kernel_glued > det.kernel_cut);
        }
    }
}
