use approx::assert_relative_eq;
use combqft::approx::{determinant_ratio, determinant_ratio_experiment, q_ratio_check, CircleDoubling};
use combqft::metric::WeightPreset;

/// `log det′` of the uniform Whitney circle with `n` edges of length `h`,
/// from the circulant symbols: stiffness `(2 − 2cos θ)/h`, mass
/// `h(2 + cos θ)/3`.
fn whitney_circle_log_det(n: usize, h: f64) -> f64 {
    (1..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            (6.0 * (1.0 - t.cos()) / (h * h * (2.0 + t.cos()))).ln()
        })
        .sum()
}

// 60-digit evaluations of the circulant products
const WHITNEY_RATIO_LAMBDA_1: [(usize, f64); 3] = [
    (8, 0.250_026_573_129_251_700_680_272_1),
    (16, 0.250_000_000_706_056_149_742_286_1),
    (32, 0.250_000_000_000_000_000_498_515_3),
];

#[test]
fn whitney_ratio_matches_the_circulant_oracle() {
    for (n, expected) in WHITNEY_RATIO_LAMBDA_1 {
        let row = determinant_ratio(WeightPreset::Whitney, 1.0, n).unwrap();
        assert_relative_eq!(row.ratio, expected, max_relative = 1e-13);
        let h = 1.0 / n as f64;
        assert_relative_eq!(row.log_det_circle, whitney_circle_log_det(n, h), max_relative = 1e-12);
        assert_relative_eq!(row.log_det_double, whitney_circle_log_det(2 * n, h), max_relative = 1e-12);
    }
}

#[test]
fn ratio_scales_with_the_square_of_the_length() {
    for n in [8, 16] {
        let one = determinant_ratio(WeightPreset::Whitney, 1.0, n).unwrap();
        let two = determinant_ratio(WeightPreset::Whitney, 2.0, n).unwrap();
        assert_eq!(two.target, 1.0);
        assert_relative_eq!(two.ratio, 4.0 * one.ratio, max_relative = 1e-12);
    }
}

#[test]
fn lumped_ratio_is_exact_at_every_size() {
    for lambda in [1.0, 2.0, 3.5] {
        for n in [3, 4, 7, 100, 257] {
            let row = determinant_ratio(WeightPreset::Lumped, lambda, n).unwrap();
            assert_relative_eq!(row.ratio, lambda * lambda / 4.0, max_relative = 1e-12);
        }
    }
}

#[test]
fn whitney_error_shrinks_until_rounding() {
    let rows = determinant_ratio_experiment(WeightPreset::Whitney, 1.0, 8, 6).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![8, 16, 32, 64, 128, 256, 512]);
    assert!(rows[1].error < rows[0].error && rows[2].error < rows[1].error);
    assert!(rows.iter().all(|r| r.error < 1e-4));
    assert!(rows.iter().skip(2).all(|r| r.error < 1e-11));
}

#[test]
fn collar_gram_ratio_decays_for_whitney_and_is_exact_for_lumped() {
    let deviations: Vec<f64> = (6..=24).map(|n| q_ratio_check(WeightPreset::Whitney, 1.0, n).unwrap().deviation).collect();
    assert!(deviations.windows(2).take(12).all(|w| w[1] < w[0]));
    assert!(deviations[0] > 1e-4);
    assert!(*deviations.last().unwrap() < 1e-10);
    for n in [6, 9, 40] {
        assert!(q_ratio_check(WeightPreset::Lumped, 1.5, n).unwrap().deviation < 1e-13);
    }
}

#[test]
fn doubling_geometry() {
    let c = CircleDoubling::new(2.0, 5).unwrap();
    assert_eq!(c.interval.counts(), vec![6, 5]);
    assert!(c.circle.is_cycle() && c.double.is_cycle());
    assert_eq!(c.circle.count(1), 5);
    assert_eq!(c.double.count(1), 10);
    assert_relative_eq!(c.h(), 0.4);
    assert!(CircleDoubling::new(1.0, 2).is_err());
}
