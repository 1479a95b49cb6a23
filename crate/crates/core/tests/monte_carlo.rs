use dp_hotelling::decision::ThresholdKind;
use dp_hotelling::mechanisms::{compute_summary, BoundPolicy};
use dp_hotelling::randkit::RngStream;
use dp_hotelling::simbench::{
    example32_cells, generate, power_curve, run_cell, run_grid, Cell, DesignSpec,
};

const SEED: u64 = 99;

fn sigma(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

fn cube(d: usize, a: f64) -> DesignSpec {
    DesignSpec::uniform_cube(d, a).unwrap()
}

#[test]
fn cube_null_moments() {
    let mut rng = RngStream::new(SEED, 0);
    let n = 100_000;
    let (x, _) = generate(&mut rng, &cube(3, 0.0), n, 2).unwrap();
    let s = compute_summary(&x, 3f64.sqrt(), BoundPolicy::Reject).unwrap();
    let se = 1.0 / (n as f64).sqrt();
    for i in 0..3 {
        assert!(s.mean[i].abs() <= 4.0 * se, "{:?}", s.mean);
        assert!((s.cov.get(i, i) - 1.0).abs() <= 0.02);
        for j in 0..3 {
            let t = if i == j { 1.0 } else { 0.0 };
            assert!((s.cov.get(i, j) - t).abs() <= 0.05);
        }
    }
}

#[test]
fn cube_shift_has_norm_a() {
    let mut rng = RngStream::new(SEED, 1);
    let spec = cube(4, 1.0);
    let (x, y) = generate(&mut rng, &spec, 50_000, 50_000).unwrap();
    let m = spec.bound_m();
    let sx = compute_summary(&x, m, BoundPolicy::Reject).unwrap();
    let sy = compute_summary(&y, m, BoundPolicy::Reject).unwrap();
    let diff: f64 = sx.mean.iter().zip(&sy.mean).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    // each coordinate of the difference has sd √(2/50000) ≈ 0.0063
    assert!((diff - 1.0).abs() < 0.03, "{diff}");
}

#[test]
fn toeplitz_covariance_is_t_squared() {
    let mut rng = RngStream::new(SEED, 2);
    let spec = DesignSpec::toeplitz(3, 0.0).unwrap();
    let (x, _) = generate(&mut rng, &spec, 100_000, 2).unwrap();
    let s = compute_summary(&x, spec.bound_m(), BoundPolicy::Reject).unwrap();
    let truth = spec.population_cov();
    for i in 0..3 {
        for j in 0..3 {
            assert!((s.cov.get(i, j) - truth.get(i, j)).abs() <= 0.05);
        }
    }
}

#[test]
fn truncated_gaussian_variance_matches_closed_form() {
    let mut rng = RngStream::new(SEED, 3);
    let spec = DesignSpec::truncated_gaussian();
    let (x, _) = generate(&mut rng, &spec, 200_000, 2).unwrap();
    let s = compute_summary(&x, 1.0, BoundPolicy::Reject).unwrap();
    let v = spec.population_cov().get(0, 0);
    assert!((s.cov.get(0, 0) - v).abs() < 0.003, "{} vs {v}", s.cov.get(0, 0));
}

#[test]
fn bootstrap_level_smoke_grid() {
    let reps = 1000;
    let cells = [
        Cell::new(cube(1, 0.0), 0.5, 1_000, ThresholdKind::Bootstrap, reps),
        Cell::new(cube(10, 0.0), 1.0, 1_000, ThresholdKind::Bootstrap, reps),
    ];
    let s = sigma(0.05, reps);
    for r in run_grid(&cells, SEED, 0).unwrap() {
        assert!((r.reject_rate - 0.05).abs() <= 3.0 * s, "{:?}", r);
    }
}

#[test]
fn bootstrap_level_small_sample_strong_privacy() {
    let r = run_cell(
        &Cell::new(cube(1, 0.0), 0.1, 100, ThresholdKind::Bootstrap, 1000),
        SEED,
        0,
    )
    .unwrap();
    assert!((0.03..=0.08).contains(&r.reject_rate), "{}", r.reject_rate);
}

#[test]
fn asymptotic_breakdown_in_ten_dimensions() {
    let r = run_cell(
        &Cell::new(cube(10, 0.0), 1.0, 100, ThresholdKind::Asymptotic, 1000),
        SEED,
        0,
    )
    .unwrap();
    assert!(r.reject_rate >= 0.95, "{}", r.reject_rate);
}

#[test]
fn classical_calibration_without_privacy() {
    let reps = 1000;
    let r = run_cell(
        &Cell::new(cube(3, 0.0), f64::INFINITY, 10_000, ThresholdKind::Asymptotic, reps),
        SEED,
        0,
    )
    .unwrap();
    assert!((r.reject_rate - 0.05).abs() <= 3.0 * sigma(0.05, reps), "{}", r.reject_rate);
}

#[test]
fn truncated_gaussian_without_privacy_is_calibrated() {
    let mut cell = example32_cells(2000)[0];
    cell.eps = f64::INFINITY;
    let r = run_cell(&cell, SEED, 0).unwrap();
    assert!((r.reject_rate - 0.05).abs() <= 0.02, "{}", r.reject_rate);
}

#[test]
fn power_grows_with_sample_size() {
    let reps = 400;
    let curve = power_curve(&cube(1, 1.0), 5.0, &[100, 1_000, 10_000], reps, SEED, 0).unwrap();
    for w in curve.windows(2) {
        let slack = 2.0 * sigma(w[0].frequency.clamp(0.01, 0.99), reps);
        assert!(w[1].frequency + slack >= w[0].frequency, "{curve:?}");
    }
    assert!(curve[2].frequency >= 0.99, "{curve:?}");
}

#[test]
fn power_curve_without_shift_is_a_level_check() {
    let reps = 1000;
    let curve = power_curve(&cube(2, 0.0), 1.0, &[200, 2_000], reps, SEED, 0).unwrap();
    for p in curve {
        assert_eq!(p.reps, reps);
        assert!((p.frequency - 0.05).abs() <= 3.0 * sigma(0.05, reps), "{p:?}");
    }
}
