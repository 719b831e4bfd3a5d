use std::f64::consts::PI;

use holozero::basis::{build_basis, truncation_degree, QuadratureConfig, DEFAULT_MAX_DEGREE};
use holozero::geometry::{Weight, WeightModel};
use holozero::kernel::{asymptotics_precondition, asymptotics_report, AsymptoticsGrid, KernelEvaluator};
use holozero::quadrature::DiskRule;
use holozero::Complex64;

fn evaluator(model: &WeightModel, n: u32, radius: f64, tol: f64) -> KernelEvaluator {
    let quad = QuadratureConfig::default();
    let d = truncation_degree(model, n, radius, tol, DEFAULT_MAX_DEGREE, &quad).unwrap();
    KernelEvaluator::new(build_basis(model, n, d, &quad).unwrap())
}

fn disk_points(count: usize, radius: f64, twist: f64) -> Vec<Complex64> {
    // sunflower layout
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| Complex64::from_polar(radius * ((i as f64 + 0.5) / count as f64).sqrt(), i as f64 * golden + twist))
        .collect()
}

#[test]
fn normalized_kernel_matches_gaussian_closed_form() {
    let model = WeightModel::bargmann_fock(1.0).unwrap();
    for n in [50, 100, 200] {
        let ev = evaluator(&model, n, 1.0, 1e-14);
        let xs: Vec<_> = disk_points(50, 1.0, 0.0).into_iter().map(|x| ev.point(x).unwrap()).collect();
        let ys: Vec<_> = disk_points(50, 1.0, 1.3).into_iter().map(|y| ev.point(y).unwrap()).collect();
        let mut worst = 0.0f64;
        for a in &xs {
            for b in &ys {
                let exact = (-(n as f64) * (a.x - b.x).norm_sqr() / 2.0).exp();
                worst = worst.max((ev.gamma(a, b).unwrap() - exact).abs());
            }
        }
        assert!(worst <= 1e-6, "n = {n}: {worst:e}");
    }
}

#[test]
fn gamma_is_bounded_and_equals_covariance_modulus() {
    let model = WeightModel::new(Weight::RadialPolynomial(vec![0.0, 1.0, 0.1]), 2.0, 1.0).unwrap();
    let ev = evaluator(&model, 40, 1.0, 1e-14);
    let xs = disk_points(40, 1.0, 0.2);
    let ys = disk_points(40, 1.0, 2.9);
    for (x, y) in xs.iter().zip(&ys) {
        let g = ev.normalized_kernel(*x, *y).unwrap();
        assert!((0.0..=1.0).contains(&g));
        assert!((ev.covariance(*x, *y).unwrap().norm() - g).abs() < 1e-12);
    }
}

#[test]
fn bargmann_fock_localizes_monotonically_along_rays() {
    let model = WeightModel::bargmann_fock(1.0).unwrap();
    let ev = evaluator(&model, 60, 1.0, 1e-14);
    let x = Complex64::new(0.2, -0.1);
    let dir = Complex64::from_polar(1.0, 0.7);
    let values: Vec<f64> = (0..30)
        .map(|i| ev.normalized_kernel(x, x + dir * (0.02 * i as f64)).unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn diagonal_kernel_integrates_to_dimension() {
    let model = WeightModel::bargmann_fock(1.0).unwrap();
    let quad = QuadratureConfig::default();
    let basis = build_basis(&model, 10, 20, &quad).unwrap();
    let dim = basis.dimension() as f64;
    let rule = DiskRule::new(4.0, &[], 32, 16, 96);
    let total = rule.integrate(|z| basis.weighted_values(z).iter().map(|v| v.norm_sqr()).sum());
    assert!((total / dim - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn closed_form_fit_has_unit_slope() {
    let model = WeightModel::bargmann_fock(2.0).unwrap();
    let grid = AsymptoticsGrid::new(1.0);
    let mut previous: Option<f64> = None;
    for n in [50, 100, 200] {
        let split = asymptotics_precondition(&model, n, 3.0, 1).unwrap();
        let ev = evaluator(&model, n, grid.reach(split).min(2.0), 1e-20);
        let report = asymptotics_report(&ev, 3.0, 1, &grid).unwrap();
        assert!((report.slope - 1.0).abs() <= 1e-6, "n = {n}: slope {}", report.slope);
        assert!(report.intercept.abs() <= 1e-6);
        assert!(report.r2 >= 0.99);
        if let Some(p) = previous {
            assert!(report.offdiag_max_scaled <= 1.3 * p);
        }
        previous = Some(report.offdiag_max_scaled);
    }
}

#[test]
fn radial_quartic_fit_quality() {
    let model = WeightModel::new(Weight::RadialPolynomial(vec![0.0, 1.0, 0.05]), 2.0, 2.0).unwrap();
    let grid = AsymptoticsGrid::new(1.0);
    let mut previous: Option<f64> = None;
    for n in [50, 100, 200] {
        let split = asymptotics_precondition(&model, n, 3.0, 1).unwrap();
        let ev = evaluator(&model, n, grid.reach(split).min(2.0), 1e-20);
        let report = asymptotics_report(&ev, 3.0, 1, &grid).unwrap();
        assert!((0.9..=1.1).contains(&report.slope));
        assert!(report.r2 >= 0.99);
        if let Some(p) = previous {
            assert!(report.offdiag_max_scaled <= 1.3 * p);
        }
        previous = Some(report.offdiag_max_scaled);
    }
}
