mod common;

use common::*;
use proptest::prelude::*;
use weylab::catalog::{catalog_geometry, random_polynomial, GeometrySpec};
use weylab::mongeampere::{parallel_residual, TautologicalVolume};
use weylab::sampling::sample_points;
use weylab::tensor::weight;
use weylab::{convexity_certificate, ma_residual, projective_hessian, weyl_from_density};
use weylab::{BundleSpace, Chart, Connection, DensityField, Error, Expr};

fn klein_space(n: usize) -> BundleSpace {
    BundleSpace::new(catalog_geometry(&GeometrySpec::KleinBall { n }).unwrap().connection)
}

fn flat_ball(n: usize) -> BundleSpace {
    BundleSpace::new(Connection::flat(Chart::unit_ball(n).unwrap()))
}

fn klein_sigma(n: usize) -> DensityField {
    let src = (1..=n).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" - ");
    DensityField::new(Chart::unit_ball(n).unwrap(), Expr::parse(&format!("(1 - {src})^(1/2)"), n).unwrap(), weight(1)).unwrap()
}

fn ball_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_points(&Chart::unit_ball(n).unwrap().domain(), n, count, seed)
}

#[test]
fn weyl_structure_of_constant_density_on_flat_space() {
    let s = BundleSpace::new(Connection::flat(cube(2)));
    let one = DensityField::new(cube(2), Expr::constant(1.0), weight(1)).unwrap();
    let points = sample_points(&cube(2).domain(), 2, 5, 1);
    let section = weyl_from_density(&one, &s, &points).unwrap();
    for x in &points {
        assert_eq!(section.psi().values(x).unwrap(), vec![0.0, 0.0]);
        assert_eq!(section.connection().gamma_jet(x, 0).unwrap().max_abs_value(), 0.0);
    }
}

#[test]
fn weyl_structure_of_ball_density() {
    let n = 3;
    let s = flat_ball(n);
    let points = ball_points(n, 20, 2);
    let section = weyl_from_density(&klein_sigma(n), &s, &points).unwrap();
    assert_eq!(section.psi().values(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    for x in &points {
        let u2 = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
        let expected: Vec<f64> = x.iter().map(|v| v / u2).collect();
        assert!(max_abs_diff(&section.psi().values(x).unwrap(), &expected) < 1e-14);
    }
    assert!(parallel_residual(&klein_sigma(n), section.connection(), &points).unwrap() < 1e-10);
    // the same structure computed from the Klein representative
    let k = klein_space(n);
    let from_klein = weyl_from_density(&klein_sigma(n), &k, &points).unwrap();
    for x in &points {
        assert!(from_klein.psi().values(x).unwrap().iter().all(|v| v.abs() < 1e-12));
        let a = section.connection().gamma_jet(x, 0).unwrap();
        let b = from_klein.connection().gamma_jet(x, 0).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-10);
    }
}

#[test]
fn weyl_structure_is_parallel_and_scale_free() {
    for (n, seed) in [(2, 1), (3, 2)] {
        let geo = catalog_geometry(&GeometrySpec::RandomPoly { n, degree: 2, seed }).unwrap();
        let s = BundleSpace::new(geo.connection);
        let p = random_polynomial(n, 2, 0.6, &mut rng(seed));
        let sigma = DensityField::new(geo.chart, p.exp(), weight(1)).unwrap();
        let points = sample_points(&geo.chart.domain(), n, 20, seed);
        let section = weyl_from_density(&sigma, &s, &points).unwrap();
        assert!(parallel_residual(&sigma, section.connection(), &points).unwrap() < 1e-10);
        let scaled = weyl_from_density(&sigma.scaled(-3.5), &s, &points).unwrap();
        for x in &points {
            assert!(max_abs_diff(&section.psi().values(x).unwrap(), &scaled.psi().values(x).unwrap()) < 1e-14);
        }
    }
}

#[test]
fn vanishing_density_is_rejected() {
    let s = BundleSpace::new(Connection::flat(cube(2)));
    let sigma = DensityField::new(cube(2), Expr::parse("x1", 2).unwrap(), weight(1)).unwrap();
    let err = weyl_from_density(&sigma, &s, &[vec![0.0, 0.5]]).unwrap_err();
    assert_eq!(err, Error::ZeroDensity { point: vec![0.0, 0.5] });
    assert!(matches!(ma_residual(&sigma, &s, 1.0, &[vec![0.0, 0.1]]), Err(Error::ZeroDensity { .. })));
}

#[test]
fn hessian_of_ball_density() {
    let n = 2;
    let flat = flat_ball(n);
    let h = projective_hessian(&klein_sigma(n), flat.base()).unwrap();
    assert!(max_abs_diff(&h.values(&[0.0, 0.0]).unwrap(), &[-1.0, 0.0, 0.0, -1.0]) < 1e-15);
    let section = weyl_from_density(&klein_sigma(n), &flat, &ball_points(n, 10, 3)).unwrap();
    let hs = projective_hessian(&klein_sigma(n), section.connection()).unwrap();
    for x in ball_points(n, 10, 3) {
        let u2 = 1.0 - x[0] * x[0] - x[1] * x[1];
        let u = u2.sqrt();
        let expected: Vec<f64> = (0..4)
            .map(|k| {
                let (i, j) = (k / 2, k % 2);
                -((if i == j { u2 } else { 0.0 }) + x[i] * x[j]) / (u2 * u)
            })
            .collect();
        let hv = h.values(&x).unwrap();
        assert!(max_abs_diff(&hv, &expected) < 1e-12);
        // in the preserving representative H(σ) = −Pˢσ
        let p = section.rho_jet(&x, 0).unwrap().values();
        let minus_ps: Vec<f64> = p.iter().map(|v| -v * u).collect();
        assert!(max_abs_diff(&hs.values(&x).unwrap(), &minus_ps) < 1e-9);
        assert!(max_abs_diff(&hs.values(&x).unwrap(), &hv) < 1e-9);
    }
    let one = DensityField::new(cube(2), Expr::constant(1.0), weight(1)).unwrap();
    let h1 = projective_hessian(&one, &Connection::flat(cube(2))).unwrap();
    assert_eq!(h1.values(&[0.2, 0.3]).unwrap(), vec![0.0; 4]);
}

#[test]
fn hessian_is_representative_independent() {
    let geo = catalog_geometry(&GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 4 }).unwrap();
    let sigma = DensityField::new(geo.chart, random_polynomial(3, 2, 0.4, &mut rng(5)).exp(), weight(1)).unwrap();
    let h0 = projective_hessian(&sigma, &geo.connection).unwrap();
    let points = sample_points(&geo.chart.domain(), 3, 4, 6);
    for k in 0..10 {
        let changed = geo.connection.projective_change(&random_one_form(geo.chart, 2, 0.5, 100 + k)).unwrap();
        let h1 = projective_hessian(&sigma, &changed).unwrap();
        for x in &points {
            assert!(h0.max_abs_diff_at(&h1, x).unwrap() < 1e-9);
        }
    }
}

#[test]
fn monge_ampere_on_the_ball() {
    for n in [2, 3] {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for s in [klein_space(n), flat_ball(n)] {
            let samples = ma_residual(&klein_sigma(n), &s, sign, &ball_points(n, 20, 7)).unwrap();
            for m in &samples {
                assert!(m.residual.abs() < 1e-10, "n={n} {m:?}");
                assert!(m.det_identity_residual.abs() < 1e-9);
                assert!(m.rho_det_derivative < 1e-9);
            }
        }
        let at_origin = ma_residual(&klein_sigma(n), &klein_space(n), sign, &[vec![0.0; n]]).unwrap();
        assert!((at_origin[0].det_h - sign).abs() < 1e-14);
    }
}

#[test]
fn constant_density_is_not_a_solution() {
    let s = BundleSpace::new(Connection::flat(cube(2)));
    let one = DensityField::new(cube(2), Expr::constant(1.0), weight(1)).unwrap();
    let m = ma_residual(&one, &s, 1.0, &[vec![0.1, 0.2]]).unwrap();
    assert_eq!(m[0].det_h, 0.0);
    assert_eq!(m[0].residual, -1.0);
    let c = convexity_certificate(&one, &s, &[vec![0.1, 0.2], vec![-0.3, 0.0]], 1e-9).unwrap();
    assert!(!c.is_ma_solution && !c.rho_positive_definite);
    assert_eq!(c.minimal_lagrangian_residual, 0.0);
    assert_eq!(c.scale, None);
}

#[test]
fn scaling_laws() {
    let n = 3;
    let s = klein_space(n);
    let points = ball_points(n, 5, 8);
    let c = 1.7;
    let a = ma_residual(&klein_sigma(n), &s, -1.0, &points).unwrap();
    let b = ma_residual(&klein_sigma(n).scaled(c), &s, -1.0, &points).unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert!((q.det_h - c.powi(3) * p.det_h).abs() < 1e-10 * p.det_h.abs());
        let (tp, tq) = (p.sigma.powi(-5), q.sigma.powi(-5));
        assert!((tq - c.powi(-5) * tp).abs() < 1e-12 * tp);
    }
}

#[test]
fn klein_density_certificate() {
    for n in [2, 3] {
        for s in [klein_space(n), flat_ball(n)] {
            let c = convexity_certificate(&klein_sigma(n), &s, &ball_points(n, 20, 9), 1e-9).unwrap();
            assert!(c.is_ma_solution && c.rho_positive_definite, "{c:?}");
            assert!(c.minimal_lagrangian_residual < 1e-9);
            assert!((c.scale.unwrap() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn perturbed_density_fails_the_certificate() {
    let n = 2;
    let s = flat_ball(n);
    let sigma = DensityField::new(Chart::unit_ball(n).unwrap(), Expr::parse("(1 - x1^2 - x2^2)^(1/2)*(1 + 0.1*x1)", n).unwrap(), weight(1)).unwrap();
    let points = ball_points(n, 20, 10);
    let c = convexity_certificate(&sigma, &s, &points, 1e-9).unwrap();
    assert!(!c.is_ma_solution);
    assert!(c.ma_residual > 1e-4);
    // equivalence: not a solution, and not minimal Lagrangian
    assert!(!(c.rho_positive_definite && c.minimal_lagrangian_residual <= 1e-9));
}

#[test]
fn certificate_requires_a_flat_class() {
    let geo = catalog_geometry(&GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 3 }).unwrap();
    let s = BundleSpace::new(geo.connection);
    let sigma = DensityField::new(geo.chart, Expr::constant(1.0), weight(1)).unwrap();
    let err = convexity_certificate(&sigma, &s, &[vec![0.1, 0.2, 0.3]], 1e-9).unwrap_err();
    assert!(matches!(err, Error::NotFlat(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn epsilon_contraction_is_the_determinant(vals in prop::collection::vec(-3.0f64..3.0, 9), n in 1usize..4) {
        let m: Vec<f64> = (0..n * n).map(|k| vals[(k / n) * 3 + k % n]).collect();
        let (d, w) = TautologicalVolume::new(n).determinant(&m, weight(1));
        prop_assert!((d - weylab::linalg::det(&m, n)).abs() < 1e-10 * (1.0 + d.abs()));
        prop_assert_eq!(w, weight(-(n as i64) - 2));
    }

    #[test]
    fn hessian_invariance_under_random_changes(seed in 0u64..1000) {
        let chart = cube(2);
        let conn = Connection::flat(chart);
        let sigma = DensityField::new(chart, random_polynomial(2, 3, 0.5, &mut rng(seed)).exp(), weight(1)).unwrap();
        let changed = conn.projective_change(&random_one_form(chart, 2, 0.7, seed + 1)).unwrap();
        let a = projective_hessian(&sigma, &conn).unwrap();
        let b = projective_hessian(&sigma, &changed).unwrap();
        for x in sample_points(&chart.domain(), 2, 3, seed) {
            prop_assert!(a.max_abs_diff_at(&b, &x).unwrap() < 1e-9);
        }
    }
}
