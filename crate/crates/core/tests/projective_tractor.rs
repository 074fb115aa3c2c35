mod common;

use common::*;
use proptest::prelude::*;
use weylab::catalog::{catalog_geometry, random_polynomial, GeometrySpec};
use weylab::mongeampere::projective_hessian;
use weylab::sampling::sample_points;
use weylab::tensor::{weight, Slot};
use weylab::tractor::*;
use weylab::{BundleSpace, Chart, Connection, DensityField, Error, Expr, WeightedTensorField, WeylSection};

fn geometry(spec: GeometrySpec) -> weylab::Geometry {
    catalog_geometry(&spec).unwrap()
}

fn random_cotractor(chart: Chart, conn: &Connection, seed: u64) -> CotractorField {
    let mut r = rng(seed);
    let n = chart.dim();
    let sigma = WeightedTensorField::scalar(chart, random_polynomial(n, 3, 1.0, &mut r), weight(1)).unwrap();
    let mu = random_one_form(chart, 3, 1.0, seed + 1).reweighted(weight(1));
    CotractorField::new(sigma, mu, conn.clone()).unwrap()
}

#[test]
fn flat_model_is_flat() {
    for spec in [GeometrySpec::Flat { n: 2 }, GeometrySpec::Flat { n: 3 }, GeometrySpec::KleinBall { n: 2 }, GeometrySpec::KleinBall { n: 3 }] {
        let g = geometry(spec.clone());
        for x in sample_points(&g.chart.domain(), g.chart.dim(), 6, 1) {
            let k = tractor_curvature(&g.connection, &x, COTRACTOR_SIGN).unwrap();
            assert!(k.max_abs() < 1e-10, "{} {}", spec.name(), k.max_abs());
        }
    }
}

#[test]
fn opposite_sign_is_not_flat_on_the_klein_model() {
    let g = geometry(GeometrySpec::KleinBall { n: 2 });
    let k = tractor_curvature(&g.connection, &[0.2, -0.1], 1.0).unwrap();
    assert!(k.max_abs() > 0.5);
}

#[test]
fn flat_model_second_derivative_commutes() {
    // antisymmetrized second derivative of a random polynomial cotractor on
    // flat space, through the field-level API
    let chart = Chart::new(2, weylab::Domain::Cube { half_width: 1.0 }).unwrap();
    let t = random_cotractor(chart, &Connection::flat(chart), 3);
    let d = cotractor_derivative(&t, COTRACTOR_SIGN).unwrap();
    let conn = Connection::flat(chart);
    // differentiate the form: σ-part ∇_aτ_b − ν_{ba}, μ-part ∇_aν_{bc} + cP_{ac}τ_b (P = 0)
    let dt = d.sigma_part.covariant_derivative(&conn).unwrap();
    let dn = d.mu_part.covariant_derivative(&conn).unwrap();
    for x in sample_points(&chart.domain(), 2, 5, 2) {
        let dtv = dt.values(&x).unwrap();
        let nv = d.mu_part.values(&x).unwrap();
        let dnv = dn.values(&x).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let s_ab = dtv[a * 2 + b] - nv[b * 2 + a];
                let s_ba = dtv[b * 2 + a] - nv[a * 2 + b];
                assert!((s_ab - s_ba).abs() < 1e-10);
                for c in 0..2 {
                    assert!((dnv[(a * 2 + b) * 2 + c] - dnv[(b * 2 + a) * 2 + c]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn curvature_blocks_reproduce_weyl_and_cotton_york() {
    for (n, seed) in [(2, 1), (3, 2), (3, 5)] {
        let g = geometry(GeometrySpec::RandomPoly { n, degree: 2, seed });
        for x in sample_points(&g.chart.domain(), n, 5, seed) {
            let k = tractor_curvature(&g.connection, &x, COTRACTOR_SIGN).unwrap();
            let e = expected_tractor_curvature(&g.connection, &x).unwrap();
            assert!(k.sigma_row_max() < 1e-10);
            assert!(k.max_abs_diff(&e) < 1e-9, "{}", k.max_abs_diff(&e));
            assert!(k.max_abs() > 1e-3);
        }
    }
}

#[test]
fn derivative_is_representative_independent() {
    let g = geometry(GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 7 });
    let t = random_cotractor(g.chart, &g.connection, 8);
    let ups = random_one_form(g.chart, 2, 0.5, 9);
    let moved = t.change_representative(&ups).unwrap();
    let d0 = cotractor_derivative(&t, COTRACTOR_SIGN).unwrap();
    let d1 = cotractor_derivative(&moved, COTRACTOR_SIGN).unwrap();
    for x in sample_points(&g.chart.domain(), 3, 5, 3) {
        let u = ups.values(&x).unwrap();
        let (s0, m0) = (d0.sigma_part.values(&x).unwrap(), d0.mu_part.values(&x).unwrap());
        let (s1, m1) = (d1.sigma_part.values(&x).unwrap(), d1.mu_part.values(&x).unwrap());
        for a in 0..3 {
            // each form component transforms as a cotractor
            let before: Vec<f64> = std::iter::once(s0[a]).chain((0..3).map(|c| m0[a * 3 + c])).collect();
            let after: Vec<f64> = std::iter::once(s1[a]).chain((0..3).map(|c| m1[a * 3 + c])).collect();
            assert!(max_abs_diff(&change_components(&before, &u), &after) < 1e-10);
        }
    }
    // and the change law round-trips
    let back = moved.change_representative(&ups.scale(-1.0)).unwrap();
    let x = [0.1, 0.2, -0.3];
    assert!(max_abs_diff(&back.values(&x).unwrap(), &t.values(&x).unwrap()) < 1e-12);
}

#[test]
fn splitting_and_hessian_recovery() {
    let flat = Connection::flat(cube(2));
    let one = DensityField::new(cube(2), Expr::constant(1.0), weight(1)).unwrap();
    assert_eq!(bgg_split(&one, &flat).unwrap().values(&[0.3, 0.4]).unwrap(), vec![1.0, 0.0, 0.0]);

    let klein = geometry(GeometrySpec::KleinBall { n: 2 });
    let sigma = DensityField::new(klein.chart, Expr::parse("(1 - x1^2 - x2^2)^(1/2)", 2).unwrap(), weight(1)).unwrap();
    let s = bgg_split(&sigma, &klein.connection).unwrap();
    assert!(max_abs_diff(&s.values(&[0.0, 0.0]).unwrap(), &[1.0, 0.0, 0.0]) < 1e-15);

    for (n, seed) in [(2, 3), (3, 4)] {
        let g = geometry(GeometrySpec::RandomPoly { n, degree: 2, seed });
        let sigma = DensityField::new(g.chart, random_polynomial(n, 2, 0.5, &mut rng(seed)).exp(), weight(1)).unwrap();
        let split = bgg_split(&sigma, &g.connection).unwrap();
        let d = cotractor_derivative(&split, COTRACTOR_SIGN).unwrap();
        let h = projective_hessian(&sigma, &g.connection).unwrap();
        let sym_mu = d.mu_part.symmetrize(&[0, 1]).unwrap();
        for x in sample_points(&g.chart.domain(), n, 5, seed) {
            assert!(d.sigma_part.jet(&x, 0).unwrap().max_abs_value() < 1e-12);
            assert!(sym_mu.max_abs_diff_at(&h, &x).unwrap() < 1e-9);
            assert_eq!(split.values(&x).unwrap()[0], sigma.value(&x).unwrap());
        }
    }
}

#[test]
fn line_correspondence() {
    let g = geometry(GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 6 });
    let space = BundleSpace::new(g.connection.clone());
    let x = [0.2, -0.1, 0.4];
    assert_eq!(line_of_section(&WeylSection::zero(space.clone()), &x).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    for seed in 0..25 {
        let psi = random_one_form(g.chart, 2, 1.0, 200 + seed);
        let s = WeylSection::new(space.clone(), psi.clone()).unwrap();
        let line = line_of_section(&s, &x).unwrap();
        assert!(is_transversal(&line));
        assert_eq!(section_from_line(&line).unwrap(), psi.values(&x).unwrap());
        // any spanning vector gives the same section
        let scaled: Vec<f64> = line.iter().map(|v| v * -2.5).collect();
        assert!(max_abs_diff(&section_from_line(&scaled).unwrap(), &psi.values(&x).unwrap()) < 1e-15);
        // covariance: in the representative changed by Υ the line is the
        // affine image and the section becomes ψ − Υ
        let ups = random_one_form(g.chart, 1, 0.5, 300 + seed);
        let u = ups.values(&x).unwrap();
        let moved = change_components(&line, &u);
        let expected: Vec<f64> = psi.values(&x).unwrap().iter().zip(&u).map(|(p, v)| p - v).collect();
        assert!(max_abs_diff(&section_from_line(&moved).unwrap(), &expected) < 1e-12);
        let regauged = WeylSection::new(space.regauge(&ups).unwrap(), psi.sub(&ups).unwrap()).unwrap();
        assert!(max_abs_diff(&line_of_section(&regauged, &x).unwrap(), &moved) < 1e-12);
    }
    assert_eq!(section_from_line(&[0.0, 1.0, 2.0, 3.0]), Err(Error::Transversality));
}

#[test]
fn jets_vanishing_at_a_point_are_not_transversal() {
    let chart = cube(2);
    let conn = Connection::flat(chart);
    let sigma = DensityField::new(chart, Expr::parse("(x1 - 0.25)*(1 + x2)", 2).unwrap(), weight(1)).unwrap();
    let s = bgg_split(&sigma, &conn).unwrap();
    assert!(!is_transversal(&s.values(&[0.25, 0.5]).unwrap()));
    assert!(is_transversal(&s.values(&[0.3, 0.5]).unwrap()));
}

#[test]
fn rejects_wrong_weights() {
    let chart = cube(2);
    let conn = Connection::flat(chart);
    let sigma = WeightedTensorField::scalar(chart, Expr::constant(1.0), weight(0)).unwrap();
    let mu = WeightedTensorField::zero(chart, vec![Slot::Down], weight(1));
    assert!(matches!(CotractorField::new(sigma, mu, conn), Err(Error::Shape(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn change_law_round_trips(v in prop::collection::vec(-5.0f64..5.0, 4), u in prop::collection::vec(-5.0f64..5.0, 3)) {
        let moved = change_components(&v, &u);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let back = change_components(&moved, &neg);
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_is_tensorial_under_changes(seed in 0u64..500, useed in 0u64..500) {
        // the Weyl and Cotton–York data change, but the σ row stays zero and
        // the blocks follow the changed representative
        let g = geometry(GeometrySpec::RandomPoly { n: 3, degree: 2, seed });
        let changed = g.connection.projective_change(&random_one_form(g.chart, 2, 0.4, useed)).unwrap();
        let x = [0.1, -0.2, 0.3];
        let k = tractor_curvature(&changed, &x, COTRACTOR_SIGN).unwrap();
        prop_assert!(k.sigma_row_max() < 1e-10);
        prop_assert!(k.max_abs_diff(&expected_tractor_curvature(&changed, &x).unwrap()) < 1e-9);
    }
}
