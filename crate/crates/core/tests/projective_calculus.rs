mod common;

use common::*;
use proptest::prelude::*;
use weylab::catalog::{catalog_geometry, GeometrySpec};
use weylab::projective::{density_change_check, rho_change_prediction, riemann, riemann_from_parts};
use weylab::sampling::sample_points;
use weylab::tensor::{multi_indices, weight, Slot, TensorJet};
use weylab::{Connection, Expr, WeightedTensorField};

fn random_poly(n: usize, seed: u64) -> Connection {
    catalog_geometry(&GeometrySpec::RandomPoly { n, degree: 2, seed }).unwrap().connection
}

fn klein(n: usize) -> weylab::Geometry {
    catalog_geometry(&GeometrySpec::KleinBall { n }).unwrap()
}

#[test]
fn klein_curvature_is_constant_minus_one() {
    for n in [2, 3] {
        let geo = klein(n);
        let g = geo.metric.as_ref().unwrap();
        for x in sample_points(&geo.chart.domain(), n, 8, 3) {
            let r = geo.connection.curvature(&x, 0).unwrap().riemann;
            let gv = g.jet(&x, 0).unwrap();
            for idx in multi_indices(4, n) {
                let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
                let lowered: f64 = (0..n).map(|m| gv.value_at(&[k, m]) * r.value_at(&[i, j, m, l])).sum();
                let expected = -(gv.value_at(&[i, k]) * gv.value_at(&[j, l]) - gv.value_at(&[i, l]) * gv.value_at(&[j, k]));
                assert!((lowered - expected).abs() < 1e-9 * (1.0 + expected.abs()), "{idx:?} at {x:?}");
            }
        }
    }
}

#[test]
fn klein_rho_is_the_metric() {
    let geo = klein(3);
    let g = geo.metric.as_ref().unwrap();
    let p0 = geo.connection.rho(&[0.0; 3], 0).unwrap().rho;
    assert!(max_abs_diff(&p0.values(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]) < 1e-12);
    for x in sample_points(&geo.chart.domain(), 3, 10, 1) {
        let p = geo.connection.rho(&x, 0).unwrap().rho.values();
        assert!(rel_diff(&p, &g.values(&x).unwrap()) < 1e-10);
        assert!(geo.connection.weyl(&x, 0).unwrap().weyl.max_abs_value() < 1e-9);
        assert!(geo.connection.cotton_york(&x, 0).unwrap().cy.max_abs_value() < 1e-8);
    }
}

#[test]
fn curvature_matches_finite_differences() {
    let conn = random_poly(2, 11);
    let h = 1e-4;
    for x in sample_points(&conn.chart().domain(), 2, 5, 2) {
        let n = 2;
        let g0 = conn.gamma_jet(&x, 0).unwrap();
        // rebuild a first-order jet of Γ from central differences
        let mut comps = Vec::new();
        for idx in multi_indices(3, n) {
            let mut raw = vec![g0.value_at(&idx)];
            for d in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[d] += h;
                xm[d] -= h;
                let fp = conn.gamma_jet(&xp, 0).unwrap().value_at(&idx);
                let fm = conn.gamma_jet(&xm, 0).unwrap().value_at(&idx);
                raw.push((fp - fm) / (2.0 * h));
            }
            comps.push(weylab::Jet::from_raw_partials(n, 1, &raw));
        }
        let fd_gamma = TensorJet::new(n, vec![Slot::Up, Slot::Down, Slot::Down], weight(0), comps).unwrap();
        let fd = riemann(&fd_gamma).values();
        let exact = conn.curvature(&x, 0).unwrap().riemann.values();
        assert!(rel_diff(&exact, &fd) < 1e-5, "{}", rel_diff(&exact, &fd));
    }
}

#[test]
fn curvature_symmetries_on_random_connections() {
    for (n, seed) in [(2, 1), (3, 2), (4, 3)] {
        let conn = random_poly(n, seed);
        for x in sample_points(&conn.chart().domain(), n, 5, seed) {
            let c = conn.curvature(&x, 0).unwrap();
            assert!(c.antisymmetry_residual() < 1e-12);
            assert!(c.bianchi_residual() < 1e-9);
        }
    }
}

#[test]
fn weyl_is_trace_free_and_recombines() {
    for (n, seed) in [(2, 5), (3, 6), (4, 7)] {
        let conn = random_poly(n, seed);
        for x in sample_points(&conn.chart().domain(), n, 6, seed) {
            let w = conn.weyl(&x, 0).unwrap();
            assert!(w.max_trace() < 1e-9, "n={n} trace {}", w.max_trace());
            let p = conn.rho(&x, 0).unwrap().rho;
            let r = conn.curvature(&x, 0).unwrap().riemann;
            let back = riemann_from_parts(&w.weyl, &p);
            assert!(back.max_abs_diff(&r).unwrap() < 1e-10);
            if n == 2 {
                assert!(w.weyl.max_abs_value() < 1e-10);
            }
        }
    }
}

#[test]
fn random_poly_has_skew_ricci() {
    let conn = random_poly(3, 9);
    let x = [0.1, 0.2, 0.3];
    let p = conn.rho(&x, 0).unwrap().rho;
    assert!(p.alternate(&[0, 1]).unwrap().max_abs_value() > 1e-3);
    // symmetric Ricci exactly when Rho is symmetric
    let ric = conn.curvature(&x, 0).unwrap().ricci;
    let rho_of_sym = weylab::projective::rho_from_ricci(&ric.symmetrize(&[0, 1]).unwrap());
    assert!(rho_of_sym.alternate(&[0, 1]).unwrap().max_abs_value() < 1e-15);
    assert!(rho_of_sym.max_abs_diff(&p.symmetrize(&[0, 1]).unwrap()).unwrap() < 1e-14);
}

#[test]
fn cotton_york_alternation_vanishes() {
    let conn = random_poly(3, 21);
    for x in sample_points(&conn.chart().domain(), 3, 20, 4) {
        let y = conn.cotton_york(&x, 0).unwrap();
        assert!(y.skew_residual() < 1e-14);
        assert!(y.alternation_residual().unwrap() < 1e-9);
    }
}

#[test]
fn levi_civita_of_einstein_metric_has_parallel_rho() {
    let geo = klein(3);
    let g = geo.metric.clone().unwrap();
    let dp = geo.connection.rho_field().covariant_derivative(&geo.connection).unwrap();
    let dg = g.covariant_derivative(&geo.connection).unwrap();
    for x in sample_points(&geo.chart.domain(), 3, 5, 9) {
        assert!(dp.jet(&x, 0).unwrap().max_abs_value() < 1e-9);
        assert!(dg.jet(&x, 0).unwrap().max_abs_value() < 1e-10);
    }
}

#[test]
fn metric_volume_density_is_parallel() {
    for n in [2, 3] {
        let chart = cube(n);
        let g = random_metric(chart, 40 + n as u64);
        let lc = Connection::levi_civita(&g).unwrap();
        let gg = g.clone();
        let vol = WeightedTensorField::from_fn(chart, vec![], weight(-(n as i64) - 1), move |x, k| {
            let m = gg.jet(x, k)?;
            let d = weylab::linalg::det_jets(m.components(), n).sqrt()?;
            Ok(TensorJet::scalar_on(n, d, weight(0)))
        });
        let dv = vol.covariant_derivative(&lc).unwrap();
        let dg = g.covariant_derivative(&lc).unwrap();
        for x in sample_points(&chart.domain(), n, 10, 5) {
            assert!(dv.jet(&x, 0).unwrap().max_abs_value() < 1e-10);
            assert!(dg.jet(&x, 0).unwrap().max_abs_value() < 1e-10);
        }
        // the same density under a projective change picks up wΥσ
        let ups = random_one_form(chart, 2, 0.3, 70 + n as u64);
        let pts = sample_points(&chart.domain(), n, 10, 6);
        assert!(density_change_check(&lc, &ups, &vol, &pts).unwrap() < 1e-10);
    }
}

#[test]
fn density_change_for_weight_zero() {
    let conn = random_poly(2, 3);
    let chart = *conn.chart();
    let f = WeightedTensorField::scalar(chart, Expr::parse("x1^2*x2 + exp(x2)", 2).unwrap(), weight(0)).unwrap();
    let ups = random_one_form(chart, 1, 0.5, 4);
    let pts = sample_points(&chart.domain(), 2, 10, 7);
    assert!(density_change_check(&conn, &ups, &f, &pts).unwrap() < 1e-14);
}

#[test]
fn scalar_gradient_is_connection_independent() {
    let chart = cube(3);
    let f = WeightedTensorField::scalar(chart, Expr::parse("x1*x2 - sqrt(2 + x3)", 3).unwrap(), weight(0)).unwrap();
    let a = f.covariant_derivative(&random_poly(3, 1)).unwrap();
    let b = f.covariant_derivative(&Connection::flat(chart)).unwrap();
    let x = [0.3, -0.2, 0.5];
    assert!(a.max_abs_diff_at(&b, &x).unwrap() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weyl_is_projectively_invariant(seed in 0u64..1000, useed in 0u64..1000, n in 2usize..4) {
        let conn = random_poly(n, seed);
        let ups = random_one_form(*conn.chart(), 2, 0.5, useed);
        let changed = conn.projective_change(&ups).unwrap();
        for x in sample_points(&conn.chart().domain(), n, 3, seed ^ useed) {
            let w = conn.weyl(&x, 0).unwrap().weyl;
            let wh = changed.weyl(&x, 0).unwrap().weyl;
            prop_assert!(w.max_abs_diff(&wh).unwrap() < 1e-9);
        }
    }

    #[test]
    fn rho_change_law(seed in 0u64..1000, useed in 0u64..1000, n in 2usize..4) {
        let conn = random_poly(n, seed);
        let ups = random_one_form(*conn.chart(), 2, 0.5, useed);
        let changed = conn.projective_change(&ups).unwrap();
        for x in sample_points(&conn.chart().domain(), n, 3, seed ^ useed) {
            let predicted = rho_change_prediction(&conn, &ups, &x).unwrap();
            let actual = changed.rho(&x, 0).unwrap().rho;
            prop_assert!(predicted.max_abs_diff(&actual).unwrap() < 1e-9);
        }
    }

    #[test]
    fn leibniz_rule(seed in 0u64..1000, n in 2usize..4) {
        let conn = random_poly(n, seed);
        let chart = *conn.chart();
        let s = random_one_form(chart, 2, 1.0, seed + 1);
        let t = random_metric(chart, seed + 2).reweighted(weight(1));
        let lhs = s.product(&t).unwrap().covariant_derivative(&conn).unwrap();
        let ds = s.covariant_derivative(&conn).unwrap().product(&t).unwrap();
        // S ⊗ ∇T has the derivative slot after S's slot; move it to the front
        let sdt = s.product(&t.covariant_derivative(&conn).unwrap()).unwrap().permute(&[1, 0, 2, 3]).unwrap();
        let rhs = ds.add(&sdt).unwrap();
        for x in sample_points(&chart.domain(), n, 3, seed) {
            prop_assert!(lhs.max_abs_diff_at(&rhs, &x).unwrap() < 1e-10);
        }
    }

    #[test]
    fn symmetrization_projects(seed in 0u64..1000) {
        let chart = cube(3);
        let mut r = rng(seed);
        let comps = (0..27).map(|_| weylab::catalog::random_polynomial(3, 1, 1.0, &mut r)).collect();
        let t = WeightedTensorField::from_exprs(chart, vec![Slot::Down; 3], weight(0), comps).unwrap();
        let s = t.symmetrize(&[0, 1, 2]).unwrap();
        let ss = s.symmetrize(&[0, 1, 2]).unwrap();
        let a = s.alternate(&[0, 1, 2]).unwrap();
        let x = [0.1, 0.5, -0.4];
        prop_assert!(s.max_abs_diff_at(&ss, &x).unwrap() < 1e-12);
        prop_assert!(a.jet(&x, 0).unwrap().max_abs_value() < 1e-12);
    }
}
