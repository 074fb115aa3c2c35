mod common;

use std::time::Instant;

use common::*;
use proptest::prelude::*;
use weylab::bundle::{algebraic_bracket_g0, exterior_derivative_max, omega_tensor, universal_rho_coefficients};
use weylab::catalog::{catalog_geometry, GeometrySpec};
use weylab::sampling::sample_bundle_points;
use weylab::tensor::{weight, Slot, TensorJet};
use weylab::{BundlePoint, BundleSpace, Expr, Jet, WeightedTensorField};

fn space(spec: GeometrySpec) -> BundleSpace {
    BundleSpace::new(catalog_geometry(&spec).unwrap().connection)
}

fn points(space: &BundleSpace, count: usize, seed: u64) -> Vec<BundlePoint> {
    sample_bundle_points(&space.base().chart().domain(), space.n(), count, seed, 1.0)
        .into_iter()
        .map(|(x, psi)| BundlePoint::new(x, psi))
        .collect()
}

fn catalog() -> Vec<GeometrySpec> {
    vec![
        GeometrySpec::Flat { n: 2 },
        GeometrySpec::Flat { n: 3 },
        GeometrySpec::KleinBall { n: 2 },
        GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 3 },
        GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 4 },
    ]
}

#[test]
fn omega_is_closed_across_the_catalog() {
    for spec in catalog() {
        let s = space(spec.clone());
        let start = Instant::now();
        let report = s.einstein_and_closedness(&points(&s, 20, 1)).unwrap();
        assert!(report.max_domega() < 1e-9, "{} dΩ {}", spec.name(), report.max_domega());
        assert!(start.elapsed().as_secs_f64() < 60.0);
    }
}

#[test]
fn h_is_einstein_with_constant_minus_n_plus_one() {
    for spec in catalog() {
        let s = space(spec.clone());
        let n = s.n() as f64;
        let report = s.einstein_and_closedness(&points(&s, 20, 2)).unwrap();
        assert!(report.max_einstein_residual() < 1e-6, "{} {}", spec.name(), report.max_einstein_residual());
        assert!(report.lambda_spread() < 1e-6);
        assert!((report.samples[0].lambda + n + 1.0).abs() < 1e-6, "{} λ={}", spec.name(), report.samples[0].lambda);
    }
}

#[test]
fn einstein_constant_is_gauge_independent() {
    let s = space(GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 8 });
    let ups = random_one_form(*s.base().chart(), 2, 0.4, 9);
    let t = s.regauge(&ups).unwrap();
    let pts = points(&s, 5, 3);
    let a = s.einstein_and_closedness(&pts).unwrap();
    let b = t.einstein_and_closedness(&pts).unwrap();
    for (p, q) in a.samples.iter().zip(&b.samples) {
        assert!((p.lambda - q.lambda).abs() < 1e-6);
    }
}

#[test]
fn forms_transform_under_change_of_base_connection() {
    let s = space(GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 10 });
    let chart = *s.base().chart();
    let ups = random_one_form(chart, 2, 0.4, 11);
    let t = s.regauge(&ups).unwrap();
    for p in points(&s, 8, 4) {
        let u = ups.jet(&p.x, 1).unwrap();
        let n = 3;
        let m = 6;
        // coordinates ψ' = ψ − Υ(x); J = ∂(x, ψ')/∂(x, ψ)
        let q = BundlePoint::new(p.x.clone(), (0..n).map(|j| p.psi[j] - u.value_at(&[j])).collect());
        let mut jac = vec![0.0; m * m];
        for r in 0..m {
            jac[r * m + r] = 1.0;
        }
        for i in 0..n {
            for j in 0..n {
                jac[(n + j) * m + i] = -u.get(&[j]).d1(i);
            }
        }
        let f0 = s.bundle_forms(&p).unwrap();
        let f1 = t.bundle_forms(&q).unwrap();
        let pull = |mat: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    out[a * m + b] = (0..m).flat_map(|c| (0..m).map(move |d| (c, d))).map(|(c, d)| jac[c * m + a] * mat[c * m + d] * jac[d * m + b]).sum();
                }
            }
            out
        };
        assert!(max_abs_diff(&pull(&f1.h), &f0.h) < 1e-12);
        assert!(max_abs_diff(&pull(&f1.omega), &f0.omega) < 1e-12);
    }
}

#[test]
fn adapted_frame_is_null_and_dual() {
    let s = space(GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 12 });
    for p in points(&s, 5, 5) {
        let forms = s.bundle_forms(&p).unwrap();
        let (_, frame) = s.universal_rho(&p).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let (u, v) = (frame.vector(a), frame.vector(b));
                let h = forms.eval_h(&u, &v);
                let w = forms.eval_omega(&u, &v);
                let (ea, eb) = (a < 3, b < 3);
                let dual = if ea != eb && a % 3 == b % 3 { 1.0 } else { 0.0 };
                assert!((h - dual).abs() < 1e-12, "h({a},{b})");
                let expected = if ea && !eb { dual } else if !ea && eb { -dual } else { 0.0 };
                assert!((w - expected).abs() < 1e-12, "Ω({a},{b})");
            }
        }
        let back = frame.to_frame(&frame.to_coords(&[0.3, -1.0, 2.0, 0.5, 0.0, 1.5]));
        assert!(max_abs_diff(&back, &[0.3, -1.0, 2.0, 0.5, 0.0, 1.5]) < 1e-14);
    }
}

#[test]
fn curvature_dictionary_holds() {
    for spec in [
        GeometrySpec::KleinBall { n: 2 },
        GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 13 },
        GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 14 },
    ] {
        let s = space(spec.clone());
        for p in points(&s, 4, 6) {
            let d = s.curvature_dictionary(&p).unwrap();
            assert!(d.torsion_plus < 1e-10, "{} {d:?}", spec.name());
            assert!(d.torsion_minus < 1e-9, "{} {d:?}", spec.name());
            assert!(d.rho_minus < 1e-9 && d.rho_mixed < 1e-9 && d.rho_plus < 1e-9, "{} {d:?}", spec.name());
        }
    }
}

#[test]
fn random_poly_in_three_dimensions_has_weyl_and_cotton_york() {
    let s = space(GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 14 });
    let p = &points(&s, 1, 6)[0];
    let tc = s.torsion_curvature_d(p).unwrap();
    let worst = (0..3).flat_map(|c| (0..3).map(move |b| (c, b))).map(|(c, b)| tc.torsion(3 + c, 0, b).abs()).fold(0.0, f64::max);
    assert!(worst > 1e-3);
    assert!(s.base().weyl(&p.x, 0).unwrap().weyl.max_abs_value() > 1e-3);
}

#[test]
fn torsion_matches_cotton_york_of_a_nonconstant_section() {
    let s = space(GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 15 });
    let chart = *s.base().chart();
    let section = random_one_form(chart, 2, 0.7, 16);
    let weyl = s.base().projective_change(&section).unwrap();
    for x in weylab::sampling::sample_points(&chart.domain(), 2, 5, 7) {
        let p = BundlePoint::new(x.clone(), section.values(&x).unwrap());
        let tc = s.torsion_curvature_d(&p).unwrap();
        let y = weyl.cotton_york(&x, 0).unwrap().cy;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!((tc.torsion(2 + k, i, j) - y.value_at(&[i, j, k])).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn levi_civita_of_h_two_routes() {
    for spec in catalog() {
        let s = space(spec.clone());
        for p in points(&s, 3, 8) {
            let lc = s.levi_civita_h(&p).unwrap();
            assert!(lc.route_difference() < 1e-10, "{} {}", spec.name(), lc.route_difference());
        }
    }
}

#[test]
fn canonical_connection_preserves_h_and_omega() {
    for spec in catalog() {
        let s = space(spec.clone());
        for p in points(&s, 3, 9) {
            let (dh, dw) = s.parallelism_residuals(&p).unwrap();
            assert!(dh < 1e-10 && dw < 1e-10, "{} {dh} {dw}", spec.name());
        }
    }
}

#[test]
fn lie_bracket_identities() {
    for spec in [GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 17 }, GeometrySpec::RandomPoly { n: 3, degree: 2, seed: 18 }] {
        let s = space(spec);
        let chart = *s.base().chart();
        let n = chart.dim();
        let vector = |seed| {
            let f = random_one_form(chart, 2, 1.0, seed);
            WeightedTensorField::from_fn(chart, vec![Slot::Up], weight(0), move |x, k| {
                Ok(TensorJet::new(n, vec![Slot::Up], weight(0), f.jet(x, k)?.components().to_vec())?)
            })
        };
        let (xi, eta) = (vector(1), vector(2));
        let (alpha, beta) = (random_one_form(chart, 2, 1.0, 3), random_one_form(chart, 2, 1.0, 4));
        for p in points(&s, 5, 10) {
            let r = s.bracket_identities(&p, &xi, &eta, &alpha, &beta).unwrap();
            assert!(r.max() < 1e-9, "{r:?}");
        }
    }
}

#[test]
fn minus_distribution_is_involutive_only_without_cotton_york() {
    let flat = space(GeometrySpec::Flat { n: 2 });
    let klein = space(GeometrySpec::KleinBall { n: 3 });
    let curved = space(GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 19 });
    for p in points(&flat, 3, 11) {
        assert!(flat.involutivity_defects(&p).unwrap().0 < 1e-12);
    }
    for p in points(&klein, 3, 11) {
        let (minus, plus) = klein.involutivity_defects(&p).unwrap();
        assert!(minus < 1e-9 && plus == 0.0);
    }
    let p = &points(&curved, 1, 11)[0];
    let (minus, plus) = curved.involutivity_defects(p).unwrap();
    let y = curved.universal_cotton_york(p).unwrap().max_abs_value();
    assert!(y > 1e-3 && (minus - y).abs() < 1e-9 && plus == 0.0);
}

#[test]
fn canonical_connection_pulls_back_to_the_weyl_connection() {
    let s = space(GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 20 });
    let chart = *s.base().chart();
    let section = random_one_form(chart, 2, 0.5, 21);
    let weyl = s.base().projective_change(&section).unwrap();
    // η̃ = η^i ẽ_i with η = (x1 x2, 1 + x2²)
    let eta_src = ["x1*x2", "1 + x2^2", "0", "0"];
    let coeffs: Vec<Expr> = eta_src.iter().map(|e| Expr::parse_bundle(e, 2).unwrap()).collect();
    let eta = WeightedTensorField::from_exprs(chart, vec![Slot::Up], weight(0), coeffs[..2].iter().map(|e| Expr::parse(&e.to_string(), 2).unwrap()).collect()).unwrap();
    let deta = eta.covariant_derivative(&weyl).unwrap();
    for x in weylab::sampling::sample_points(&chart.domain(), 2, 4, 12) {
        let sj = section.jet(&x, 1).unwrap();
        let p = BundlePoint::new(x.clone(), sj.values());
        let rho = universal_rho_coefficients(
            &s.base().rho(&x, 0).unwrap().rho,
            &s.base().gamma_jet(&x, 0).unwrap(),
            &sj.components().iter().map(|j| j.truncate(0)).collect::<Vec<Jet>>(),
        );
        let expected = deta.jet(&x, 0).unwrap();
        for i in 0..2 {
            // tangent of the section along ∂_i in frame components: (e_i, Pˢ_i·)
            let mut dir = vec![0.0; 4];
            dir[i] = 1.0;
            for j in 0..2 {
                dir[2 + j] = sj.get(&[j]).d1(i) + rho.value_at(&[i, j]);
            }
            let got = s.canonical_connection_apply(&p, &coeffs, &dir).unwrap();
            for k in 0..2 {
                assert!((got[k] - expected.value_at(&[i, k])).abs() < 1e-10);
                assert!(got[2 + k].abs() < 1e-12);
            }
        }
    }
}

#[test]
fn closedness_matches_finite_differences() {
    let s = space(GeometrySpec::RandomPoly { n: 2, degree: 2, seed: 22 });
    let p = &points(&s, 1, 13)[0];
    let h = 1e-5;
    let jets = s.jets(p, 1).unwrap();
    let omega = omega_tensor(&jets.a);
    let d = omega.partial();
    let coords = p.coords();
    for l in 0..4 {
        let at = |delta: f64| {
            let mut c = coords.clone();
            c[l] += delta;
            s.bundle_forms(&BundlePoint::new(c[..2].to_vec(), c[2..].to_vec())).unwrap().omega
        };
        let (fp, fm) = (at(h), at(-h));
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let exact: Vec<f64> = (0..16).map(|k| d.value_at(&[l, k / 4, k % 4])).collect();
        let scale = 1.0 + exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(&exact, &fd) / scale < 1e-5, "{l} {exact:?} {fd:?}");
    }
    assert!(exterior_derivative_max(&omega) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bracket_is_bilinear_and_traces(xi in prop::collection::vec(-2.0f64..2.0, 3), al in prop::collection::vec(-2.0f64..2.0, 3), t in -3.0f64..3.0) {
        let a = algebraic_bracket_g0(&xi, &al);
        let scaled: Vec<f64> = xi.iter().map(|v| v * t).collect();
        let b = algebraic_bracket_g0(&scaled, &al);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u * t - v).abs() < 1e-12);
        }
        // the g₊ block is minus the transpose of the g₋ block
        for k in 0..3 {
            for l in 0..3 {
                prop_assert!((a[(3 + k) * 6 + 3 + l] + a[l * 6 + k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn omega_stays_closed(seed in 0u64..500, n in 2usize..4) {
        let s = space(GeometrySpec::RandomPoly { n, degree: 2, seed });
        for p in points(&s, 2, seed) {
            prop_assert!(s.einstein_at(&p).unwrap().domega_residual < 1e-9);
        }
    }
}
