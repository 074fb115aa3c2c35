//! The built-in scenarios run by `verify-all`.

use std::collections::BTreeMap;

use crate::catalog::GeometrySpec;
use crate::checks::derive_seed;
use crate::scenario::{CheckName, CheckSpec, OutputSpec, PointPolicy, Scenario, SectionInput, SCHEMA_VERSION};

/// `(1 − |x|²)^{1/2}` in `n` variables.
pub fn ball_density(n: usize) -> String {
    let squares = (1..=n).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" - ");
    format!("(1 - {squares})^(1/2)")
}

/// A positive density with nonconstant Hessian, used by the invariance suite.
pub const SMOOTH_DENSITY_3D: &str = "exp(0.3*x1 - 0.2*x2*x3 + 0.1*x1^2 + 0.15*x3)";

fn scenario(id: &str, geometry: GeometrySpec, checks: &[CheckName], seed: u64) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        id: id.to_string(),
        geometry,
        checks: checks.iter().copied().map(CheckSpec::new).collect(),
        points: PointPolicy { seed, ..PointPolicy::default() },
        tolerances: BTreeMap::new(),
        density: None,
        section: None,
        output: OutputSpec::default(),
    }
}

/// Geometry seeds are derived from `seed`, so the whole suite is determined
/// by it.
pub fn acceptance_scenarios(seed: u64) -> Vec<Scenario> {
    use CheckName::*;
    let poly = |n: usize, salt: u64| GeometrySpec::RandomPoly { n, degree: 2, seed: derive_seed(seed, salt) % 1_000_000 };
    let mut out = Vec::new();

    let bundle_checks = [Closedness, Einstein, CurvatureDictionary, BracketIdentities, CanonicalParallelism, LeviCivitaRoutes];
    for (id, g) in [
        ("bundle-flat-2", GeometrySpec::Flat { n: 2 }),
        ("bundle-flat-3", GeometrySpec::Flat { n: 3 }),
        ("bundle-klein-2", GeometrySpec::KleinBall { n: 2 }),
        ("bundle-poly-2", poly(2, 1)),
        ("bundle-poly-3", poly(3, 2)),
    ] {
        out.push(scenario(id, g, &bundle_checks, seed));
    }

    out.push(scenario("sections-poly-3", poly(3, 3), &[UniversalRho, LineCorrespondence], seed));
    out.push(scenario("sff-poly-2", poly(2, 4), &[SecondFundamentalForms], seed));

    for n in [2, 3] {
        let mut s = scenario(&format!("sff-klein-{n}"), GeometrySpec::KleinBall { n }, &[ClassifySection, SecondFundamentalForms], seed);
        s.section = Some(SectionInput::Zero);
        s.tolerances.insert("second_fundamental_forms.ii_d_max_abs".into(), 1e-9);
        s.tolerances.insert("second_fundamental_forms.ii_h_max_abs".into(), 1e-9);
        out.push(s);
    }

    for n in [2, 3] {
        let mut s = scenario(
            &format!("monge-ampere-klein-{n}"),
            GeometrySpec::KleinBall { n },
            &[WeylFromDensity, RhoEqualsMetric, MaResidual, ConvexityCertificate, SectionResiduals, HessianRecovery, TractorFlatness],
            seed,
        );
        s.density = Some(ball_density(n));
        s.section = Some(SectionInput::Density);
        out.push(s);
    }

    let mut s = scenario(
        "invariance-poly-3",
        poly(3, 5),
        &[WeylInvariance, RhoChangeLaw, HessianInvariance, HessianRecovery, TractorCurvature, EngineSoundness],
        seed,
    );
    s.density = Some(SMOOTH_DENSITY_3D.to_string());
    out.push(s);

    out.push(scenario("tractor-flat-3", GeometrySpec::Flat { n: 3 }, &[TractorFlatness, EngineSoundness], seed));
    out.push(scenario("engine-klein-2", GeometrySpec::KleinBall { n: 2 }, &[EngineSoundness, WeylInvariance, RhoChangeLaw], seed));
    out
}
