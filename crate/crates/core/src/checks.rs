//! The named check suites and the scenario runner.
//!
//! Every check turns into [`Record`]s: one group per sample point (in point
//! order) followed by per-check aggregates. A quantity is either measured
//! against a tolerance, a boolean flag, or informational. Informational
//! quantities become measured when the scenario sets a `check.quantity`
//! tolerance for them.

use std::time::Instant;

use rayon::prelude::*;

use crate::bundle::{BundlePoint, BundleSpace};
use crate::catalog::{catalog_geometry, random_metric, random_one_form, random_polynomial, random_vector_field, Geometry};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::WeightedTensorField;
use crate::jet::Jet;
use crate::mongeampere::{
    convexity_certificate, ma_residual, parallel_residual, projective_hessian, random_lagrangian_section, weyl_from_density, DensityField,
};
use crate::projective::{rho_change_prediction, riemann, Connection};
use crate::report::{CheckReport, Record, ScenarioReport};
use crate::sampling::{fiber_coordinates, sample_points};
use crate::scenario::{CheckName, CheckSpec, Scenario, SectionInput};
use crate::section::{classify_section, Ambient, SectionTolerances, WeylSection, PULLBACK_TOL};
use crate::tensor::{multi_indices, weight, Slot, TensorJet};
use crate::tractor::{
    bgg_split, change_components, cotractor_derivative, expected_tractor_curvature, is_transversal, line_of_section, section_from_line,
    tractor_curvature, COTRACTOR_SIGN,
};

/// Number of random changes of representative used by the invariance checks.
pub const RANDOM_CHANGES: usize = 10;
/// Step of the central differences in `engine_soundness`.
pub const FD_STEP: f64 = 1e-4;
/// Below this scale relative differences fall back to absolute ones.
pub const RELATIVE_FLOOR: f64 = 1e-9;

/// Command-line adjustments applied on top of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub tol_scale: f64,
    pub points: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tol_scale: 1.0, points: None, seed: None }
    }
}

/// `|a − b|_∞` divided by the larger sup-norm of the two, or absolute when
/// both are below [`RELATIVE_FLOOR`].
pub fn relative_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > RELATIVE_FLOOR {
        diff / scale
    } else {
        diff
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Seed for the `salt`-th random object of a run.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt.wrapping_mul(0xbf58_476d_1ce4_e5b9).wrapping_add(salt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Tol(f64),
    Flag,
    Info,
}

#[derive(Debug, Clone, PartialEq)]
struct Measure {
    quantity: String,
    value: f64,
    kind: Kind,
}

fn tol(quantity: impl Into<String>, value: f64, default: f64) -> Measure {
    Measure { quantity: quantity.into(), value, kind: Kind::Tol(default) }
}

fn flag(quantity: impl Into<String>, ok: bool) -> Measure {
    Measure { quantity: quantity.into(), value: if ok { 1.0 } else { 0.0 }, kind: Kind::Flag }
}

fn info(quantity: impl Into<String>, value: f64) -> Measure {
    Measure { quantity: quantity.into(), value, kind: Kind::Info }
}

/// Everything a check needs: the geometry, the sample points and the
/// tolerance policy.
pub struct Context {
    pub scenario: Scenario,
    pub geometry: Geometry,
    pub space: BundleSpace,
    pub points: Vec<Vec<f64>>,
    /// Fiber coordinates paired with `points` for checks on the bundle.
    pub fibers: Vec<Vec<f64>>,
    pub seed: u64,
    pub tol_scale: f64,
}

impl Context {
    pub fn new(scenario: &Scenario, opts: &RunOptions) -> Result<Self> {
        if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
            return Err(Error::Scenario(format!("tolerance scale must be positive, got {}", opts.tol_scale)));
        }
        let geometry = catalog_geometry(&scenario.geometry)?;
        let n = geometry.chart.dim();
        let policy = &scenario.points;
        let seed = opts.seed.unwrap_or(policy.seed);
        let points = match &policy.explicit {
            Some(pts) => {
                for x in pts {
                    geometry.chart.check_point(x).map_err(|e| Error::Scenario(format!("explicit point: {e}")))?;
                }
                pts.clone()
            }
            None => {
                let count = opts.points.unwrap_or(policy.count);
                if count == 0 {
                    return Err(Error::Scenario("point count must be positive".into()));
                }
                sample_points(&geometry.chart.domain(), n, count, seed)
            }
        };
        let fibers = fiber_coordinates(n, points.len(), seed, policy.fiber_scale);
        let space = BundleSpace::new(geometry.connection.clone());
        Ok(Context { scenario: scenario.clone(), geometry, space, points, fibers, seed, tol_scale: opts.tol_scale })
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    fn chart(&self) -> crate::chart::Chart {
        self.geometry.chart
    }

    fn bundle_points(&self) -> Vec<BundlePoint> {
        self.points.iter().zip(&self.fibers).map(|(x, psi)| BundlePoint::new(x.clone(), psi.clone())).collect()
    }

    /// Effective tolerance of `quantity` (section labels in brackets are
    /// ignored): `check.quantity` key, then the check's own `tol`, then the
    /// `check` key, then `default`; all scaled by the run's tolerance scale.
    fn tolerance(&self, spec: &CheckSpec, quantity: &str, default: Option<f64>) -> Option<f64> {
        let base = quantity.split('[').next().unwrap_or(quantity);
        let name = spec.name.as_str();
        let t = self.scenario.tolerances.get(&format!("{name}.{base}")).copied().or_else(|| {
            default.map(|d| spec.tol.or_else(|| self.scenario.tolerances.get(name).copied()).unwrap_or(d))
        });
        t.map(|t| t * self.tol_scale)
    }

    fn seed_for(&self, check: CheckName, salt: u64) -> u64 {
        derive_seed(self.seed, (check as u64) << 32 | salt)
    }

    fn density(&self, check: CheckName) -> Result<DensityField> {
        let src = self.scenario.density.as_deref().ok_or_else(|| Error::Scenario(format!("check '{check}' needs a density")))?;
        DensityField::new(self.chart(), Expr::parse(src, self.n())?, weight(1))
    }

    fn random_changes(&self, check: CheckName) -> Vec<WeightedTensorField> {
        (0..RANDOM_CHANGES as u64).map(|k| random_one_form(self.chart(), 2, 0.5, self.seed_for(check, 1000 + k))).collect()
    }

    /// Sections for a section-based check: the scenario's own input if it
    /// has one, `default` otherwise.
    fn sections(&self, check: CheckName, default: SectionInput) -> Result<Vec<(String, WeylSection)>> {
        let input = self.scenario.section.clone().unwrap_or(default);
        let n = self.n();
        Ok(match input {
            SectionInput::Zero => vec![("zero".into(), WeylSection::zero(self.space.clone()))],
            SectionInput::Expressions { psi } => {
                if psi.len() != n {
                    return Err(Error::Scenario(format!("section needs {n} components, got {}", psi.len())));
                }
                let comps = psi.iter().map(|e| Expr::parse(e, n)).collect::<Result<Vec<_>>>()?;
                vec![("expressions".into(), WeylSection::from_exprs(self.space.clone(), comps)?)]
            }
            SectionInput::Density => {
                vec![("density".into(), weyl_from_density(&self.density(check)?, &self.space, &self.points)?)]
            }
            SectionInput::RandomPolynomial { count, degree } => (0..count)
                .map(|k| {
                    let psi = random_one_form(self.chart(), degree, 0.8, self.seed_for(check, 100 + k as u64));
                    Ok((format!("poly{k}"), WeylSection::new(self.space.clone(), psi)?))
                })
                .collect::<Result<_>>()?,
            SectionInput::RandomLagrangian { count } => (0..count)
                .map(|k| {
                    let s = random_lagrangian_section(&self.space, self.seed_for(check, 200 + k as u64), &self.points)?;
                    Ok((format!("lagrangian{k}"), s))
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// Collects the records of one check.
struct Sink<'a> {
    ctx: &'a Context,
    spec: &'a CheckSpec,
    records: Vec<Record>,
}

impl<'a> Sink<'a> {
    fn push(&mut self, point: Option<(usize, Vec<f64>)>, m: Measure) {
        let (tol, pass) = match m.kind {
            Kind::Tol(d) => {
                let t = self.ctx.tolerance(self.spec, &m.quantity, Some(d)).expect("default given");
                (Some(t), m.value.is_finite() && m.value.abs() <= t)
            }
            Kind::Flag => (None, m.value == 1.0),
            Kind::Info => match self.ctx.tolerance(self.spec, &m.quantity, None) {
                Some(t) => (Some(t), m.value.is_finite() && m.value.abs() <= t),
                None => (None, true),
            },
        };
        let (point_index, point_coords) = match point {
            Some((i, c)) => (Some(i), Some(c)),
            None => (None, None),
        };
        self.records.push(Record {
            scenario_id: self.ctx.scenario.id.clone(),
            check: self.spec.name.as_str().to_string(),
            point_index,
            point_coords,
            quantity: m.quantity,
            value: m.value,
            tol,
            pass,
        });
    }

    fn aggregate(&mut self, m: Measure) {
        self.push(None, m);
    }

    /// Evaluates `f` at every base point in parallel and records the results
    /// in point order.
    fn per_point(&mut self, f: impl Fn(usize, &[f64]) -> Result<Vec<Measure>> + Sync) -> Result<()> {
        let results = self.ctx.points.par_iter().enumerate().map(|(i, x)| f(i, x)).collect::<Result<Vec<_>>>()?;
        for (i, ms) in results.into_iter().enumerate() {
            for m in ms {
                self.push(Some((i, self.ctx.points[i].clone())), m);
            }
        }
        Ok(())
    }

    /// Like [`Sink::per_point`] on the bundle; coordinates are `(x, ψ)`.
    fn per_bundle_point(&mut self, f: impl Fn(&BundlePoint) -> Result<Vec<Measure>> + Sync) -> Result<()> {
        let pts = self.ctx.bundle_points();
        let results = pts.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
        for (i, (p, ms)) in pts.iter().zip(results).enumerate() {
            for m in ms {
                self.push(Some((i, p.coords())), m);
            }
        }
        Ok(())
    }

    /// Evaluates `f` for every (point, section) pair; quantities get the
    /// section label appended in brackets.
    fn per_point_section(
        &mut self,
        sections: &[(String, WeylSection)],
        f: impl Fn(usize, &WeylSection, &[f64]) -> Result<Vec<Measure>> + Sync,
    ) -> Result<()> {
        let pairs: Vec<(usize, usize)> = (0..self.ctx.points.len()).flat_map(|i| (0..sections.len()).map(move |k| (i, k))).collect();
        let results =
            pairs.par_iter().map(|&(i, k)| f(k, &sections[k].1, &self.ctx.points[i])).collect::<Result<Vec<_>>>()?;
        for (&(i, k), ms) in pairs.iter().zip(results) {
            for mut m in ms {
                m.quantity = format!("{}[{}]", m.quantity, sections[k].0);
                self.push(Some((i, self.ctx.points[i].clone())), m);
            }
        }
        Ok(())
    }
}

/// Runs one check. Numerical failures are recorded on the report; input
/// errors are returned.
pub fn run_check(ctx: &Context, spec: &CheckSpec) -> Result<CheckReport> {
    let start = Instant::now();
    let mut sink = Sink { ctx, spec, records: Vec::new() };
    let outcome = dispatch(&mut sink);
    let wall_time_s = start.elapsed().as_secs_f64();
    let error = match outcome {
        Ok(()) => None,
        Err(e) if e.is_numerical() => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let pass = error.is_none() && sink.records.iter().all(|r| r.pass);
    Ok(CheckReport { check: spec.name.as_str().to_string(), pass, wall_time_s, error, records: sink.records })
}

/// Runs every check of `scenario`, in parallel, reporting in listed order.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<ScenarioReport> {
    scenario.validate()?;
    let start = Instant::now();
    let ctx = Context::new(scenario, opts)?;
    let checks = scenario.checks.par_iter().map(|c| run_check(&ctx, c)).collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport {
        scenario_id: scenario.id.clone(),
        schema_version: scenario.schema_version,
        geometry: scenario.geometry.name(),
        pass: checks.iter().all(|c| c.pass),
        wall_time_s: start.elapsed().as_secs_f64(),
        checks,
    })
}

fn dispatch(sink: &mut Sink) -> Result<()> {
    match sink.spec.name {
        CheckName::Closedness => closedness(sink),
        CheckName::Einstein => einstein(sink),
        CheckName::CurvatureDictionary => curvature_dictionary(sink),
        CheckName::BracketIdentities => bracket_identities(sink),
        CheckName::CanonicalParallelism => canonical_parallelism(sink),
        CheckName::LeviCivitaRoutes => levi_civita_routes(sink),
        CheckName::UniversalRho => universal_rho(sink),
        CheckName::ClassifySection => classify(sink),
        CheckName::SecondFundamentalForms => second_fundamental_forms(sink),
        CheckName::SectionResiduals => section_residuals(sink),
        CheckName::WeylFromDensity => weyl_structure_of_density(sink),
        CheckName::RhoEqualsMetric => rho_equals_metric(sink),
        CheckName::HessianInvariance => hessian_invariance(sink),
        CheckName::MaResidual => monge_ampere(sink),
        CheckName::ConvexityCertificate => certificate(sink),
        CheckName::WeylInvariance => weyl_invariance(sink),
        CheckName::RhoChangeLaw => rho_change_law(sink),
        CheckName::TractorFlatness => tractor_flatness(sink),
        CheckName::TractorCurvature => tractor_blocks(sink),
        CheckName::LineCorrespondence => line_correspondence(sink),
        CheckName::HessianRecovery => hessian_recovery(sink),
        CheckName::EngineSoundness => engine_soundness(sink),
    }
}

fn closedness(sink: &mut Sink) -> Result<()> {
    let space = &sink.ctx.space;
    sink.per_bundle_point(|p| Ok(vec![tol("max_abs_domega", space.closedness_at(p)?, 1e-9)]))
}

fn einstein(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let space = &ctx.space;
    let ups = random_one_form(ctx.chart(), 2, 0.4, ctx.seed_for(CheckName::Einstein, 0));
    let shifted = space.regauge(&ups)?;
    sink.per_bundle_point(|p| {
        let a = space.einstein_at(p)?;
        let u = ups.values(&p.x)?;
        let q = BundlePoint::new(p.x.clone(), p.psi.iter().zip(&u).map(|(s, v)| s - v).collect());
        let b = shifted.einstein_at(&q)?;
        Ok(vec![
            tol("einstein_residual", a.einstein_residual, 1e-6),
            tol("shifted_einstein_residual", b.einstein_residual, 1e-6),
            info("lambda", a.lambda),
            tol("lambda_gauge_shift", (a.lambda - b.lambda).abs(), 1e-6),
        ])
    })?;
    let lambdas: Vec<f64> = sink.records.iter().filter(|r| r.quantity == "lambda").map(|r| r.value).collect();
    let l0 = lambdas[0];
    let spread = lambdas.iter().map(|l| (l - l0).abs()).fold(0.0, f64::max);
    let expected = -(ctx.n() as f64 + 1.0);
    sink.aggregate(info("lambda", l0));
    sink.aggregate(tol("lambda_spread", spread, 1e-6));
    sink.aggregate(tol("lambda_offset", (l0 - expected).abs(), 1e-6));
    Ok(())
}

fn curvature_dictionary(sink: &mut Sink) -> Result<()> {
    let space = &sink.ctx.space;
    sink.per_bundle_point(|p| {
        let d = space.curvature_dictionary(p)?;
        Ok(vec![
            tol("torsion_plus", d.torsion_plus, 1e-10),
            tol("torsion_minus", d.torsion_minus, 1e-9),
            tol("rho_minus", d.rho_minus, 1e-9),
            tol("rho_mixed", d.rho_mixed, 1e-9),
            tol("rho_plus", d.rho_plus, 1e-9),
        ])
    })
}

fn bracket_identities(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let c = ctx.chart();
    let seed = |k| ctx.seed_for(CheckName::BracketIdentities, k);
    let (xi, eta) = (random_vector_field(c, 2, 1.0, seed(1)), random_vector_field(c, 2, 1.0, seed(2)));
    let (alpha, beta) = (random_one_form(c, 2, 1.0, seed(3)), random_one_form(c, 2, 1.0, seed(4)));
    let space = &ctx.space;
    sink.per_bundle_point(|p| {
        let r = space.bracket_identities(p, &xi, &eta, &alpha, &beta)?;
        Ok(vec![
            tol("covector_lifts_commute", r.alpha_beta, 1e-9),
            tol("mixed_bracket_is_derivative", r.xi_alpha, 1e-9),
            tol("mixed_bracket_minus_part", r.xi_alpha_minus, 1e-9),
            tol("vector_bracket_minus_part", r.minus_part, 1e-9),
            tol("vector_bracket_plus_part", r.plus_part, 1e-9),
        ])
    })
}

fn canonical_parallelism(sink: &mut Sink) -> Result<()> {
    let space = &sink.ctx.space;
    sink.per_bundle_point(|p| {
        let (dh, dw) = space.parallelism_residuals(p)?;
        Ok(vec![tol("max_abs_dh", dh, 1e-10), tol("max_abs_domega", dw, 1e-10)])
    })
}

fn levi_civita_routes(sink: &mut Sink) -> Result<()> {
    let space = &sink.ctx.space;
    sink.per_bundle_point(|p| Ok(vec![tol("route_difference", space.levi_civita_h(p)?.route_difference(), 1e-10)]))
}

fn universal_rho(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sections = ctx.sections(CheckName::UniversalRho, SectionInput::RandomPolynomial { count: 25, degree: 2 })?;
    let n = ctx.n();
    sink.per_point_section(&sections, |_, s, x| {
        let (_, frame) = ctx.space.universal_rho(&s.point(x)?)?;
        // 𝖯(T_i) is the L⁺ part of the tangent vector in the adapted frame
        let mut pulled = vec![0.0; n * n];
        for (i, t) in s.tangents(x)?.iter().enumerate() {
            let f = frame.to_frame(t);
            pulled[i * n..(i + 1) * n].copy_from_slice(&f[n..]);
        }
        let rho = s.rho_jet(x, 0)?.values();
        Ok(vec![
            tol("pullback_rho_diff", max_abs_diff(&pulled, &rho), 1e-9),
            tol("graph_formula_diff", max_abs_diff(&s.rho_from_graph(x)?, &rho), 1e-9),
            tol("pullback_forms", s.pullback_residual(x)?, 1e-9),
        ])
    })
}

fn classify(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sections = ctx.sections(CheckName::ClassifySection, SectionInput::Zero)?;
    let results = sections
        .par_iter()
        .map(|(_, s)| classify_section(s, &ctx.points, &SectionTolerances::default()))
        .collect::<Result<Vec<_>>>()?;
    for ((label, _), c) in sections.iter().zip(results) {
        let q = |name: &str| format!("{name}[{label}]");
        sink.aggregate(info(q("lagrangian"), c.lagrangian as u8 as f64));
        sink.aggregate(info(q("nondegenerate"), c.nondegenerate as u8 as f64));
        sink.aggregate(info(q("positive_definite"), c.positive_definite as u8 as f64));
        sink.aggregate(info(q("max_skew"), c.max_skew));
        sink.aggregate(info(q("min_abs_det"), c.min_abs_det));
        sink.aggregate(tol(q("pullback_residual"), c.pullback_residual, PULLBACK_TOL));
    }
    Ok(())
}

fn second_fundamental_forms(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sections = ctx.sections(CheckName::SecondFundamentalForms, SectionInput::RandomLagrangian { count: 10 })?;
    let t = SectionTolerances::default();
    sink.per_point_section(&sections, |_, s, x| {
        let (ii_d, ii_h) = s.second_fundamental_forms(x, &t)?;
        let ext_d = s.extrinsic_ii(x, Ambient::Canonical, &t)?;
        let ext_h = s.extrinsic_ii(x, Ambient::LeviCivitaH, &t)?;
        Ok(vec![
            tol("ii_d_rel_diff", relative_diff(&ii_d.values, &ext_d.values), 1e-7),
            tol("ii_h_rel_diff", relative_diff(&ii_h.values, &ext_h.values), 1e-7),
            info("ii_d_max_abs", ii_d.max_abs().max(ext_d.max_abs())),
            info("ii_h_max_abs", ii_h.max_abs().max(ext_h.max_abs())),
        ])
    })
}

fn section_residuals(sink: &mut Sink) -> Result<()> {
    let sections = sink.ctx.sections(CheckName::SectionResiduals, SectionInput::Zero)?;
    let t = SectionTolerances::default();
    sink.per_point_section(&sections, |_, s, x| {
        let r = s.residuals(x, &t)?;
        Ok(vec![
            tol("minimal_residual", r.minimal_residual(), 1e-9),
            tol("mean_curvature", r.mean_curvature_norm(), 1e-9),
            tol("totally_geodesic", r.totally_geodesic, 1e-9),
        ])
    })
}

fn weyl_structure_of_density(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sigma = ctx.density(CheckName::WeylFromDensity)?;
    let s = weyl_from_density(&sigma, &ctx.space, &ctx.points)?;
    sink.per_point(|_, x| Ok(vec![tol("parallel_residual", parallel_residual(&sigma, s.connection(), &[x.to_vec()])?, 1e-10)]))
}

fn rho_equals_metric(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let g = ctx.geometry.metric.as_ref().ok_or_else(|| Error::Scenario("rho_equals_metric needs a geometry with a metric".into()))?;
    let s = weyl_from_density(&ctx.density(CheckName::RhoEqualsMetric)?, &ctx.space, &ctx.points)?;
    sink.per_point(|_, x| Ok(vec![tol("rho_minus_metric", max_abs_diff(&s.rho_jet(x, 0)?.values(), &g.values(x)?), 1e-9)]))
}

fn hessian_invariance(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sigma = ctx.density(CheckName::HessianInvariance)?;
    let h0 = projective_hessian(&sigma, ctx.space.base())?;
    let changed = ctx
        .random_changes(CheckName::HessianInvariance)
        .iter()
        .map(|u| projective_hessian(&sigma, &ctx.space.base().projective_change(u)?))
        .collect::<Result<Vec<_>>>()?;
    sink.per_point(|_, x| {
        let worst = changed.iter().map(|h| h0.max_abs_diff_at(h, x)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        Ok(vec![tol("max_hessian_change", worst, 1e-9)])
    })
}

fn ma_sign(sink: &Sink) -> f64 {
    sink.spec.sign.unwrap_or(if sink.ctx.n() % 2 == 0 { 1.0 } else { -1.0 })
}

fn monge_ampere(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sigma = ctx.density(CheckName::MaResidual)?;
    let sign = ma_sign(sink);
    sink.per_point(|_, x| {
        let m = &ma_residual(&sigma, &ctx.space, sign, &[x.to_vec()])?[0];
        Ok(vec![
            tol("residual", m.residual, 1e-10),
            tol("det_identity", m.det_identity_residual, 1e-9),
            tol("rho_det_derivative", m.rho_det_derivative, 1e-9),
            info("det_h", m.det_h),
        ])
    })?;
    sink.aggregate(info("sign", sign));
    Ok(())
}

fn certificate(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sigma = ctx.density(CheckName::ConvexityCertificate)?;
    let ma_tol = ctx.tolerance(sink.spec, "ma_residual", Some(1e-9)).expect("default given");
    let c = convexity_certificate(&sigma, &ctx.space, &ctx.points, ma_tol)?;
    sink.aggregate(flag("is_ma_solution", c.is_ma_solution));
    sink.aggregate(flag("rho_positive_definite", c.rho_positive_definite));
    sink.aggregate(tol("minimal_lagrangian_residual", c.minimal_lagrangian_residual, 1e-9));
    sink.aggregate(tol("ma_residual", c.ma_residual, 1e-9));
    sink.aggregate(info("scale", c.scale.unwrap_or(f64::NAN)));
    sink.aggregate(info("sign", c.sign));
    Ok(())
}

fn weyl_invariance(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let base = ctx.space.base();
    let changed =
        ctx.random_changes(CheckName::WeylInvariance).iter().map(|u| base.projective_change(u)).collect::<Result<Vec<Connection>>>()?;
    sink.per_point(|_, x| {
        let w0 = base.weyl(x, 0)?.weyl;
        let mut worst = 0.0f64;
        for c in &changed {
            worst = worst.max(w0.max_abs_diff(&c.weyl(x, 0)?.weyl)?);
        }
        Ok(vec![tol("max_weyl_change", worst, 1e-9)])
    })
}

fn rho_change_law(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let base = ctx.space.base();
    let ups = ctx.random_changes(CheckName::RhoChangeLaw);
    let changed = ups.iter().map(|u| base.projective_change(u)).collect::<Result<Vec<Connection>>>()?;
    sink.per_point(|_, x| {
        let mut worst = 0.0f64;
        for (u, c) in ups.iter().zip(&changed) {
            worst = worst.max(rho_change_prediction(base, u, x)?.max_abs_diff(&c.rho(x, 0)?.rho)?);
        }
        Ok(vec![tol("max_change_law_residual", worst, 1e-9)])
    })
}

fn tractor_flatness(sink: &mut Sink) -> Result<()> {
    let base = sink.ctx.space.base();
    sink.per_point(|_, x| Ok(vec![tol("max_abs_curvature", tractor_curvature(base, x, COTRACTOR_SIGN)?.max_abs(), 1e-10)]))
}

fn tractor_blocks(sink: &mut Sink) -> Result<()> {
    let base = sink.ctx.space.base();
    sink.per_point(|_, x| {
        let k = tractor_curvature(base, x, COTRACTOR_SIGN)?;
        let e = expected_tractor_curvature(base, x)?;
        Ok(vec![tol("sigma_row", k.sigma_row_max(), 1e-10), tol("block_diff", k.max_abs_diff(&e), 1e-9), info("max_abs_curvature", k.max_abs())])
    })
}

fn line_correspondence(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sections = ctx.sections(CheckName::LineCorrespondence, SectionInput::RandomPolynomial { count: 25, degree: 2 })?;
    let regauged = sections
        .iter()
        .enumerate()
        .map(|(k, (_, s))| {
            let ups = random_one_form(ctx.chart(), 1, 0.5, ctx.seed_for(CheckName::LineCorrespondence, 300 + k as u64));
            let moved = WeylSection::new(ctx.space.regauge(&ups)?, s.psi().sub(&ups)?)?;
            Ok((ups, moved))
        })
        .collect::<Result<Vec<_>>>()?;
    sink.per_point_section(&sections, |k, s, x| {
        let psi = s.psi().values(x)?;
        let line = line_of_section(s, x)?;
        let back = section_from_line(&line)?;
        let scaled: Vec<f64> = line.iter().map(|v| -2.5 * v).collect();
        let (ups, moved) = &regauged[k];
        let u = ups.values(x)?;
        let covariance = max_abs_diff(&change_components(&line, &u), &line_of_section(moved, x)?);
        Ok(vec![
            flag("transversal", is_transversal(&line)),
            tol("round_trip", max_abs_diff(&back, &psi), 0.0),
            tol("scaled_round_trip", max_abs_diff(&section_from_line(&scaled)?, &psi), 1e-14),
            tol("covariance", covariance, 1e-12),
        ])
    })
}

fn hessian_recovery(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let sigma = ctx.density(CheckName::HessianRecovery)?;
    let base = ctx.space.base();
    let split = bgg_split(&sigma, base)?;
    let d = cotractor_derivative(&split, COTRACTOR_SIGN)?;
    let h = projective_hessian(&sigma, base)?;
    let sym_mu = d.mu_part.symmetrize(&[0, 1])?;
    sink.per_point(|_, x| {
        Ok(vec![
            tol("splitting_sigma_part", d.sigma_part.jet(x, 0)?.max_abs_value(), 1e-9),
            tol("hessian_diff", sym_mu.max_abs_diff_at(&h, x)?, 1e-9),
        ])
    })
}

/// First-order jet of `Γ` assembled from central differences of its values.
fn fd_gamma(conn: &Connection, x: &[f64]) -> Result<TensorJet> {
    let n = conn.dim();
    let g0 = conn.gamma_jet(x, 0)?;
    let shifted = |d: usize, s: f64| -> Result<TensorJet> {
        let mut y = x.to_vec();
        y[d] += s * FD_STEP;
        conn.gamma_jet(&y, 0)
    };
    let plus = (0..n).map(|d| shifted(d, 1.0)).collect::<Result<Vec<_>>>()?;
    let minus = (0..n).map(|d| shifted(d, -1.0)).collect::<Result<Vec<_>>>()?;
    let comps = multi_indices(3, n)
        .map(|idx| {
            let mut raw = vec![g0.value_at(&idx)];
            raw.extend((0..n).map(|d| (plus[d].value_at(&idx) - minus[d].value_at(&idx)) / (2.0 * FD_STEP)));
            Jet::from_raw_partials(n, 1, &raw)
        })
        .collect();
    TensorJet::new(n, vec![Slot::Up, Slot::Down, Slot::Down], weight(0), comps)
}

/// First derivatives of `f` by jets and by central differences, and second
/// derivatives by jets and by central differences of the jet gradient.
fn scalar_jet_vs_fd(f: &Expr, x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    let j = f.jet(x, 2)?;
    let (mut exact1, mut fd1, mut exact2, mut fd2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for d in 0..n {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[d] += FD_STEP;
        xm[d] -= FD_STEP;
        exact1.push(j.d1(d));
        fd1.push((f.eval(&xp)? - f.eval(&xm)?) / (2.0 * FD_STEP));
        let (gp, gm) = (f.jet(&xp, 1)?, f.jet(&xm, 1)?);
        for e in 0..n {
            let mut alpha = vec![0u8; n];
            alpha[d] += 1;
            alpha[e] += 1;
            exact2.push(j.partial(&alpha).expect("order 2 jet"));
            fd2.push((gp.d1(e) - gm.d1(e)) / (2.0 * FD_STEP));
        }
    }
    Ok((relative_diff(&exact1, &fd1), relative_diff(&exact2, &fd2)))
}

fn engine_soundness(sink: &mut Sink) -> Result<()> {
    let ctx = sink.ctx;
    let n = ctx.n();
    let chart = ctx.chart();
    let conn = ctx.space.base();
    let seed = |k| ctx.seed_for(CheckName::EngineSoundness, k);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed(0));
    let num = random_polynomial(n, 2, 1.0, &mut rng);
    let den = random_polynomial(n, 2, 0.5, &mut rng);
    let rational = num / (den.powi(2) + 1.5);
    let s = random_one_form(chart, 2, 1.0, seed(1));
    let t = random_metric(chart, seed(2)).reweighted(weight(1));
    let lhs = s.product(&t)?.covariant_derivative(conn)?;
    let rhs = s.covariant_derivative(conn)?.product(&t)?.add(&s.product(&t.covariant_derivative(conn)?)?.permute(&[1, 0, 2, 3])?)?;
    let metric = match &ctx.geometry.metric {
        Some(g) => g.clone(),
        None => random_metric(chart, seed(3)),
    };
    let lc = Connection::levi_civita(&metric)?;
    let dg = metric.covariant_derivative(&lc)?;
    sink.per_point(|_, x| {
        let fd = fd_gamma(conn, x)?;
        let exact_dgamma: Vec<f64> = conn.gamma_jet(x, 1)?.components().iter().flat_map(|j| (0..n).map(|d| j.d1(d)).collect::<Vec<_>>()).collect();
        let fd_dgamma: Vec<f64> = fd.components().iter().flat_map(|j| (0..n).map(|d| j.d1(d)).collect::<Vec<_>>()).collect();
        let curvature = relative_diff(&conn.curvature(x, 0)?.riemann.values(), &riemann(&fd).values());
        let (first, second) = scalar_jet_vs_fd(&rational, x)?;
        Ok(vec![
            tol("gamma_derivative_vs_fd", relative_diff(&exact_dgamma, &fd_dgamma), 1e-5),
            tol("curvature_vs_fd", curvature, 1e-5),
            tol("rational_first_vs_fd", first, 1e-5),
            tol("rational_second_vs_fd", second, 1e-5),
            tol("leibniz", lhs.max_abs_diff_at(&rhs, x)?, 1e-10),
            tol("metricity", dg.jet(x, 0)?.max_abs_value(), 1e-10),
        ])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(src: &str) -> Scenario {
        Scenario::from_json(src).unwrap()
    }

    #[test]
    fn tolerance_resolution_order() {
        let s = scenario(
            r#"{"schema_version":1,"id":"t","geometry":{"kind":"flat","n":2},"checks":[{"name":"closedness","tol":1e-3},"einstein"],
                "tolerances":{"closedness.max_abs_domega":1e-5,"einstein":1e-4,"einstein.lambda":2.0}}"#,
        );
        let ctx = Context::new(&s, &RunOptions { tol_scale: 10.0, ..Default::default() }).unwrap();
        let (c, e) = (&s.checks[0], &s.checks[1]);
        assert_eq!(ctx.tolerance(c, "max_abs_domega", Some(1e-9)), Some(1e-4));
        assert_eq!(ctx.tolerance(c, "other", Some(1e-9)), Some(1e-2));
        assert_eq!(ctx.tolerance(e, "einstein_residual", Some(1e-6)), Some(1e-3));
        assert_eq!(ctx.tolerance(e, "lambda", None), Some(20.0));
        assert_eq!(ctx.tolerance(e, "lambda_spread[zero]", None), None);
    }

    #[test]
    fn relative_diff_floors_small_scales() {
        assert_eq!(relative_diff(&[2.0, 0.0], &[1.0, 0.0]), 0.5);
        assert_eq!(relative_diff(&[1e-12], &[0.0]), 1e-12);
    }

    #[test]
    fn records_are_ordered_by_point() {
        let s = scenario(r#"{"schema_version":1,"id":"t","geometry":{"kind":"flat","n":2},"checks":["closedness","tractor_flatness"],"points":{"count":4,"seed":3}}"#);
        let r = run_scenario(&s, &RunOptions::default()).unwrap();
        assert!(r.pass);
        let idx: Vec<usize> = r.checks[0].records.iter().map(|r| r.point_index.unwrap()).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert_eq!(r.checks[0].records[0].point_coords.as_ref().unwrap().len(), 4);
        assert_eq!(r.checks[1].records[0].point_coords.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn missing_density_is_an_input_error() {
        let s = scenario(r#"{"schema_version":1,"id":"t","geometry":{"kind":"flat","n":2},"checks":["ma_residual"]}"#);
        assert!(matches!(run_scenario(&s, &RunOptions::default()), Err(Error::Scenario(_))));
    }

    #[test]
    fn numerical_failures_are_recorded() {
        // the zero section over flat space is degenerate
        let s = scenario(r#"{"schema_version":1,"id":"t","geometry":{"kind":"flat","n":2},"checks":["section_residuals","closedness"],"points":{"count":3}}"#);
        let r = run_scenario(&s, &RunOptions::default()).unwrap();
        assert!(!r.checks[0].pass && r.checks[0].error.is_some());
        assert!(r.checks[1].pass);
    }
}
