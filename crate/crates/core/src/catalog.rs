//! Named geometries used by scenarios and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, Domain};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::WeightedTensorField;
use crate::projective::Connection;
use crate::tensor::{weight, Slot};

/// Description of a projective structure on a single chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// `Γ = 0` on `R^n`.
    Flat { n: usize },
    /// Levi-Civita connection of the Klein metric on the open unit ball.
    KleinBall { n: usize },
    /// Levi-Civita connection of a metric given by `n²` row-major expressions.
    LeviCivita {
        n: usize,
        metric: Vec<String>,
        #[serde(default)]
        domain: Option<Domain>,
    },
    /// Coefficients `Γ^k_{ij}` as `n³` expressions in `[k][i][j]` order.
    Explicit {
        n: usize,
        gamma: Vec<String>,
        #[serde(default)]
        domain: Option<Domain>,
    },
    /// Polynomial coefficients of total degree `degree` on the cube
    /// `(-1, 1)^n`, reproducible from `seed`.
    RandomPoly { n: usize, degree: usize, seed: u64 },
}

impl GeometrySpec {
    pub fn dim(&self) -> usize {
        match *self {
            GeometrySpec::Flat { n }
            | GeometrySpec::KleinBall { n }
            | GeometrySpec::LeviCivita { n, .. }
            | GeometrySpec::Explicit { n, .. }
            | GeometrySpec::RandomPoly { n, .. } => n,
        }
    }

    pub fn name(&self) -> String {
        match self {
            GeometrySpec::Flat { n } => format!("flat({n})"),
            GeometrySpec::KleinBall { n } => format!("klein_ball({n})"),
            GeometrySpec::LeviCivita { n, .. } => format!("levi_civita({n})"),
            GeometrySpec::Explicit { n, .. } => format!("explicit({n})"),
            GeometrySpec::RandomPoly { n, degree, seed } => format!("random_poly({n},{degree},{seed})"),
        }
    }

    /// True when the class is known to be projectively flat by construction.
    pub fn is_flat_model(&self) -> bool {
        matches!(self, GeometrySpec::Flat { .. } | GeometrySpec::KleinBall { .. })
    }
}

/// A catalog geometry: chart, connection and, where it exists, the metric.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub spec: GeometrySpec,
    pub chart: Chart,
    pub connection: Connection,
    pub metric: Option<WeightedTensorField>,
}

pub fn catalog_geometry(spec: &GeometrySpec) -> Result<Geometry> {
    let n = spec.dim();
    let (chart, connection, metric) = match spec {
        GeometrySpec::Flat { .. } => {
            let chart = Chart::euclidean(n)?;
            (chart, Connection::flat(chart), None)
        }
        GeometrySpec::KleinBall { .. } => {
            let chart = Chart::unit_ball(n)?;
            let g = WeightedTensorField::from_exprs(chart, vec![Slot::Down, Slot::Down], weight(0), klein_metric(n))?;
            (chart, Connection::levi_civita(&g)?.with_label("klein"), Some(g))
        }
        GeometrySpec::LeviCivita { metric, domain, .. } => {
            let chart = Chart::new(n, domain.unwrap_or(Domain::Everywhere))?;
            let exprs = parse_all(metric, n, n * n)?;
            for i in 0..n {
                for j in 0..i {
                    if exprs[i * n + j] != exprs[j * n + i] {
                        return Err(Error::Parse(format!("metric entries ({},{}) and ({},{}) differ", i + 1, j + 1, j + 1, i + 1)));
                    }
                }
            }
            let g = WeightedTensorField::from_exprs(chart, vec![Slot::Down, Slot::Down], weight(0), exprs)?;
            (chart, Connection::levi_civita(&g)?, Some(g))
        }
        GeometrySpec::Explicit { gamma, domain, .. } => {
            let chart = Chart::new(n, domain.unwrap_or(Domain::Everywhere))?;
            let exprs = parse_all(gamma, n, n * n * n)?;
            (chart, Connection::from_exprs(chart, exprs, "explicit")?, None)
        }
        GeometrySpec::RandomPoly { degree, seed, .. } => {
            let chart = Chart::new(n, Domain::Cube { half_width: 1.0 })?;
            let exprs = random_poly_coefficients(n, *degree, *seed);
            (chart, Connection::from_exprs(chart, exprs, "random_poly")?, None)
        }
    };
    Ok(Geometry { spec: spec.clone(), chart, connection: connection.with_label(&spec.name()), metric })
}

fn parse_all(srcs: &[String], n: usize, expected: usize) -> Result<Vec<Expr>> {
    if srcs.len() != expected {
        return Err(Error::Parse(format!("expected {expected} expressions, got {}", srcs.len())));
    }
    srcs.iter().map(|s| Expr::parse(s, n)).collect()
}

/// Klein metric `g_{ij} = δ_{ij}/u² + x_i x_j/u⁴`, `u² = 1 − |x|²`.
pub fn klein_metric(n: usize) -> Vec<Expr> {
    let mut u2 = Expr::constant(1.0);
    for i in 0..n {
        u2 = u2 - Expr::var(i).powi(2);
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut e = Expr::var(i) * Expr::var(j) / u2.powi(2);
            if i == j {
                e = Expr::constant(1.0) / u2.clone() + e;
            }
            out.push(e);
        }
    }
    out
}

/// Exponent vectors of total degree `≤ degree` in graded lexicographic order.
pub fn monomials(n: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            if left == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(n, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree as u32 {
        rec(n, d, &mut Vec::new(), &mut out);
    }
    out
}

fn monomial_expr(exps: &[u32]) -> Expr {
    let mut m = Expr::constant(1.0);
    for (i, &e) in exps.iter().enumerate() {
        if e > 0 {
            m = m * Expr::var(i).powi(e as i32);
        }
    }
    m
}

/// Polynomial with coefficients uniform in `[-scale, scale)`.
pub fn random_polynomial(n: usize, degree: usize, scale: f64, rng: &mut impl Rng) -> Expr {
    let mut p = Expr::zero();
    for exps in monomials(n, degree) {
        let c: f64 = rng.random_range(-scale..scale);
        p = p + monomial_expr(&exps) * c;
    }
    p
}

/// Coefficients `Γ^k_{ij}` (`i ≤ j` drawn, the rest mirrored) with every
/// component an independent polynomial of the given degree, coefficients
/// uniform in `[-0.5, 0.5)`, generator ChaCha8 seeded with `seed`.
pub fn random_poly_coefficients(n: usize, degree: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Expr::zero(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let p = random_polynomial(n, degree, 0.5, &mut rng);
                out[(k * n + i) * n + j] = p.clone();
                out[(k * n + j) * n + i] = p;
            }
        }
    }
    out
}

/// One-form whose components are independent random polynomials,
/// coefficients uniform in `[-scale, scale)`, ChaCha8 seeded with `seed`.
pub fn random_one_form(chart: Chart, degree: usize, scale: f64, seed: u64) -> WeightedTensorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chart.dim();
    let comps = (0..n).map(|_| random_polynomial(n, degree, scale, &mut rng)).collect();
    WeightedTensorField::from_exprs(chart, vec![Slot::Down], weight(0), comps).expect("component count matches")
}

/// Vector field drawn like [`random_one_form`].
pub fn random_vector_field(chart: Chart, degree: usize, scale: f64, seed: u64) -> WeightedTensorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chart.dim();
    let comps = (0..n).map(|_| random_polynomial(n, degree, scale, &mut rng)).collect();
    WeightedTensorField::from_exprs(chart, vec![Slot::Up], weight(0), comps).expect("component count matches")
}

/// `δ + S` with `S` symmetric, entries random quadratics with coefficients in
/// `[-0.08, 0.08)`; positive definite on the unit cube.
pub fn random_metric(chart: Chart, seed: u64) -> WeightedTensorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chart.dim();
    let mut comps = vec![Expr::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let mut p = random_polynomial(n, 2, 0.08, &mut rng);
            if i == j {
                p = p + 1.0;
            }
            comps[i * n + j] = p.clone();
            comps[j * n + i] = p;
        }
    }
    WeightedTensorField::from_exprs(chart, vec![Slot::Down, Slot::Down], weight(0), comps).expect("component count matches")
}

/// One-line descriptions for `list-geometries`.
pub fn descriptions() -> Vec<(&'static str, &'static str)> {
    vec![
        ("flat", r#"{"kind":"flat","n":N}: zero connection on R^N"#),
        ("klein_ball", r#"{"kind":"klein_ball","n":N}: Levi-Civita of the Klein metric on the unit ball"#),
        ("levi_civita", r#"{"kind":"levi_civita","n":N,"metric":[N*N exprs],"domain":?}: Levi-Civita of a metric"#),
        ("explicit", r#"{"kind":"explicit","n":N,"gamma":[N^3 exprs, k,i,j order],"domain":?}: given coefficients"#),
        ("random_poly", r#"{"kind":"random_poly","n":N,"degree":D,"seed":S}: random polynomial coefficients on (-1,1)^N"#),
    ]
}
