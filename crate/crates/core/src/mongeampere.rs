//! Projective densities, the projective Hessian and the Monge–Ampère
//! equation `det H(σ) = ±σ^{−n−2}`.
//!
//! Densities are trivialized in the chart gauge: the coordinate volume form
//! `dx¹ ∧ … ∧ dxⁿ` has component 1, so a density of weight `w` is a single
//! scalar component and `∇_i σ = ∂_iσ + (w/(n+1)) Γ^k_{ki} σ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::BundleSpace;
use crate::catalog::random_polynomial;
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::WeightedTensorField;
use crate::linalg;
use crate::projective::Connection;
use crate::section::{SectionTolerances, WeylSection};
use crate::tensor::{weight, weight_to_f64, Slot, TensorJet, Weight};

/// Smallest `|σ|` accepted as nonzero.
pub const ZERO_DENSITY_FLOOR: f64 = 1e-300;
/// Bound on `|W|` and `|Y|` for the flatness precondition.
pub const FLATNESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DensityField {
    field: WeightedTensorField,
}

impl DensityField {
    pub fn new(chart: Chart, component: Expr, w: Weight) -> Result<Self> {
        Ok(DensityField { field: WeightedTensorField::scalar(chart, component, w)? })
    }

    pub fn from_field(field: WeightedTensorField) -> Result<Self> {
        if !field.slots().is_empty() {
            return Err(Error::Shape("a density has no tensor slots".into()));
        }
        Ok(DensityField { field })
    }

    pub fn weight(&self) -> Weight {
        self.field.weight()
    }

    pub fn field(&self) -> &WeightedTensorField {
        &self.field
    }

    pub fn chart(&self) -> &Chart {
        self.field.chart()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.field.values(x)?[0])
    }

    /// `c·σ` for a constant `c`.
    pub fn scaled(&self, c: f64) -> Self {
        DensityField { field: self.field.scale(c) }
    }

    fn check_nonzero(&self, points: &[Vec<f64>]) -> Result<()> {
        for x in points {
            if self.value(x)?.abs() < ZERO_DENSITY_FLOOR {
                return Err(Error::ZeroDensity { point: x.clone() });
            }
        }
        Ok(())
    }
}

/// The Weyl structure preserving a weight-1 density `σ`: the section
/// `Υ = −∇⁰σ/σ` relative to the base connection of `space`.
pub fn weyl_from_density(sigma: &DensityField, space: &BundleSpace, points: &[Vec<f64>]) -> Result<WeylSection> {
    if sigma.weight() != weight(1) {
        return Err(Error::Shape("Weyl structure from a density needs weight 1".into()));
    }
    sigma.check_nonzero(points)?;
    let dsig = sigma.field.covariant_derivative(space.base())?;
    let s = sigma.field.clone();
    let n = space.n();
    let ups = WeightedTensorField::from_fn(*space.base().chart(), vec![Slot::Down], weight(0), move |x, k| {
        let d = dsig.jet(x, k)?;
        let v = s.jet(x, k)?;
        let v = &v.components()[0];
        if v.value().abs() < ZERO_DENSITY_FLOOR {
            return Err(Error::ZeroDensity { point: x.to_vec() });
        }
        let comps = d.components().iter().map(|c| Ok(-c.div_jet(v)?)).collect::<Result<Vec<_>>>()?;
        TensorJet::new(n, vec![Slot::Down], weight(0), comps)
    });
    WeylSection::new(space.clone(), ups)
}

/// Det floor used when drawing random Lagrangian sections.
pub const RANDOM_LAGRANGIAN_DET_FLOOR: f64 = 1e-2;

/// A Lagrangian section preserving `exp(p)` for a random quadratic `p`
/// (coefficients in `[-0.8, 0.8)`), redrawn until `|det sym Pˢ|` is at least
/// [`RANDOM_LAGRANGIAN_DET_FLOOR`] at every point. Draw `k` uses a ChaCha8
/// generator seeded with `seed·101 + k`.
pub fn random_lagrangian_section(space: &BundleSpace, seed: u64, points: &[Vec<f64>]) -> Result<WeylSection> {
    const ATTEMPTS: u64 = 50;
    let n = space.n();
    let chart = *space.base().chart();
    let tol = SectionTolerances { zero: crate::section::DEFAULT_ZERO_TOL, det_floor: RANDOM_LAGRANGIAN_DET_FLOOR };
    for attempt in 0..ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(101).wrapping_add(attempt));
        let p = random_polynomial(n, 2, 0.8, &mut rng);
        let sigma = DensityField::new(chart, p.exp(), weight(1))?;
        let s = weyl_from_density(&sigma, space, points)?;
        let c = crate::section::classify_section(&s, points, &tol)?;
        if c.lagrangian && c.nondegenerate {
            return Ok(s);
        }
    }
    Err(Error::DegenerateSection { point: points.first().cloned().unwrap_or_default() })
}

/// `max |∇σ|` over `points`.
pub fn parallel_residual(sigma: &DensityField, conn: &Connection, points: &[Vec<f64>]) -> Result<f64> {
    let d = sigma.field.covariant_derivative(conn)?;
    let mut worst = 0.0f64;
    for x in points {
        worst = worst.max(d.jet(x, 0)?.max_abs_value());
    }
    Ok(worst)
}

/// `H(σ) = sym(∇∇σ − Pσ)`, a symmetric `(0,2)` field of weight 1.
pub fn projective_hessian(sigma: &DensityField, conn: &Connection) -> Result<WeightedTensorField> {
    if sigma.weight() != weight(1) {
        return Err(Error::Shape("the projective Hessian acts on weight-1 densities".into()));
    }
    let dd = sigma.field.covariant_derivative(conn)?.covariant_derivative(conn)?;
    let ps = conn.rho_field().product(&sigma.field)?;
    dd.sub(&ps)?.symmetrize(&[0, 1])
}

/// The alternating symbol as a weight `−(n+1)` object of valence `(n,0)`;
/// its component is the permutation symbol in the chart gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TautologicalVolume {
    pub n: usize,
}

impl TautologicalVolume {
    pub fn new(n: usize) -> Self {
        TautologicalVolume { n }
    }

    pub fn weight(&self) -> Weight {
        weight(-(self.n as i64) - 1)
    }

    pub fn component(&self, idx: &[usize]) -> f64 {
        linalg::levi_civita_symbol(idx)
    }

    /// `(1/n!) ε^{i…} ε^{j…} M_{i₁j₁} ⋯ M_{iₙjₙ}` for an `n × n` matrix of
    /// weight `w`, with the resulting weight `n·w − 2(n+1)`.
    pub fn determinant(&self, m: &[f64], w: Weight) -> (f64, Weight) {
        let n = self.n;
        let mut total = 0.0;
        let mut rows: Vec<usize> = (0..n).collect();
        linalg::for_each_permutation(&mut rows, 0, 1.0, &mut |ri, si| {
            let mut cols: Vec<usize> = (0..n).collect();
            linalg::for_each_permutation(&mut cols, 0, 1.0, &mut |cj, sj| {
                let mut prod = si * sj;
                for k in 0..n {
                    prod *= m[ri[k] * n + cj[k]];
                }
                total += prod;
            });
        });
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        (total / fact, w * weight(n as i64) + self.weight() * weight(2))
    }
}

/// One point of the Monge–Ampère check.
#[derive(Debug, Clone, PartialEq)]
pub struct MaSample {
    pub point: Vec<f64>,
    pub sigma: f64,
    pub det_h: f64,
    /// `det H(σ) − sign·σ^{−n−2}`.
    pub residual: f64,
    /// `det H(σ) − (−1)ⁿσⁿ det Pˢ` for the Weyl structure preserving `σ`.
    pub det_identity_residual: f64,
    /// `max |∇ˢ det Pˢ|`, with `det Pˢ` of weight `−2(n+1)`.
    pub rho_det_derivative: f64,
}

/// The Monge–Ampère residual at each point, computed with the base connection
/// of `space` as representative.
pub fn ma_residual(sigma: &DensityField, space: &BundleSpace, sign: f64, points: &[Vec<f64>]) -> Result<Vec<MaSample>> {
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::Shape(format!("sign must be +1 or -1, got {sign}")));
    }
    sigma.check_nonzero(points)?;
    let n = space.n();
    let hess = projective_hessian(sigma, space.base())?;
    let section = weyl_from_density(sigma, space, points)?;
    let vol = TautologicalVolume::new(n);
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let s = sigma.value(x)?;
        let hv = hess.values(x)?;
        let (det_h, w) = vol.determinant(&hv, hess.weight());
        debug_assert_eq!(w, weight(-(n as i64) - 2));
        let target = sign * s.powi(-(n as i32) - 2);
        let rho = section.rho_jet(x, 1)?;
        let det_p = linalg::det(&rho.values(), n);
        let sn = if n % 2 == 0 { 1.0 } else { -1.0 } * s.powi(n as i32);
        let det_jet = TensorJet::scalar_on(n, linalg::det_jets(rho.components(), n), weight(-2 * (n as i64 + 1)));
        let d = det_jet.covariant_derivative(&section.connection().gamma_jet(x, 1)?, n)?;
        out.push(MaSample {
            point: x.clone(),
            sigma: s,
            det_h,
            residual: det_h - target,
            det_identity_residual: det_h - sn * det_p,
            rho_det_derivative: d.max_abs_value(),
        });
    }
    Ok(out)
}

/// Result of [`convexity_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityCertificate {
    pub is_ma_solution: bool,
    pub rho_positive_definite: bool,
    pub minimal_lagrangian_residual: f64,
    /// Constant `c` such that `cσ` is compared against the equation, if one
    /// exists (`det H(σ) ≠ 0` at the first point).
    pub scale: Option<f64>,
    /// Sign of `det H(σ)` used for the equation.
    pub sign: f64,
    /// Largest `|det H(cσ) − sign·(cσ)^{−n−2}|` relative to `(cσ)^{−n−2}`.
    pub ma_residual: f64,
}

/// Local convexity checks for a weight-1 density over a flat class.
///
/// The normalizing constant is fixed at the first point from
/// `c^{2n+2} = sign·σ^{−n−2}/det H(σ)` with `sign = sign(det H(σ))`.
pub fn convexity_certificate(sigma: &DensityField, space: &BundleSpace, points: &[Vec<f64>], tol: f64) -> Result<ConvexityCertificate> {
    if points.is_empty() {
        return Err(Error::Shape("certificate needs at least one point".into()));
    }
    let n = space.n();
    let base = space.base();
    for x in points {
        let w = base.weyl(x, 0)?.weyl.max_abs_value();
        let y = base.cotton_york(x, 0)?.cy.max_abs_value();
        if w > FLATNESS_TOL || y > FLATNESS_TOL {
            return Err(Error::NotFlat(format!("|W| = {w:e}, |Y| = {y:e} at {x:?}")));
        }
    }
    sigma.check_nonzero(points)?;
    let hess = projective_hessian(sigma, base)?;
    let s0 = sigma.value(&points[0])?;
    let d0 = linalg::det(&hess.values(&points[0])?, n);
    let sign = if d0 < 0.0 { -1.0 } else { 1.0 };
    let scale = if d0.abs() > 0.0 { Some((sign * s0.powi(-(n as i32) - 2) / d0).powf(1.0 / (2 * n + 2) as f64)) } else { None };

    let section = weyl_from_density(sigma, space, points)?;
    let tols = SectionTolerances::default();
    let mut rho_pd = true;
    let mut minimal = 0.0f64;
    for x in points {
        let p = section.rho_jet(x, 0)?.values();
        let sym = crate::section::sym_values(&p, n);
        let eig = linalg::sym_eigenvalues(&sym, n);
        if eig.iter().any(|e| *e <= tols.det_floor) {
            rho_pd = false;
            continue;
        }
        minimal = minimal.max(section.residuals(x, &tols)?.minimal_residual());
    }

    let mut ma = f64::INFINITY;
    if let Some(c) = scale {
        let scaled = sigma.scaled(c);
        ma = ma_residual(&scaled, space, sign, points)?
            .iter()
            .map(|s| (s.residual / s.sigma.powi(-(n as i32) - 2)).abs())
            .fold(0.0, f64::max);
    }
    Ok(ConvexityCertificate {
        is_ma_solution: ma <= tol,
        rho_positive_definite: rho_pd,
        minimal_lagrangian_residual: minimal,
        scale,
        sign,
        ma_residual: ma,
    })
}

/// Weight of `det H(σ)` for a weight-`w` density in dimension `n`.
pub fn hessian_determinant_weight(n: usize, w: Weight) -> f64 {
    weight_to_f64(w * weight(n as i64) - weight(2 * (n as i64 + 1)))
}
