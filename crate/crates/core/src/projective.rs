//! Curvature of a torsion-free connection viewed as a representative of its
//! projective class.
//!
//! Conventions:
//! * `Γ^k_{ij}` is stored as `gamma[k][i][j]` with `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`.
//! * `R_{ij}{}^k{}_l = ∂_iΓ^k_{jl} − ∂_jΓ^k_{il} + Γ^k_{im}Γ^m_{jl} − Γ^k_{jm}Γ^m_{il}`,
//!   slots `[i, j, k, l]`, so `R(∂_i, ∂_j)∂_l = R_{ij}{}^k{}_l ∂_k`.
//! * `Ric_{jl} = R_{ij}{}^i{}_l`.
//! * Rho: `P = −Ric_sym/(n−1) − Ric_skew/(n+1)`, the unique `P` with
//!   `R = W − 2δ^k_{[i}P_{j]l} + 2P_{[ij]}δ^k_l` and `W` totally trace-free.
//!   With this sign hyperbolic space (`Ric = −(n−1)g`) has `P = g`.
//! * Projective change by a one-form `Υ`:
//!   `Γ̂^k_{ij} = Γ^k_{ij} + δ^k_iΥ_j + δ^k_jΥ_i`, under which
//!   `P̂ = P + ∇Υ − Υ⊗Υ` and a density of weight `w` has `∇̂σ = ∇σ + wΥσ`.
//!
//! In dimension two `W` vanishes identically and the Cotton–York tensor
//! carries the curvature of the class.

use std::fmt;
use std::sync::Arc;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::WeightedTensorField;
use crate::jet::Jet;
use crate::linalg;
use crate::tensor::{multi_indices, weight, Slot, TensorJet};

const GAMMA_SLOTS: [Slot; 3] = [Slot::Up, Slot::Down, Slot::Down];

/// Torsion-free connection on a chart, given by its coefficient field.
#[derive(Clone)]
pub struct Connection {
    chart: Chart,
    gamma: WeightedTensorField,
    label: Arc<str>,
}

impl fmt::Debug for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Connection").field("dim", &self.chart.dim()).field("label", &self.label).finish()
    }
}

impl Connection {
    /// Connection from coefficient expressions `gamma[k][i][j]` (row-major,
    /// `n³` entries). The input is symmetrized in `(i, j)`.
    pub fn from_exprs(chart: Chart, coeffs: Vec<Expr>, label: &str) -> Result<Self> {
        let n = chart.dim();
        if coeffs.len() != n * n * n {
            return Err(Error::Shape(format!("expected {} connection coefficients, got {}", n * n * n, coeffs.len())));
        }
        let mut sym = coeffs.clone();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let a = &coeffs[(k * n + i) * n + j];
                    let b = &coeffs[(k * n + j) * n + i];
                    if a != b {
                        sym[(k * n + i) * n + j] = (a + b) * 0.5;
                    }
                }
            }
        }
        let gamma = WeightedTensorField::from_exprs(chart, GAMMA_SLOTS.to_vec(), weight(0), sym)?;
        Ok(Connection { chart, gamma, label: label.into() })
    }

    /// Connection from a coefficient field; the field is symmetrized.
    pub fn from_field(gamma: WeightedTensorField, label: &str) -> Result<Self> {
        if gamma.slots() != GAMMA_SLOTS {
            return Err(Error::Shape(format!("connection coefficients need slots {GAMMA_SLOTS:?}")));
        }
        let chart = *gamma.chart();
        let gamma = gamma.symmetrize(&[1, 2])?;
        Ok(Connection { chart, gamma, label: label.into() })
    }

    fn from_symmetric_field(gamma: WeightedTensorField, label: &str) -> Self {
        Connection { chart: *gamma.chart(), gamma, label: label.into() }
    }

    pub fn flat(chart: Chart) -> Self {
        Self::from_symmetric_field(WeightedTensorField::zero(chart, GAMMA_SLOTS.to_vec(), weight(0)), "flat")
    }

    /// Levi-Civita connection of a symmetric `(0,2)` metric field.
    pub fn levi_civita(metric: &WeightedTensorField) -> Result<Self> {
        if metric.slots() != [Slot::Down, Slot::Down] {
            return Err(Error::Shape("metric must be a (0,2) tensor".into()));
        }
        let g = metric.clone();
        let field = WeightedTensorField::from_fn(*metric.chart(), GAMMA_SLOTS.to_vec(), weight(0), move |x, k| {
            Jet::check_order(k + 1)?;
            let gj = g.jet_unchecked(x, k + 1)?;
            levi_civita_gamma(&gj, x).map_err(|e| match e {
                Error::SingularForm { point } => Error::DegenerateMetric { point },
                other => other,
            })
        });
        Ok(Self::from_symmetric_field(field, "levi-civita"))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    pub fn gamma_field(&self) -> &WeightedTensorField {
        &self.gamma
    }

    /// Coefficients `Γ^k_{ij}` at `x` as jets of the given order.
    pub fn gamma_jet(&self, x: &[f64], order: usize) -> Result<TensorJet> {
        self.chart.check_point(x)?;
        self.gamma.jet_unchecked(x, order)
    }

    /// The connection `Γ + δΥ + Υδ` for a one-form field `Υ`.
    pub fn projective_change(&self, upsilon: &WeightedTensorField) -> Result<Connection> {
        if upsilon.slots() != [Slot::Down] || upsilon.weight() != weight(0) || upsilon.dim() != self.dim() {
            return Err(Error::Shape("projective change needs a weight-0 one-form on the same chart".into()));
        }
        let (base, ups) = (self.gamma.clone(), upsilon.clone());
        let field = WeightedTensorField::from_fn(self.chart, GAMMA_SLOTS.to_vec(), weight(0), move |x, k| {
            Ok(change_gamma(&base.jet_unchecked(x, k)?, &ups.jet_unchecked(x, k)?))
        });
        Ok(Self::from_symmetric_field(field, &format!("{}+change", self.label)))
    }

    pub fn curvature(&self, x: &[f64], order: usize) -> Result<CurvatureData> {
        let r = riemann(&self.gamma_jet(x, order + 1)?);
        let ric = ricci(&r);
        Ok(CurvatureData { riemann: r, ricci: ric })
    }

    pub fn rho(&self, x: &[f64], order: usize) -> Result<RhoTensor> {
        Ok(RhoTensor { rho: rho_from_gamma(&self.gamma_jet(x, order + 1)?), connection: self.label.to_string() })
    }

    pub fn weyl(&self, x: &[f64], order: usize) -> Result<WeylCurvature> {
        Ok(WeylCurvature { weyl: weyl_from_gamma(&self.gamma_jet(x, order + 1)?) })
    }

    pub fn cotton_york(&self, x: &[f64], order: usize) -> Result<CottonYork> {
        Ok(CottonYork { cy: cotton_york_from_gamma(&self.gamma_jet(x, order + 2)?)? })
    }

    /// Rho as a lazily evaluated field.
    pub fn rho_field(&self) -> WeightedTensorField {
        let conn = self.clone();
        WeightedTensorField::from_fn(self.chart, vec![Slot::Down, Slot::Down], weight(0), move |x, k| {
            Ok(rho_from_gamma(&conn.gamma.jet_unchecked(x, k + 1)?))
        })
    }
}

/// Riemann tensor and Ricci contraction at a point.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub riemann: TensorJet,
    pub ricci: TensorJet,
}

impl CurvatureData {
    /// Max of `|R_{ij}{}^k{}_l + R_{ji}{}^k{}_l|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let r = &self.riemann;
        multi_indices(4, r.dim())
            .map(|i| (r.value_at(&i) + r.value_at(&[i[1], i[0], i[2], i[3]])).abs())
            .fold(0.0, f64::max)
    }

    /// Max of the cyclic sum `R_{ij}{}^k{}_l + R_{jl}{}^k{}_i + R_{li}{}^k{}_j`.
    pub fn bianchi_residual(&self) -> f64 {
        let r = &self.riemann;
        multi_indices(4, r.dim())
            .map(|i| {
                let (a, b, k, c) = (i[0], i[1], i[2], i[3]);
                (r.value_at(&[a, b, k, c]) + r.value_at(&[b, c, k, a]) + r.value_at(&[c, a, k, b])).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct RhoTensor {
    pub rho: TensorJet,
    /// Label of the connection it was computed from.
    pub connection: String,
}

#[derive(Debug, Clone)]
pub struct WeylCurvature {
    pub weyl: TensorJet,
}

impl WeylCurvature {
    /// Largest entry among the three independent traces of `W`.
    pub fn max_trace(&self) -> f64 {
        let w = &self.weyl;
        let n = w.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
                for k in 0..n {
                    t1 += w.value_at(&[k, a, k, b]);
                    t2 += w.value_at(&[a, k, k, b]);
                    t3 += w.value_at(&[a, b, k, k]);
                }
                worst = worst.max(t1.abs()).max(t2.abs()).max(t3.abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct CottonYork {
    pub cy: TensorJet,
}

impl CottonYork {
    /// Max of `|Y_{ijk} + Y_{jik}|`.
    pub fn skew_residual(&self) -> f64 {
        let y = &self.cy;
        multi_indices(3, y.dim()).map(|i| (y.value_at(&i) + y.value_at(&[i[1], i[0], i[2]])).abs()).fold(0.0, f64::max)
    }

    /// Max of the complete alternation `Y_{[ijk]}`.
    pub fn alternation_residual(&self) -> Result<f64> {
        Ok(self.cy.alternate(&[0, 1, 2])?.max_abs_value())
    }
}

/// `Γ^k_{ij} + δ^k_iΥ_j + δ^k_jΥ_i` on jets; `upsilon` may have higher
/// order than `gamma`.
pub fn change_gamma(gamma: &TensorJet, upsilon: &TensorJet) -> TensorJet {
    let order = gamma.order().min(upsilon.order());
    TensorJet::from_fn(gamma.dim(), GAMMA_SLOTS.to_vec(), weight(0), |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        let mut g = gamma.get(idx).truncate(order);
        if k == i {
            g = g + upsilon.get(&[j]).truncate(order);
        }
        if k == j {
            g = g + upsilon.get(&[i]).truncate(order);
        }
        g
    })
}

/// Christoffel symbols of a metric given as jets; one order is lost.
pub fn levi_civita_gamma(metric: &TensorJet, point: &[f64]) -> Result<TensorJet> {
    let n = metric.dim();
    let inv = metric.truncate(metric.order().saturating_sub(1)).inverse_form(point)?;
    let dg = metric.partial();
    Ok(TensorJet::from_fn(n, GAMMA_SLOTS.to_vec(), weight(0), |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        let mut acc = dg.get(&[0, 0, 0]).zero_like();
        for l in 0..n {
            let bracket = dg.get(&[i, j, l]) + dg.get(&[j, i, l]) - dg.get(&[l, i, j]);
            acc = acc + inv.get(&[k, l]) * &bracket;
        }
        acc.scale(0.5)
    }))
}

/// Riemann tensor of a (not necessarily symmetric) coefficient jet; one
/// order is lost.
pub fn riemann(gamma: &TensorJet) -> TensorJet {
    let n = gamma.dim();
    let dgamma = gamma.partial();
    let order = dgamma.order();
    let g = gamma.truncate(order);
    TensorJet::from_fn(n, vec![Slot::Down, Slot::Down, Slot::Up, Slot::Down], weight(0), |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = dgamma.get(&[i, k, j, l]) - dgamma.get(&[j, k, i, l]);
        for m in 0..n {
            acc = acc + g.get(&[k, i, m]) * g.get(&[m, j, l]) - g.get(&[k, j, m]) * g.get(&[m, i, l]);
        }
        acc
    })
}

/// `Ric_{jl} = R_{ij}{}^i{}_l`.
pub fn ricci(r: &TensorJet) -> TensorJet {
    r.contract(2, 0).expect("riemann layout")
}

pub fn rho_from_ricci(ric: &TensorJet) -> TensorJet {
    let n = ric.dim() as f64;
    let cs = -1.0 / (n - 1.0);
    let ca = -1.0 / (n + 1.0);
    TensorJet::from_fn(ric.dim(), vec![Slot::Down, Slot::Down], weight(0), |idx| {
        let a = ric.get(idx);
        let b = ric.get(&[idx[1], idx[0]]);
        (a + b).scale(0.5 * cs) + (a - b).scale(0.5 * ca)
    })
}

pub fn rho_from_gamma(gamma: &TensorJet) -> TensorJet {
    rho_from_ricci(&ricci(&riemann(gamma)))
}

/// `W = R + 2δ^k_{[i}P_{j]l} − 2P_{[ij]}δ^k_l`.
pub fn weyl_from_parts(r: &TensorJet, p: &TensorJet) -> TensorJet {
    TensorJet::from_fn(r.dim(), r.slots().to_vec(), weight(0), |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = r.get(idx).clone();
        if k == i {
            acc = acc + p.get(&[j, l]);
        }
        if k == j {
            acc = acc - p.get(&[i, l]);
        }
        if k == l {
            acc = acc - p.get(&[i, j]) + p.get(&[j, i]);
        }
        acc
    })
}

/// Recombines `R = W − 2δ^k_{[i}P_{j]l} + 2P_{[ij]}δ^k_l`.
pub fn riemann_from_parts(w: &TensorJet, p: &TensorJet) -> TensorJet {
    TensorJet::from_fn(w.dim(), w.slots().to_vec(), weight(0), |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = w.get(idx).clone();
        if k == i {
            acc = acc - p.get(&[j, l]);
        }
        if k == j {
            acc = acc + p.get(&[i, l]);
        }
        if k == l {
            acc = acc + p.get(&[i, j]) - p.get(&[j, i]);
        }
        acc
    })
}

pub fn weyl_from_gamma(gamma: &TensorJet) -> TensorJet {
    let r = riemann(gamma);
    let p = rho_from_ricci(&ricci(&r));
    weyl_from_parts(&r, &p)
}

/// `Y_{ijk} = ∇_iP_{jk} − ∇_jP_{ik}`; two orders are lost.
pub fn cotton_york_from_gamma(gamma: &TensorJet) -> Result<TensorJet> {
    let p = rho_from_gamma(gamma);
    let dp = p.covariant_derivative(gamma, gamma.dim())?;
    Ok(TensorJet::from_fn(gamma.dim(), vec![Slot::Down; 3], weight(0), |i| {
        dp.get(i) - dp.get(&[i[1], i[0], i[2]])
    }))
}

/// Max over `points` of `|∇̂σ − (∇σ + wΥσ)|` where `∇̂` is the projective
/// change of `conn` by `upsilon` and `w` the weight of the scalar density
/// `sigma`.
pub fn density_change_check(
    conn: &Connection,
    upsilon: &WeightedTensorField,
    sigma: &WeightedTensorField,
    points: &[Vec<f64>],
) -> Result<f64> {
    if !sigma.slots().is_empty() {
        return Err(Error::Shape("density must be a scalar field".into()));
    }
    let changed = conn.projective_change(upsilon)?;
    let w = crate::tensor::weight_to_f64(sigma.weight());
    let d = sigma.covariant_derivative(conn)?;
    let dhat = sigma.covariant_derivative(&changed)?;
    let mut worst = 0.0f64;
    for x in points {
        let s = sigma.jet(x, 0)?.value_at(&[]);
        let u = upsilon.jet(x, 0)?;
        let a = d.jet(x, 0)?;
        let b = dhat.jet(x, 0)?;
        for i in 0..conn.dim() {
            worst = worst.max((b.value_at(&[i]) - a.value_at(&[i]) - w * u.value_at(&[i]) * s).abs());
        }
    }
    Ok(worst)
}

/// `P + ∇Υ − Υ⊗Υ` at a point, the predicted Rho of the changed connection.
pub fn rho_change_prediction(conn: &Connection, upsilon: &WeightedTensorField, x: &[f64]) -> Result<TensorJet> {
    let p = conn.rho(x, 0)?.rho;
    let du = upsilon.covariant_derivative(conn)?.jet(x, 0)?;
    let u = upsilon.jet(x, 0)?;
    Ok(TensorJet::from_fn(conn.dim(), vec![Slot::Down, Slot::Down], weight(0), |i| {
        p.get(i) + du.get(i) - u.get(&[i[0]]) * u.get(&[i[1]])
    }))
}

/// `det` of the value matrix of a rank-2 tensor.
pub fn det_values(t: &TensorJet) -> f64 {
    linalg::det(&t.values(), t.dim())
}

/// Jet-valued determinant of a rank-2 tensor.
pub fn det_jet(t: &TensorJet) -> Jet {
    linalg::det_jets(t.components(), t.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chart(n: usize) -> Chart {
        Chart::euclidean(n).unwrap()
    }

    fn one_form(n: usize, srcs: &[&str]) -> WeightedTensorField {
        let exprs = srcs.iter().map(|s| Expr::parse(s, n).unwrap()).collect();
        WeightedTensorField::from_exprs(chart(n), vec![Slot::Down], weight(0), exprs).unwrap()
    }

    #[test]
    fn flat_connection_has_no_curvature() {
        let c = Connection::flat(chart(3));
        let x = [0.1, 0.2, -0.3];
        assert_eq!(c.curvature(&x, 0).unwrap().riemann.max_abs_value(), 0.0);
        assert_eq!(c.rho(&x, 0).unwrap().rho.max_abs_value(), 0.0);
        assert_eq!(c.weyl(&x, 0).unwrap().weyl.max_abs_value(), 0.0);
        assert_eq!(c.cotton_york(&x, 0).unwrap().cy.max_abs_value(), 0.0);
    }

    #[test]
    fn change_by_dx1_in_the_plane() {
        let c = Connection::flat(chart(2)).projective_change(&one_form(2, &["1", "0"])).unwrap();
        let g = c.gamma_jet(&[0.3, 0.4], 0).unwrap();
        let expected = |k: usize, i: usize, j: usize| match (k, i, j) {
            (0, 0, 0) => 2.0,
            (1, 0, 1) | (1, 1, 0) => 1.0,
            _ => 0.0,
        };
        for idx in multi_indices(3, 2) {
            assert_eq!(g.value_at(&idx), expected(idx[0], idx[1], idx[2]), "{idx:?}");
        }
    }

    #[test]
    fn zero_change_is_identity() {
        let c = Connection::from_exprs(chart(2), (0..8).map(|i| Expr::var(i % 2) * (i as f64)).collect(), "t").unwrap();
        let same = c.projective_change(&one_form(2, &["0", "0"])).unwrap();
        let x = [0.2, -0.7];
        assert_eq!(c.gamma_jet(&x, 2).unwrap().max_abs_diff(&same.gamma_jet(&x, 2).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn input_is_symmetrized() {
        let mut coeffs = vec![Expr::zero(); 8];
        coeffs[1] = Expr::constant(2.0); // Γ^1_{12}
        let c = Connection::from_exprs(chart(2), coeffs, "t").unwrap();
        let g = c.gamma_jet(&[0.0, 0.0], 0).unwrap();
        assert_eq!(g.value_at(&[0, 0, 1]), 1.0);
        assert_eq!(g.value_at(&[0, 1, 0]), 1.0);
    }

    #[test]
    fn unit_density_under_dx1_change() {
        let c = Connection::flat(chart(2));
        let sigma = WeightedTensorField::scalar(chart(2), Expr::constant(1.0), weight(1)).unwrap();
        let ups = one_form(2, &["1", "0"]);
        let changed = c.projective_change(&ups).unwrap();
        let d = sigma.covariant_derivative(&changed).unwrap().values(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], 0.0, epsilon = 1e-15);
        let r = density_change_check(&c, &ups, &sigma, &[vec![0.5, 0.5]]).unwrap();
        assert_eq!(r, 0.0);
    }
}
