//! Cotractor calculus in a chosen Weyl representative.
//!
//! A cotractor is a pair `(σ, μ)` of a weight-1 density and a weight-1
//! one-form, expressed in the splitting of some representative `∇`. Under
//! `∇ ↦ ∇ + δΥ + Υδ` the components change by `(σ, μ) ↦ (σ, μ + Υσ)`. The
//! connection is
//!
//! `∇ᵀ_a(σ, μ_b) = (∇_aσ − μ_a, ∇_aμ_b + c·P_{ab}σ)`
//!
//! with [`COTRACTOR_SIGN`] `c = −1`; with this value the connection is flat
//! on flat classes and its curvature is `(0, −W_{ab}{}^d{}_c μ_d − Y_{abc}σ)`.

use crate::error::{Error, Result};
use crate::field::WeightedTensorField;
use crate::jet::Jet;
use crate::mongeampere::DensityField;
use crate::projective::{cotton_york_from_gamma, rho_from_gamma, weyl_from_gamma, Connection};
use crate::section::WeylSection;
use crate::tensor::{weight, Slot, TensorJet};

pub const COTRACTOR_SIGN: f64 = -1.0;

#[derive(Debug, Clone)]
pub struct CotractorField {
    sigma: WeightedTensorField,
    mu: WeightedTensorField,
    representative: Connection,
}

impl CotractorField {
    pub fn new(sigma: WeightedTensorField, mu: WeightedTensorField, representative: Connection) -> Result<Self> {
        if !sigma.slots().is_empty() || sigma.weight() != weight(1) {
            return Err(Error::Shape("cotractor σ-part must be a weight-1 density".into()));
        }
        if mu.slots() != [Slot::Down] || mu.weight() != weight(1) {
            return Err(Error::Shape("cotractor μ-part must be a weight-1 one-form".into()));
        }
        if sigma.dim() != representative.dim() || mu.dim() != representative.dim() {
            return Err(Error::Shape("cotractor parts and representative live on different charts".into()));
        }
        Ok(CotractorField { sigma, mu, representative })
    }

    pub fn sigma(&self) -> &WeightedTensorField {
        &self.sigma
    }

    pub fn mu(&self) -> &WeightedTensorField {
        &self.mu
    }

    pub fn representative(&self) -> &Connection {
        &self.representative
    }

    /// `[σ, μ_1, …, μ_n]` at `x`.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.sigma.values(x)?;
        v.extend(self.mu.values(x)?);
        Ok(v)
    }

    /// The same cotractor in the representative changed by `Υ`.
    pub fn change_representative(&self, upsilon: &WeightedTensorField) -> Result<CotractorField> {
        let shift = upsilon.product(&self.sigma)?;
        Ok(CotractorField {
            sigma: self.sigma.clone(),
            mu: self.mu.add(&shift)?,
            representative: self.representative.projective_change(upsilon)?,
        })
    }
}

/// `∇ᵀ t` as a cotractor-valued one-form: `sigma_part_a` and
/// `mu_part_{ab}` (form index first).
#[derive(Debug, Clone)]
pub struct CotractorDerivative {
    pub sigma_part: WeightedTensorField,
    pub mu_part: WeightedTensorField,
}

pub fn cotractor_derivative(t: &CotractorField, c: f64) -> Result<CotractorDerivative> {
    let conn = &t.representative;
    let sigma_part = t.sigma.covariant_derivative(conn)?.sub(&t.mu)?;
    let p_sigma = conn.rho_field().product(&t.sigma)?.scale(c);
    let mu_part = t.mu.covariant_derivative(conn)?.add(&p_sigma)?;
    Ok(CotractorDerivative { sigma_part, mu_part })
}

/// The splitting `S(σ) = (σ, ∇σ)` in the given representative.
pub fn bgg_split(sigma: &DensityField, conn: &Connection) -> Result<CotractorField> {
    CotractorField::new(sigma.field().clone(), sigma.field().covariant_derivative(conn)?, conn.clone())
}

/// Curvature of the cotractor connection at a point: for each coordinate pair
/// `(a, b)` an `(n+1) × (n+1)` matrix acting on `[σ, μ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TractorCurvatureSample {
    pub n: usize,
    pub point: Vec<f64>,
    /// `[a][b][row][col]`, row-major.
    pub blocks: Vec<f64>,
}

impl TractorCurvatureSample {
    pub fn get(&self, a: usize, b: usize, row: usize, col: usize) -> f64 {
        let d = self.n + 1;
        self.blocks[((a * self.n + b) * d + row) * d + col]
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &TractorCurvatureSample) -> f64 {
        self.blocks.iter().zip(&other.blocks).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest entry of the σ row (the image's σ-component).
    pub fn sigma_row_max(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for col in 0..=n {
                    worst = worst.max(self.get(a, b, 0, col).abs());
                }
            }
        }
        worst
    }
}

/// `∇ᵀ` on jets at a point, for a cotractor `(σ, μ)` or a cotractor-valued
/// form: returns `(∇σ − μ, ∇μ + cPσ)` where the μ-part of the result puts
/// the new derivative index first.
fn tractor_step(sigma: &TensorJet, mu: &TensorJet, gamma: &TensorJet, p: &TensorJet, c: f64, n: usize) -> Result<(TensorJet, TensorJet)> {
    // σ may carry form indices; μ carries the same plus one trailing index
    let ds = sigma.covariant_derivative(gamma, n)?;
    let dm = mu.covariant_derivative(gamma, n)?;
    let order = ds.order().min(dm.order()).min(p.order());
    let rank = sigma.rank();
    let s_part = TensorJet::from_fn(n, ds.slots().to_vec(), ds.weight(), |idx| {
        // idx = [a, form indices...]; subtract μ_{form..., a}
        let mut mi: Vec<usize> = idx[1..].to_vec();
        mi.push(idx[0]);
        ds.get(idx).truncate(order) - mu.get(&mi).truncate(order)
    });
    let m_part = TensorJet::from_fn(n, dm.slots().to_vec(), dm.weight(), |idx| {
        // idx = [a, form indices..., b]
        let (a, b) = (idx[0], idx[rank + 1]);
        let si = &idx[1..=rank];
        dm.get(idx).truncate(order) + (p.get(&[a, b]).truncate(order) * sigma.get(si).truncate(order)).scale(c)
    });
    Ok((s_part, m_part))
}

/// Curvature of `∇ᵀ` (sign constant `c`) for the representative `conn`,
/// from the commutator of second derivatives on a constant frame.
pub fn tractor_curvature(conn: &Connection, x: &[f64], c: f64) -> Result<TractorCurvatureSample> {
    let n = conn.dim();
    let d = n + 1;
    let gamma = conn.gamma_jet(x, 2)?;
    let p = rho_from_gamma(&conn.gamma_jet(x, 3)?);
    let mut blocks = vec![0.0; n * n * d * d];
    for col in 0..d {
        let sigma = TensorJet::scalar_on(n, Jet::constant(n, 2, if col == 0 { 1.0 } else { 0.0 }), weight(1));
        let mu = TensorJet::from_fn(n, vec![Slot::Down], weight(1), |i| Jet::constant(n, 2, if col == i[0] + 1 { 1.0 } else { 0.0 }));
        let (t, nu) = tractor_step(&sigma, &mu, &gamma, &p, c, n)?;
        let (tt, nn) = tractor_step(&t, &nu, &gamma, &p, c, n)?;
        for a in 0..n {
            for b in 0..n {
                let base = (a * n + b) * d;
                blocks[(base) * d + col] = tt.value_at(&[a, b]) - tt.value_at(&[b, a]);
                for k in 0..n {
                    blocks[(base + 1 + k) * d + col] = nn.value_at(&[a, b, k]) - nn.value_at(&[b, a, k]);
                }
            }
        }
    }
    Ok(TractorCurvatureSample { n, point: x.to_vec(), blocks })
}

/// The curvature predicted from `W` and `Y`: zero σ row, μ-block
/// `μ_c ↦ −W_{ab}{}^d{}_c μ_d` and σ-column `−Y_{abc}`.
pub fn expected_tractor_curvature(conn: &Connection, x: &[f64]) -> Result<TractorCurvatureSample> {
    let n = conn.dim();
    let d = n + 1;
    let w = weyl_from_gamma(&conn.gamma_jet(x, 1)?);
    let y = cotton_york_from_gamma(&conn.gamma_jet(x, 2)?)?;
    let mut blocks = vec![0.0; n * n * d * d];
    for a in 0..n {
        for b in 0..n {
            let base = (a * n + b) * d;
            for c in 0..n {
                blocks[(base + 1 + c) * d] = -y.value_at(&[a, b, c]);
                for e in 0..n {
                    blocks[(base + 1 + c) * d + 1 + e] = -w.value_at(&[a, b, e, c]);
                }
            }
        }
    }
    Ok(TractorCurvatureSample { n, point: x.to_vec(), blocks })
}

/// `(σ, μ) ↦ (σ, μ + Υσ)` on component vectors `[σ, μ…]`.
pub fn change_components(v: &[f64], upsilon: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    for (m, u) in out[1..].iter_mut().zip(upsilon) {
        *m += u * v[0];
    }
    out
}

/// The cotractor line of the Weyl structure `s` at `x`, spanned by
/// `(1, −ψ(x))` in the base representative's splitting.
pub fn line_of_section(s: &WeylSection, x: &[f64]) -> Result<Vec<f64>> {
    let mut v = vec![1.0];
    v.extend(s.psi().values(x)?.iter().map(|p| -p));
    Ok(v)
}

/// True when the line spanned by `v` meets the hyperplane `σ = 0` only at
/// the origin.
pub fn is_transversal(v: &[f64]) -> bool {
    v[0] != 0.0
}

/// Inverse of [`line_of_section`]: `ψ = −μ/σ` for any spanning vector.
pub fn section_from_line(v: &[f64]) -> Result<Vec<f64>> {
    if !is_transversal(v) {
        return Err(Error::Transversality);
    }
    Ok(v[1..].iter().map(|m| -m / v[0]).collect())
}
