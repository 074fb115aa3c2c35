//! Weyl structures as sections of the bundle: classification, pullbacks and
//! second fundamental forms.
//!
//! A section is a weight-0 one-form `ψ` relative to the base connection of
//! its [`BundleSpace`]; its Weyl connection is `∇ˢ = ∇₀ + δψ + ψδ` and its
//! Rho tensor `Pˢ`. Second fundamental forms are reported as base `(1,2)`
//! tensors `II^k_{ij}`: the normal component of `∇̄_{T_i}T_j` is identified
//! with a base vector through its `L⁻` part (a normal vector has frame
//! components `(η, −Pη)`).

use serde::{Deserialize, Serialize};

use crate::bundle::{universal_rho_coefficients, BundlePoint, BundleSpace};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::WeightedTensorField;
use crate::linalg;
use crate::projective::Connection;
use crate::tensor::{weight, Slot, TensorJet};

/// Zero test for the skew part of `Pˢ`.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;
/// Floor for `|det sym Pˢ|`.
pub const DEFAULT_DET_FLOOR: f64 = 1e-6;
/// Allowed mismatch between pulled-back forms and `2 sym Pˢ`, `−2 alt Pˢ`.
pub const PULLBACK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionTolerances {
    #[serde(default = "default_zero")]
    pub zero: f64,
    #[serde(default = "default_det")]
    pub det_floor: f64,
}

fn default_zero() -> f64 {
    DEFAULT_ZERO_TOL
}

fn default_det() -> f64 {
    DEFAULT_DET_FLOOR
}

impl Default for SectionTolerances {
    fn default() -> Self {
        SectionTolerances { zero: DEFAULT_ZERO_TOL, det_floor: DEFAULT_DET_FLOOR }
    }
}

#[derive(Debug, Clone)]
pub struct WeylSection {
    space: BundleSpace,
    psi: WeightedTensorField,
    connection: Connection,
}

impl WeylSection {
    pub fn new(space: BundleSpace, psi: WeightedTensorField) -> Result<Self> {
        let connection = space.base().projective_change(&psi)?;
        Ok(WeylSection { space, psi, connection })
    }

    /// Section from `n` covector component expressions in `x1..xn`.
    pub fn from_exprs(space: BundleSpace, comps: Vec<Expr>) -> Result<Self> {
        let psi = WeightedTensorField::from_exprs(*space.base().chart(), vec![Slot::Down], weight(0), comps)?;
        Self::new(space, psi)
    }

    /// The section `ψ = 0`, i.e. the base connection itself.
    pub fn zero(space: BundleSpace) -> Self {
        let psi = WeightedTensorField::zero(*space.base().chart(), vec![Slot::Down], weight(0));
        let connection = space.base().clone();
        WeylSection { space, psi, connection }
    }

    pub fn space(&self) -> &BundleSpace {
        &self.space
    }

    pub fn psi(&self) -> &WeightedTensorField {
        &self.psi
    }

    pub fn connection(&self) -> &Connection {
        &self.connection
    }

    pub fn dim(&self) -> usize {
        self.space.n()
    }

    pub fn point(&self, x: &[f64]) -> Result<BundlePoint> {
        Ok(BundlePoint::new(x.to_vec(), self.psi.values(x)?))
    }

    /// `Pˢ` as the Rho tensor of `∇ˢ`.
    pub fn rho_jet(&self, x: &[f64], order: usize) -> Result<TensorJet> {
        Ok(self.connection.rho(x, order)?.rho)
    }

    /// `Pˢ_{ij} = ∂_iψ_j + A_{ij}(x, ψ(x))`, read off the graph.
    pub fn rho_from_graph(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let psi = self.psi.jet(x, 1)?;
        let base = self.space.base();
        let a = universal_rho_coefficients(
            &base.rho(x, 0)?.rho,
            &base.gamma_jet(x, 0)?,
            &psi.components().iter().map(|j| j.truncate(0)).collect::<Vec<_>>(),
        );
        Ok((0..n * n).map(|k| psi.get(&[k % n]).d1(k / n) + a.value_at(&[k / n, k % n])).collect())
    }

    /// Coordinate tangent vectors `T_i = (e_i, ∂_iψ)` of the graph.
    pub fn tangents(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let psi = self.psi.jet(x, 1)?;
        Ok((0..n)
            .map(|i| {
                let mut t = vec![0.0; 2 * n];
                t[i] = 1.0;
                for j in 0..n {
                    t[n + j] = psi.get(&[j]).d1(i);
                }
                t
            })
            .collect())
    }

    /// Pullbacks `(s*h, s*Ω)` as row-major `n × n` matrices.
    pub fn pullbacks(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let forms = self.space.bundle_forms(&self.point(x)?)?;
        let t = self.tangents(x)?;
        let mut h = vec![0.0; n * n];
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                h[i * n + j] = forms.eval_h(&t[i], &t[j]);
                w[i * n + j] = forms.eval_omega(&t[i], &t[j]);
            }
        }
        Ok((h, w))
    }

    /// Largest mismatch of `s*h = 2 sym Pˢ` and `s*Ω = −2 alt Pˢ` at `x`.
    pub fn pullback_residual(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        let p = self.rho_jet(x, 0)?.values();
        let (h, w) = self.pullbacks(x)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (pij, pji) = (p[i * n + j], p[j * n + i]);
                worst = worst.max((h[i * n + j] - (pij + pji)).abs());
                worst = worst.max((w[i * n + j] + (pij - pji)).abs());
            }
        }
        Ok(worst)
    }

    /// `Pˢ` at `x` after checking it is symmetric and non-degenerate.
    fn checked_rho(&self, x: &[f64], order: usize, tol: &SectionTolerances) -> Result<TensorJet> {
        let n = self.dim();
        let p = self.rho_jet(x, order)?;
        let v = p.values();
        let skew = (0..n * n).map(|k| 0.5 * (v[k] - v[(k % n) * n + k / n]).abs()).fold(0.0, f64::max);
        if skew > tol.zero {
            return Err(Error::NonLagrangian { point: x.to_vec(), skew });
        }
        if linalg::det(&sym_values(&v, n), n).abs() < tol.det_floor {
            return Err(Error::DegenerateSection { point: x.to_vec() });
        }
        Ok(p)
    }

    /// `∇ˢPˢ` at `x` (order 0); slot 0 is the derivative.
    pub fn rho_derivative(&self, x: &[f64]) -> Result<TensorJet> {
        let p = self.rho_jet(x, 1)?;
        p.covariant_derivative(&self.connection.gamma_jet(x, 1)?, self.dim())
    }

    pub fn totally_geodesic_residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.rho_derivative(x)?.max_abs_value())
    }

    /// `II_D` and `II_h` at `x` from the closed formulas.
    pub fn second_fundamental_forms(&self, x: &[f64], tol: &SectionTolerances) -> Result<(SecondFundamentalForm, SecondFundamentalForm)> {
        let n = self.dim();
        let p = self.checked_rho(x, 0, tol)?;
        let pinv = linalg::inverse(&p.values(), n, x)?;
        let dp = self.rho_derivative(x)?;
        let d = |a: usize, b: usize, c: usize| dp.value_at(&[a, b, c]);
        let mut ii_d = vec![0.0; n * n * n];
        let mut ii_h = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let (mut sd, mut sh) = (0.0, 0.0);
                    for a in 0..n {
                        sd += pinv[k * n + a] * d(i, j, a);
                        sh += pinv[k * n + a] * (d(i, j, a) + d(j, i, a) - d(a, i, j));
                    }
                    ii_d[(k * n + i) * n + j] = -0.5 * sd;
                    ii_h[(k * n + i) * n + j] = -0.5 * sh;
                }
            }
        }
        Ok((
            SecondFundamentalForm { ambient: Ambient::Canonical, dim: n, values: ii_d },
            SecondFundamentalForm { ambient: Ambient::LeviCivitaH, dim: n, values: ii_h },
        ))
    }

    /// Second fundamental form computed on the total space: differentiate the
    /// graph's tangent frame with the ambient coordinate coefficients, project
    /// to the `h`-normal space and keep the `L⁻` part.
    pub fn extrinsic_ii(&self, x: &[f64], ambient: Ambient, tol: &SectionTolerances) -> Result<SecondFundamentalForm> {
        let n = self.dim();
        let m = 2 * n;
        let p = self.checked_rho(x, 0, tol)?;
        let pinv = linalg::inverse(&p.values(), n, x)?;
        let point = self.point(x)?;
        let gamma = match ambient {
            Ambient::Canonical => self.space.canonical_connection(&point, 0)?.values(),
            Ambient::LeviCivitaH => self.space.levi_civita_h(&point)?.from_metric,
        };
        let (rho, frame) = self.space.universal_rho(&point)?;
        debug_assert_eq!(frame.n, n);
        let psi = self.psi.jet(x, 2)?;
        let t = self.tangents(x)?;
        let mut values = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = vec![0.0; m];
                for b in 0..n {
                    let alpha = [i, j].iter().fold(vec![0u8; n], |mut acc, &c| {
                        acc[c] += 1;
                        acc
                    });
                    v[n + b] = psi.get(&[b]).partial(&alpha).unwrap_or(0.0);
                }
                for l in 0..m {
                    for mu in 0..m {
                        for nu in 0..m {
                            v[l] += gamma[(l * m + mu) * m + nu] * t[i][mu] * t[j][nu];
                        }
                    }
                }
                let xi = &v[..n];
                let alpha: Vec<f64> = (0..n).map(|a| v[n + a] + (0..n).map(|b| rho.a[b * n + a] * xi[b]).sum::<f64>()).collect();
                for k in 0..n {
                    let pa: f64 = (0..n).map(|a| pinv[k * n + a] * alpha[a]).sum();
                    values[(k * n + i) * n + j] = normal_base_part(xi[k], pa);
                }
            }
        }
        Ok(SecondFundamentalForm { ambient, dim: n, values })
    }

    /// `m_i = P^{ab}(2∇_aP_{bi} − ∇_iP_{ab})` and the mean curvature
    /// `P^{ij} II_h{}^k_{ij} = −½P^{ka}m_a` at `x`.
    pub fn residuals(&self, x: &[f64], tol: &SectionTolerances) -> Result<SectionResiduals> {
        let n = self.dim();
        let p = self.rho_jet(x, 0)?;
        let sym = sym_values(&p.values(), n);
        if linalg::det(&sym, n).abs() < tol.det_floor {
            return Err(Error::DegenerateSection { point: x.to_vec() });
        }
        let pinv = linalg::inverse(&sym, n, x)?;
        let dp = self.rho_derivative(x)?;
        let minimal: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += pinv[a * n + b] * (2.0 * dp.value_at(&[a, b, i]) - dp.value_at(&[i, a, b]));
                    }
                }
                s
            })
            .collect();
        let mean_curvature = (0..n).map(|k| -0.5 * (0..n).map(|a| pinv[k * n + a] * minimal[a]).sum::<f64>()).collect();
        Ok(SectionResiduals { minimal, mean_curvature, totally_geodesic: dp.max_abs_value() })
    }
}

/// Base part `½(ξ − P⁻¹α)` of the `h`-normal projection of a vector with
/// frame components `(ξ, α)` along a Lagrangian section; `p_inv_alpha` is
/// `P⁻¹α` in the same slot.
pub fn normal_base_part(xi: f64, p_inv_alpha: f64) -> f64 {
    0.5 * (xi - p_inv_alpha)
}

pub fn sym_values(v: &[f64], n: usize) -> Vec<f64> {
    (0..n * n).map(|k| 0.5 * (v[k] + v[(k % n) * n + k / n])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    /// The canonical connection `D`.
    Canonical,
    /// The Levi-Civita connection of `h`.
    LeviCivitaH,
}

/// `II^k_{ij}` at one point, row-major `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondFundamentalForm {
    pub ambient: Ambient,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl SecondFundamentalForm {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[(k * self.dim + i) * self.dim + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SecondFundamentalForm) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn to_tensor(&self) -> TensorJet {
        let n = self.dim;
        TensorJet::from_fn(n, vec![Slot::Up, Slot::Down, Slot::Down], weight(0), |idx| {
            crate::jet::Jet::constant(n, 0, self.get(idx[0], idx[1], idx[2]))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionResiduals {
    /// `m_i` at the point.
    pub minimal: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    /// `max |∇ˢPˢ|`.
    pub totally_geodesic: f64,
}

impl SectionResiduals {
    pub fn minimal_residual(&self) -> f64 {
        self.minimal.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean_curvature_norm(&self) -> f64 {
        self.mean_curvature.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionClassification {
    pub lagrangian: bool,
    pub nondegenerate: bool,
    /// `sym Pˢ` positive definite at every sample point.
    pub positive_definite: bool,
    pub max_skew: f64,
    /// Index of the point where the skew part is largest.
    pub skew_witness: usize,
    pub min_abs_det: f64,
    /// Index of the point where `|det sym Pˢ|` is smallest.
    pub det_witness: usize,
    /// Largest mismatch of the pulled-back forms; classification is only
    /// meaningful when this is within [`PULLBACK_TOL`].
    pub pullback_residual: f64,
}

pub fn classify_section(s: &WeylSection, points: &[Vec<f64>], tol: &SectionTolerances) -> Result<SectionClassification> {
    if points.is_empty() {
        return Err(Error::Shape("classification needs at least one point".into()));
    }
    let n = s.dim();
    let mut out = SectionClassification {
        lagrangian: true,
        nondegenerate: true,
        positive_definite: true,
        max_skew: 0.0,
        skew_witness: 0,
        min_abs_det: f64::INFINITY,
        det_witness: 0,
        pullback_residual: 0.0,
    };
    for (idx, x) in points.iter().enumerate() {
        out.pullback_residual = out.pullback_residual.max(s.pullback_residual(x)?);
        let v = s.rho_jet(x, 0)?.values();
        let skew = (0..n * n).map(|k| 0.5 * (v[k] - v[(k % n) * n + k / n]).abs()).fold(0.0, f64::max);
        if skew > out.max_skew {
            out.max_skew = skew;
            out.skew_witness = idx;
        }
        let sym = sym_values(&v, n);
        let det = linalg::det(&sym, n).abs();
        if det < out.min_abs_det {
            out.min_abs_det = det;
            out.det_witness = idx;
        }
        if linalg::sym_eigenvalues(&sym, n).iter().any(|e| *e <= 0.0) {
            out.positive_definite = false;
        }
    }
    out.lagrangian = out.max_skew <= tol.zero;
    out.nondegenerate = out.min_abs_det >= tol.det_floor;
    out.positive_definite &= out.nondegenerate;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_projection_is_h_orthogonal() {
        // with P = [[2, 1], [1, 3]], the vector (ξ, α) minus its normal part
        // (v, −Pv) must be tangent, i.e. of the form (u, Pu)
        let p = [2.0, 1.0, 1.0, 3.0];
        let pinv = linalg::inverse(&p, 2, &[0.0, 0.0]).unwrap();
        let (xi, alpha) = ([0.7, -1.1], [0.4, 2.5]);
        let pa: Vec<f64> = (0..2).map(|k| pinv[2 * k] * alpha[0] + pinv[2 * k + 1] * alpha[1]).collect();
        let v: Vec<f64> = (0..2).map(|k| normal_base_part(xi[k], pa[k])).collect();
        let u: Vec<f64> = (0..2).map(|k| xi[k] - v[k]).collect();
        for a in 0..2 {
            let pv = p[2 * a] * v[0] + p[2 * a + 1] * v[1];
            let pu = p[2 * a] * u[0] + p[2 * a + 1] * u[1];
            assert!((alpha[a] - (pu - pv)).abs() < 1e-14);
        }
        // and the normal vector is h-orthogonal to every tangent (e_i, P e_i)
        let h = |x1: &[f64], a1: &[f64], x2: &[f64], a2: &[f64]| -> f64 { (0..2).map(|k| x1[k] * a2[k] + x2[k] * a1[k]).sum() };
        let nv = [-(p[0] * v[0] + p[1] * v[1]), -(p[2] * v[0] + p[3] * v[1])];
        for i in 0..2 {
            let e = if i == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            let pe = [p[i], p[2 + i]];
            assert!(h(&v, &nv, &e, &pe).abs() < 1e-14);
        }
    }
}
