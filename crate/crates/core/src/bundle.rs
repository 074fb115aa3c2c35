//! Coordinate model of the bundle of Weyl structures.
//!
//! A base connection `∇₀` identifies the bundle with `T*M`: a point is
//! `(x, ψ)` and the Weyl structure through it is `∇₀` changed by `ψ`. On the
//! `2n`-dimensional total space, with coordinates ordered `(x¹..xⁿ, ψ₁..ψₙ)`:
//!
//! * universal Rho `𝖯_j = dψ_j + A_{ij} dx^i`,
//!   `A_{ij} = P⁰_{ij} − Γ^k_{ij}ψ_k − ψ_iψ_j`;
//! * adapted frame `ẽ_i = ∂_{x^i} − A_{ij}∂_{ψ_j}` (spanning `L⁻ = ker 𝖯`) and
//!   `ẽ^j = ∂_{ψ_j}` (spanning `L⁺`), coframe `(dx^i, 𝖯_j)`;
//! * `Ω = dx^j ∧ 𝖯_j`, so `Ω(ẽ_i, ẽ^j) = δ_i^j`;
//! * `h = dx^j ⊙ 𝖯_j` with `h(X, Y) = 𝖯(Y)(dx(X)) + 𝖯(X)(dx(Y))`, so
//!   `h(ẽ_i, ẽ^j) = δ_i^j`;
//! * canonical connection `D`: along `ẽ_i` it acts by `Γ(ψ) = Γ + δψ + ψδ`
//!   on `ẽ_j` and by the dual action on `ẽ^j`; along `L⁺` the adapted frame
//!   is parallel.
//!
//! Frame-indexed quantities use frame index `a < n` for `ẽ_a` and `n + j`
//! for `ẽ^j`. Connection coefficients on the total space follow the base
//! layout `[λ][μ][ν]` with `μ` the differentiating direction.

use crate::error::{Error, Result};
use crate::field::WeightedTensorField;
use crate::jet::Jet;
use crate::linalg;
use crate::projective::{change_gamma, cotton_york_from_gamma, levi_civita_gamma, rho_from_gamma, riemann, ricci, weyl_from_gamma, Connection};
use crate::tensor::{weight, Slot, TensorJet};

const GAMMA_SLOTS: [Slot; 3] = [Slot::Up, Slot::Down, Slot::Down];

/// The total space over a base chart, coordinatized relative to `∇₀`.
#[derive(Debug, Clone)]
pub struct BundleSpace {
    base: Connection,
}

/// A point `(x, ψ)` of the total space.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePoint {
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
}

impl BundlePoint {
    pub fn new(x: Vec<f64>, psi: Vec<f64>) -> Self {
        BundlePoint { x, psi }
    }

    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(&self.psi).copied().collect()
    }
}

/// Jets of the basic coordinate-model quantities at a point, in `2n`
/// variables.
#[derive(Debug, Clone)]
pub struct BundleJets {
    pub n: usize,
    /// Fiber coordinates as jets.
    pub psi: Vec<Jet>,
    /// Base coefficients `Γ^k_{ij}(x)`.
    pub gamma: TensorJet,
    /// `Γ(ψ)^k_{ij}`.
    pub gamma_psi: TensorJet,
    /// Universal Rho coefficients `A_{ij}`.
    pub a: TensorJet,
}

/// `A_{ij} = P⁰_{ij} − Γ^k_{ij}ψ_k − ψ_iψ_j` for jets in any number of
/// variables.
pub fn universal_rho_coefficients(p0: &TensorJet, gamma: &TensorJet, psi: &[Jet]) -> TensorJet {
    let n = p0.dim();
    TensorJet::from_fn(n, vec![Slot::Down, Slot::Down], weight(0), |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut acc = p0.get(idx) - &psi[i] * &psi[j];
        for k in 0..n {
            acc = acc - gamma.get(&[k, i, j]) * &psi[k];
        }
        acc
    })
}

/// Values of `𝖯` coefficients and the adapted frame at a point.
#[derive(Debug, Clone)]
pub struct UniversalRho {
    /// `A_{ij}`, row-major.
    pub a: Vec<f64>,
}

/// Adapted frame at a point, as coordinate matrices.
#[derive(Debug, Clone)]
pub struct BundleFrame {
    pub n: usize,
    /// Column `a` holds the coordinates of frame vector `a`; row-major
    /// `2n × 2n`.
    pub frame: Vec<f64>,
    /// Row `c` holds the coordinate components of coframe form `c`.
    pub coframe: Vec<f64>,
}

impl BundleFrame {
    pub fn vector(&self, a: usize) -> Vec<f64> {
        let m = 2 * self.n;
        (0..m).map(|r| self.frame[r * m + a]).collect()
    }

    /// Frame components of a coordinate vector.
    pub fn to_frame(&self, v: &[f64]) -> Vec<f64> {
        let m = 2 * self.n;
        (0..m).map(|c| (0..m).map(|l| self.coframe[c * m + l] * v[l]).sum()).collect()
    }

    /// Coordinate components of a frame vector.
    pub fn to_coords(&self, v: &[f64]) -> Vec<f64> {
        let m = 2 * self.n;
        (0..m).map(|l| (0..m).map(|a| self.frame[l * m + a] * v[a]).sum()).collect()
    }
}

/// Component matrices of `Ω` and `h` in the coordinate basis.
#[derive(Debug, Clone)]
pub struct BundleBilinear {
    pub dim: usize,
    pub omega: Vec<f64>,
    pub h: Vec<f64>,
}

impl BundleBilinear {
    pub fn eval_h(&self, u: &[f64], v: &[f64]) -> f64 {
        bilinear(&self.h, self.dim, u, v)
    }

    pub fn eval_omega(&self, u: &[f64], v: &[f64]) -> f64 {
        bilinear(&self.omega, self.dim, u, v)
    }
}

pub fn bilinear(m: &[f64], dim: usize, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += u[i] * m[i * dim + j] * v[j];
        }
    }
    s
}

/// `h` as a `2n`-dimensional `(0,2)` jet tensor.
pub fn h_tensor(a: &TensorJet) -> TensorJet {
    let n = a.dim();
    let zero = a.get(&[0, 0]).zero_like();
    TensorJet::from_fn(2 * n, vec![Slot::Down, Slot::Down], weight(0), |idx| {
        let (r, s) = (idx[0], idx[1]);
        match (r < n, s < n) {
            (true, true) => a.get(&[r, s]) + a.get(&[s, r]),
            (true, false) if s - n == r => zero.constant_like(1.0),
            (false, true) if r - n == s => zero.constant_like(1.0),
            _ => zero.clone(),
        }
    })
}

/// `Ω` as a `2n`-dimensional `(0,2)` jet tensor.
pub fn omega_tensor(a: &TensorJet) -> TensorJet {
    let n = a.dim();
    let zero = a.get(&[0, 0]).zero_like();
    TensorJet::from_fn(2 * n, vec![Slot::Down, Slot::Down], weight(0), |idx| {
        let (r, s) = (idx[0], idx[1]);
        match (r < n, s < n) {
            (true, true) => a.get(&[s, r]) - a.get(&[r, s]),
            (true, false) if s - n == r => zero.constant_like(1.0),
            (false, true) if r - n == s => zero.constant_like(-1.0),
            _ => zero.clone(),
        }
    })
}

/// Frame matrix `F` (columns are `ẽ_a, ẽ^j`) as jets, row-major `2n × 2n`.
fn frame_jets(a: &TensorJet) -> Vec<Jet> {
    let n = a.dim();
    let m = 2 * n;
    let zero = a.get(&[0, 0]).zero_like();
    let mut f = vec![zero.clone(); m * m];
    for r in 0..m {
        f[r * m + r] = zero.constant_like(1.0);
    }
    for i in 0..n {
        for j in 0..n {
            // ψ_j-component of ẽ_i
            f[(n + j) * m + i] = -a.get(&[i, j]);
        }
    }
    f
}

/// Coframe `θ` (rows `dx^i`, `𝖯_j`) as jets.
fn coframe_jets(a: &TensorJet) -> Vec<Jet> {
    let n = a.dim();
    let m = 2 * n;
    let zero = a.get(&[0, 0]).zero_like();
    let mut t = vec![zero.clone(); m * m];
    for r in 0..m {
        t[r * m + r] = zero.constant_like(1.0);
    }
    for i in 0..n {
        for j in 0..n {
            t[(n + j) * m + i] = a.get(&[i, j]).clone();
        }
    }
    t
}

/// Connection form of `D` in the adapted frame evaluated on coordinate
/// directions: `omega[μ][c][b] = ω^c_b(∂_μ)`.
fn connection_form(jets: &BundleJets) -> Vec<Jet> {
    let n = jets.n;
    let m = 2 * n;
    let zero = jets.a.get(&[0, 0]).zero_like();
    let mut w = vec![zero; m * m * m];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                w[(i * m + k) * m + j] = jets.gamma_psi.get(&[k, i, j]).clone();
                w[(i * m + n + k) * m + n + j] = -jets.gamma_psi.get(&[j, i, k]);
            }
        }
    }
    w
}

impl BundleSpace {
    pub fn new(base: Connection) -> Self {
        BundleSpace { base }
    }

    pub fn base(&self) -> &Connection {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.dim()
    }

    pub fn total_dim(&self) -> usize {
        2 * self.n()
    }

    /// The same bundle coordinatized relative to `∇₀` changed by `Υ`; a point
    /// `(x, ψ)` here corresponds to `(x, ψ − Υ(x))` there.
    pub fn regauge(&self, upsilon: &WeightedTensorField) -> Result<BundleSpace> {
        Ok(BundleSpace { base: self.base.projective_change(upsilon)? })
    }

    fn check(&self, p: &BundlePoint) -> Result<()> {
        if p.psi.len() != self.n() {
            return Err(Error::Shape(format!("fiber coordinate has {} entries, expected {}", p.psi.len(), self.n())));
        }
        self.base.chart().check_point(&p.x)
    }

    /// Coordinate-model jets at `p` up to `order` (at most 3).
    pub fn jets(&self, p: &BundlePoint, order: usize) -> Result<BundleJets> {
        self.check(p)?;
        let n = self.n();
        let m = 2 * n;
        let gamma_hi = self.base.gamma_jet(&p.x, order + 1)?;
        let p0 = rho_from_gamma(&gamma_hi).embed(m);
        let gamma = gamma_hi.truncate(order).embed(m);
        let psi: Vec<Jet> = (0..n).map(|j| Jet::variable(m, order, n + j, p.psi[j])).collect();
        let psi_form = TensorJet::new(n, vec![Slot::Down], weight(0), psi.clone())?;
        let gamma_psi = change_gamma(&gamma, &psi_form);
        let a = universal_rho_coefficients(&p0, &gamma, &psi);
        Ok(BundleJets { n, psi, gamma, gamma_psi, a })
    }

    pub fn universal_rho(&self, p: &BundlePoint) -> Result<(UniversalRho, BundleFrame)> {
        let j = self.jets(p, 0)?;
        let frame = BundleFrame {
            n: j.n,
            frame: frame_jets(&j.a).iter().map(Jet::value).collect(),
            coframe: coframe_jets(&j.a).iter().map(Jet::value).collect(),
        };
        Ok((UniversalRho { a: j.a.values() }, frame))
    }

    pub fn bundle_forms(&self, p: &BundlePoint) -> Result<BundleBilinear> {
        let j = self.jets(p, 0)?;
        Ok(BundleBilinear { dim: 2 * j.n, omega: omega_tensor(&j.a).values(), h: h_tensor(&j.a).values() })
    }

    /// Coordinate coefficients of `D` as jets of the given order.
    pub fn canonical_connection(&self, p: &BundlePoint, order: usize) -> Result<TensorJet> {
        let jets = self.jets(p, order + 1)?;
        Ok(canonical_connection_from(&jets, order))
    }

    /// `D_X Y` in frame components, for `Y` given by frame-coefficient
    /// functions `coeffs` of `(x, ψ)` (`2n` bundle expressions) and `X` given
    /// by its frame components `direction`.
    pub fn canonical_connection_apply(
        &self,
        p: &BundlePoint,
        coeffs: &[crate::expr::Expr],
        direction: &[f64],
    ) -> Result<Vec<f64>> {
        let m = self.total_dim();
        if coeffs.len() != m || direction.len() != m {
            return Err(Error::Shape(format!("field and direction need {m} frame components")));
        }
        let jets = self.jets(p, 0)?;
        let (_, frame) = self.universal_rho(p)?;
        let coords = p.coords();
        let y: Vec<Jet> = coeffs.iter().map(|e| e.jet(&coords, 1)).collect::<Result<_>>()?;
        let xc = frame.to_coords(direction);
        let w = connection_form(&jets);
        let mut out = vec![0.0; m];
        for c in 0..m {
            let mut v: f64 = (0..m).map(|mu| xc[mu] * y[c].d1(mu)).sum();
            for b in 0..m {
                let wc: f64 = (0..m).map(|mu| xc[mu] * w[(mu * m + c) * m + b].value()).sum();
                v += wc * y[b].value();
            }
            out[c] = v;
        }
        Ok(out)
    }

    /// Torsion and curvature of `D` at `p` in the adapted frame.
    pub fn torsion_curvature_d(&self, p: &BundlePoint) -> Result<TorsionCurvature> {
        let m = self.total_dim();
        let jets = self.jets(p, 2)?;
        let gd = canonical_connection_from(&jets, 1);
        let f: Vec<f64> = frame_jets(&jets.a).iter().map(Jet::value).collect();
        let th: Vec<f64> = coframe_jets(&jets.a).iter().map(Jet::value).collect();
        let mut torsion = vec![0.0; m * m * m];
        for c in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        if th[c * m + l] == 0.0 {
                            continue;
                        }
                        for mu in 0..m {
                            for nu in 0..m {
                                let t = gd.value_at(&[l, mu, nu]) - gd.value_at(&[l, nu, mu]);
                                s += th[c * m + l] * t * f[mu * m + a] * f[nu * m + b];
                            }
                        }
                    }
                    torsion[(c * m + a) * m + b] = s;
                }
            }
        }
        let r = riemann(&gd);
        let mut curvature = vec![0.0; m * m * m * m];
        for a in 0..m {
            for b in 0..m {
                for d in 0..m {
                    for c in 0..m {
                        let mut s = 0.0;
                        for mu in 0..m {
                            let fa = f[mu * m + a];
                            if fa == 0.0 {
                                continue;
                            }
                            for nu in 0..m {
                                let fb = f[nu * m + b];
                                if fb == 0.0 {
                                    continue;
                                }
                                for l in 0..m {
                                    let t = th[d * m + l];
                                    if t == 0.0 {
                                        continue;
                                    }
                                    for sg in 0..m {
                                        s += t * r.value_at(&[mu, nu, l, sg]) * fa * fb * f[sg * m + c];
                                    }
                                }
                            }
                        }
                        curvature[((a * m + b) * m + d) * m + c] = s;
                    }
                }
            }
        }
        Ok(TorsionCurvature { dim: m, torsion, curvature })
    }

    /// Christoffel symbols of `h` computed two ways, and the contorsion.
    pub fn levi_civita_h(&self, p: &BundlePoint) -> Result<LeviCivitaH> {
        let m = self.total_dim();
        let jets = self.jets(p, 1)?;
        let h = h_tensor(&jets.a);
        let coords = p.coords();
        let from_metric = levi_civita_gamma(&h, &coords)?.values();
        let gd = canonical_connection_from(&jets, 0);
        let hv = h.truncate(0);
        let hinv = linalg::inverse(&hv.values(), m, &coords)?;
        // τ_{μνρ} = h_{ρσ} τ^σ_{μν}
        let mut tl = vec![0.0; m * m * m];
        for mu in 0..m {
            for nu in 0..m {
                for rho in 0..m {
                    tl[(mu * m + nu) * m + rho] = (0..m)
                        .map(|s| hv.value_at(&[rho, s]) * (gd.value_at(&[s, mu, nu]) - gd.value_at(&[s, nu, mu])))
                        .sum();
                }
            }
        }
        let t = |a: usize, b: usize, c: usize| tl[(a * m + b) * m + c];
        let mut contorsion = vec![0.0; m * m * m];
        for l in 0..m {
            for mu in 0..m {
                for nu in 0..m {
                    contorsion[(l * m + mu) * m + nu] = (0..m)
                        .map(|rho| hinv[l * m + rho] * 0.5 * (-t(mu, nu, rho) + t(mu, rho, nu) + t(nu, rho, mu)))
                        .sum();
                }
            }
        }
        let from_contorsion = gd.values().iter().zip(&contorsion).map(|(g, c)| g + c).collect();
        Ok(LeviCivitaH { dim: m, from_metric, from_contorsion, contorsion })
    }

    /// Einstein constant, Einstein residual and closedness residual at one
    /// point.
    pub fn einstein_at(&self, p: &BundlePoint) -> Result<EinsteinSample> {
        let m = self.total_dim();
        let coords = p.coords();
        let jets = self.jets(p, 2)?;
        let h = h_tensor(&jets.a);
        let lc = levi_civita_gamma(&h, &coords)?;
        let ric = ricci(&riemann(&lc));
        let hv = h.truncate(0).values();
        let hinv = linalg::inverse(&hv, m, &coords)?;
        let ricv = ric.values();
        let trace: f64 = (0..m * m).map(|k| hinv[k] * ricv[k]).sum();
        let lambda = trace / m as f64;
        let hmax = hv.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let einstein_residual = ricv.iter().zip(&hv).fold(0.0f64, |s, (r, h)| s.max((r - lambda * h).abs())) / hmax;
        let omega = omega_tensor(&jets.a.truncate(1));
        let domega = exterior_derivative_max(&omega);
        Ok(EinsteinSample { lambda, einstein_residual, domega_residual: domega })
    }

    /// Max over coordinate triples of `|dΩ|` at `p`.
    pub fn closedness_at(&self, p: &BundlePoint) -> Result<f64> {
        let jets = self.jets(p, 1)?;
        Ok(exterior_derivative_max(&omega_tensor(&jets.a)))
    }

    pub fn einstein_and_closedness(&self, points: &[BundlePoint]) -> Result<EinsteinReport> {
        if points.len() < 3 {
            return Err(Error::Shape("the Einstein check needs at least three points".into()));
        }
        let samples = points.iter().map(|p| self.einstein_at(p)).collect::<Result<Vec<_>>>()?;
        Ok(EinsteinReport { samples })
    }

    /// Max of `|D h|` and `|D Ω|` at `p` (coordinate components).
    pub fn parallelism_residuals(&self, p: &BundlePoint) -> Result<(f64, f64)> {
        let jets = self.jets(p, 1)?;
        let gd = canonical_connection_from(&jets, 0);
        let dh = h_tensor(&jets.a).covariant_derivative(&gd, 2 * jets.n)?;
        let dw = omega_tensor(&jets.a).covariant_derivative(&gd, 2 * jets.n)?;
        Ok((dh.max_abs_value(), dw.max_abs_value()))
    }

    /// Max over `i, j` of the `L⁺` part of `[ẽ_i, ẽ_j]` (zero exactly when
    /// `L⁻` is involutive at `p`) and of the `L⁻` part of `[ẽ^i, ẽ^j]`.
    pub fn involutivity_defects(&self, p: &BundlePoint) -> Result<(f64, f64)> {
        let n = self.n();
        let m = 2 * n;
        let jets = self.jets(p, 1)?;
        let f = frame_jets(&jets.a);
        let th: Vec<f64> = coframe_jets(&jets.a).iter().map(Jet::value).collect();
        let col = |a: usize| -> Vec<Jet> { (0..m).map(|r| f[r * m + a].clone()).collect() };
        let mut minus = 0.0f64;
        let mut plus = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let br = lie_bracket(&col(i), &col(j));
                for c in n..m {
                    let v: f64 = (0..m).map(|l| th[c * m + l] * br[l]).sum();
                    minus = minus.max(v.abs());
                }
                let br = lie_bracket(&col(n + i), &col(n + j));
                for c in 0..n {
                    let v: f64 = (0..m).map(|l| th[c * m + l] * br[l]).sum();
                    plus = plus.max(v.abs());
                }
            }
        }
        Ok((minus, plus))
    }

    /// The bracket identities of lifted fields at `p`, for base vector fields
    /// `xi`, `eta` and base one-forms `alpha`, `beta` (weight 0).
    pub fn bracket_identities(
        &self,
        p: &BundlePoint,
        xi: &WeightedTensorField,
        eta: &WeightedTensorField,
        alpha: &WeightedTensorField,
        beta: &WeightedTensorField,
    ) -> Result<BracketReport> {
        let n = self.n();
        let m = 2 * n;
        let jets = self.jets(p, 1)?;
        let gd = canonical_connection_from(&jets, 0);
        let th: Vec<f64> = coframe_jets(&jets.a).iter().map(Jet::value).collect();
        let base = |f: &WeightedTensorField| -> Result<Vec<Jet>> {
            Ok(f.jet(&p.x, 1)?.embed(m).components().to_vec())
        };
        let (xv, ev, av, bv) = (base(xi)?, base(eta)?, base(alpha)?, base(beta)?);
        let xt = lift_vector(&xv, &jets.a);
        let et = lift_vector(&ev, &jets.a);
        let at = lift_covector(&av);
        let bt = lift_covector(&bv);
        let ab = lie_bracket(&at, &bt);
        let alpha_beta = ab.iter().fold(0.0f64, |s, v| s.max(v.abs()));

        let xa = lie_bracket(&xt, &at);
        let dxa: Vec<f64> = (0..m)
            .map(|l| {
                (0..m)
                    .map(|mu| {
                        let mut v = at[l].d1(mu);
                        for nu in 0..m {
                            v += gd.value_at(&[l, mu, nu]) * at[nu].value();
                        }
                        xt[mu].value() * v
                    })
                    .sum()
            })
            .collect();
        let xi_alpha = xa.iter().zip(&dxa).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
        let xa_minus = (0..n).map(|c| (0..m).map(|l| th[c * m + l] * xa[l]).sum::<f64>().abs()).fold(0.0, f64::max);

        let xe = lie_bracket(&xt, &et);
        let base_bracket: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|i| xv[i].value() * ev[k].d1(i) - ev[i].value() * xv[k].d1(i)).sum())
            .collect();
        let minus_part = (0..n)
            .map(|c| ((0..m).map(|l| th[c * m + l] * xe[l]).sum::<f64>() - base_bracket[c]).abs())
            .fold(0.0, f64::max);
        let y = self.universal_cotton_york(p)?;
        let plus_part = (0..n)
            .map(|k| {
                let got: f64 = (0..m).map(|l| th[(n + k) * m + l] * xe[l]).sum();
                let mut yv = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        yv += y.value_at(&[i, j, k]) * xv[i].value() * ev[j].value();
                    }
                }
                (got + yv).abs()
            })
            .fold(0.0, f64::max);
        Ok(BracketReport { alpha_beta, xi_alpha, xi_alpha_minus: xa_minus, minus_part, plus_part })
    }

    /// Weyl connection of the constant section through `p`.
    pub fn constant_section_connection(&self, p: &BundlePoint) -> Result<Connection> {
        let psi = p.psi.clone();
        let n = self.n();
        let ups = WeightedTensorField::from_fn(*self.base.chart(), vec![Slot::Down], weight(0), move |_, k| {
            Ok(TensorJet::from_fn(n, vec![Slot::Down], weight(0), |i| Jet::constant(n, k, psi[i[0]])))
        });
        self.base.projective_change(&ups)
    }

    /// Cotton–York tensor of any Weyl structure through `p` (it depends only
    /// on the point of the bundle).
    pub fn universal_cotton_york(&self, p: &BundlePoint) -> Result<TensorJet> {
        let conn = self.constant_section_connection(p)?;
        cotton_york_from_gamma(&conn.gamma_jet(&p.x, 2)?)
    }

    /// Residuals of the curvature dictionary of `D` at `p`.
    pub fn curvature_dictionary(&self, p: &BundlePoint) -> Result<DictionaryReport> {
        let n = self.n();
        let m = 2 * n;
        let tc = self.torsion_curvature_d(p)?;
        let y = self.universal_cotton_york(p)?;
        let w = weyl_from_gamma(&self.base.gamma_jet(&p.x, 1)?);
        let mut torsion_plus = 0.0f64;
        let mut torsion_minus = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let t = tc.torsion(c, a, b);
                    if a >= n || b >= n {
                        torsion_plus = torsion_plus.max(t.abs());
                    } else {
                        let expected = if c >= n { y.value_at(&[a, b, c - n]) } else { 0.0 };
                        torsion_minus = torsion_minus.max((t - expected).abs());
                    }
                }
            }
        }
        let mut rho_minus = 0.0f64;
        let mut rho_mixed = 0.0f64;
        let mut rho_plus = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                let expected: Vec<f64> = match (a < n, b < n) {
                    (true, true) => weyl_action(&w, a, b),
                    (true, false) => algebraic_bracket_g0(&unit(n, a), &unit(n, b - n)).iter().map(|v| -v).collect(),
                    (false, true) => algebraic_bracket_g0(&unit(n, b), &unit(n, a - n)),
                    (false, false) => vec![0.0; m * m],
                };
                let mut worst = 0.0f64;
                for d in 0..m {
                    for c in 0..m {
                        worst = worst.max((tc.curvature(a, b, d, c) - expected[d * m + c]).abs());
                    }
                }
                match (a < n, b < n) {
                    (true, true) => rho_minus = rho_minus.max(worst),
                    (false, false) => rho_plus = rho_plus.max(worst),
                    _ => rho_mixed = rho_mixed.max(worst),
                }
            }
        }
        Ok(DictionaryReport { torsion_plus, torsion_minus, rho_minus, rho_mixed, rho_plus })
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Endomorphism of `L⁻ ⊕ L⁺` given by `W_{ab}`: `W_{ab}{}^k{}_l` on `L⁻` and
/// the dual action on `L⁺`.
fn weyl_action(w: &TensorJet, a: usize, b: usize) -> Vec<f64> {
    let n = w.dim();
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for k in 0..n {
        for l in 0..n {
            out[k * m + l] = w.value_at(&[a, b, k, l]);
            out[(n + l) * m + n + k] = -w.value_at(&[a, b, k, l]);
        }
    }
    out
}

fn canonical_connection_from(jets: &BundleJets, order: usize) -> TensorJet {
    let n = jets.n;
    let m = 2 * n;
    let a = jets.a.truncate(order + 1);
    let f = frame_jets(&a.truncate(order));
    let theta = coframe_jets(&a);
    let dtheta: Vec<Vec<Jet>> = theta.iter().map(|t| (0..m).map(|mu| t.derivative(mu)).collect()).collect();
    let theta: Vec<Jet> = theta.iter().map(|t| t.truncate(order)).collect();
    let gp = jets.gamma_psi.truncate(order);
    let w = connection_form(&BundleJets { gamma_psi: gp, ..jets.clone() });
    let w: Vec<Jet> = w.iter().map(|j| j.truncate(order)).collect();
    TensorJet::from_fn(m, GAMMA_SLOTS.to_vec(), weight(0), |idx| {
        let (l, mu, nu) = (idx[0], idx[1], idx[2]);
        let mut acc = f[0].zero_like();
        for c in 0..m {
            let flc = &f[l * m + c];
            if flc.max_abs_coeff() == 0.0 {
                continue;
            }
            let mut inner = dtheta[c * m + nu][mu].clone();
            for b in 0..m {
                let wv = &w[(mu * m + c) * m + b];
                if wv.max_abs_coeff() == 0.0 {
                    continue;
                }
                inner = inner + &theta[b * m + nu] * wv;
            }
            acc = acc + flc * &inner;
        }
        acc
    })
}

/// Coordinate components of the `L⁻` lift `ξ^i ẽ_i`.
pub fn lift_vector(xi: &[Jet], a: &TensorJet) -> Vec<Jet> {
    let n = xi.len();
    let order = xi[0].order().min(a.order());
    let mut out: Vec<Jet> = xi.iter().map(|j| j.truncate(order)).collect();
    for j in 0..n {
        let mut acc = xi[0].zero_like().truncate(order);
        for i in 0..n {
            acc = acc - xi[i].truncate(order) * a.get(&[i, j]).truncate(order);
        }
        out.push(acc);
    }
    out
}

/// Coordinate components of the `L⁺` lift `α_j ẽ^j`.
pub fn lift_covector(alpha: &[Jet]) -> Vec<Jet> {
    let zero = alpha[0].zero_like();
    alpha.iter().map(|_| zero.clone()).chain(alpha.iter().cloned()).collect()
}

/// Value of the coordinate Lie bracket `[X, Y]` of two vector fields given by
/// first-order (or higher) jets.
pub fn lie_bracket(x: &[Jet], y: &[Jet]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .map(|l| (0..m).map(|mu| x[mu].value() * y[l].d1(mu) - y[mu].value() * x[l].d1(mu)).sum())
        .collect()
}

/// Max over all coordinate triples of `|dΩ|`.
pub fn exterior_derivative_max(omega: &TensorJet) -> f64 {
    let m = omega.dim();
    let d = omega.partial();
    let mut worst = 0.0f64;
    for l in 0..m {
        for mu in l + 1..m {
            for nu in mu + 1..m {
                let v = d.value_at(&[l, mu, nu]) + d.value_at(&[mu, nu, l]) + d.value_at(&[nu, l, mu]);
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// The `g₀`-part of the bracket of `ξ ∈ g₋` and `α ∈ g₊` in `sl(n+1)`,
/// acting on `g₋ ⊕ g₊ ≅ L⁻ ⊕ L⁺`. Returned as a row-major `2n × 2n` matrix
/// in the frame basis.
///
/// `ξ` sits in the lower-left column and `α` in the upper-right row of an
/// `(n+1) × (n+1)` matrix; the result is `ad([X_ξ, Z_α])` restricted to the
/// two off-diagonal blocks.
pub fn algebraic_bracket_g0(xi: &[f64], alpha: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let d = n + 1;
    let mut x = vec![0.0; d * d];
    let mut z = vec![0.0; d * d];
    for a in 0..n {
        x[(1 + a) * d] = xi[a];
        z[1 + a] = alpha[a];
    }
    let bracket = commutator(&x, &z, d);
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for c in 0..n {
        let mut y = vec![0.0; d * d];
        y[(1 + c) * d] = 1.0;
        let r = commutator(&bracket, &y, d);
        for k in 0..n {
            out[k * m + c] = r[(1 + k) * d];
        }
        let mut w = vec![0.0; d * d];
        w[1 + c] = 1.0;
        let r = commutator(&bracket, &w, d);
        for k in 0..n {
            out[(n + k) * m + n + c] = r[1 + k];
        }
    }
    out
}

fn commutator(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j] - b[i * d + k] * a[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
    out
}

/// Torsion `τ(e_a, e_b) = torsion(c, a, b) e_c` and curvature
/// `ρ(e_a, e_b) e_c = curvature(a, b, d, c) e_d` in the adapted frame.
#[derive(Debug, Clone)]
pub struct TorsionCurvature {
    pub dim: usize,
    torsion: Vec<f64>,
    curvature: Vec<f64>,
}

impl TorsionCurvature {
    pub fn torsion(&self, c: usize, a: usize, b: usize) -> f64 {
        let m = self.dim;
        self.torsion[(c * m + a) * m + b]
    }

    pub fn curvature(&self, a: usize, b: usize, d: usize, c: usize) -> f64 {
        let m = self.dim;
        self.curvature[((a * m + b) * m + d) * m + c]
    }
}

/// Coordinate Christoffel symbols of `h`, `[λ][μ][ν]` row-major.
#[derive(Debug, Clone)]
pub struct LeviCivitaH {
    pub dim: usize,
    pub from_metric: Vec<f64>,
    pub from_contorsion: Vec<f64>,
    pub contorsion: Vec<f64>,
}

impl LeviCivitaH {
    pub fn route_difference(&self) -> f64 {
        self.from_metric.iter().zip(&self.from_contorsion).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EinsteinSample {
    pub lambda: f64,
    pub einstein_residual: f64,
    pub domega_residual: f64,
}

#[derive(Debug, Clone)]
pub struct EinsteinReport {
    pub samples: Vec<EinsteinSample>,
}

impl EinsteinReport {
    pub fn max_einstein_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.einstein_residual).fold(0.0, f64::max)
    }

    pub fn max_domega(&self) -> f64 {
        self.samples.iter().map(|s| s.domega_residual).fold(0.0, f64::max)
    }

    /// Largest deviation of a per-point `λ` from the first one.
    pub fn lambda_spread(&self) -> f64 {
        let l0 = self.samples[0].lambda;
        self.samples.iter().map(|s| (s.lambda - l0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BracketReport {
    /// `|[α̃, β̃]|`.
    pub alpha_beta: f64,
    /// `|[ξ̃, α̃] − D_{ξ̃}α̃|`.
    pub xi_alpha: f64,
    /// `L⁻` part of `[ξ̃, α̃]` (it is an `L⁺` field).
    pub xi_alpha_minus: f64,
    /// `L⁻` part of `[ξ̃, η̃]` minus the lift of `[ξ, η]`.
    pub minus_part: f64,
    /// `L⁺` part of `[ξ̃, η̃]` plus `Y(ξ, η)`.
    pub plus_part: f64,
}

impl BracketReport {
    pub fn max(&self) -> f64 {
        [self.alpha_beta, self.xi_alpha, self.xi_alpha_minus, self.minus_part, self.plus_part].into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DictionaryReport {
    /// Torsion with at least one `L⁺` argument.
    pub torsion_plus: f64,
    /// Torsion on `L⁻ × L⁻` minus `Y`.
    pub torsion_minus: f64,
    /// Curvature on `L⁻ × L⁻` minus the `W`-action.
    pub rho_minus: f64,
    /// Curvature on `L⁻ × L⁺` plus the `{,}₀`-action.
    pub rho_mixed: f64,
    /// Curvature on `L⁺ × L⁺`.
    pub rho_plus: f64,
}
