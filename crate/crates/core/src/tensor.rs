//! Tensors whose components are jets at a single expansion point.
//!
//! Components are stored row-major over the slots in declaration order (the
//! last slot varies fastest). Slots may be interleaved freely, e.g. the
//! curvature tensor `R_{ij}{}^k{}_l` has slots `[Down, Down, Up, Down]`.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg;

/// Projective density weight.
pub type Weight = Ratio<i64>;

pub fn weight(w: i64) -> Weight {
    Ratio::from_integer(w)
}

pub fn weight_to_f64(w: Weight) -> f64 {
    *w.numer() as f64 / *w.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Up,
    Down,
}

#[derive(Debug, Clone)]
pub struct TensorJet {
    dim: usize,
    slots: Vec<Slot>,
    weight: Weight,
    comps: Vec<Jet>,
}

/// Row-major multi-index enumeration of `rank` slots of range `dim`.
pub fn multi_indices(rank: usize, dim: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = dim.pow(rank as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; rank];
        for slot in (0..rank).rev() {
            idx[slot] = flat % dim;
            flat /= dim;
        }
        idx
    })
}

impl TensorJet {
    pub fn new(dim: usize, slots: Vec<Slot>, weight: Weight, comps: Vec<Jet>) -> Result<Self> {
        let expected = dim.pow(slots.len() as u32);
        if comps.len() != expected {
            return Err(Error::Shape(format!("expected {expected} components, got {}", comps.len())));
        }
        Ok(TensorJet { dim, slots, weight, comps })
    }

    pub fn from_fn(dim: usize, slots: Vec<Slot>, weight: Weight, mut f: impl FnMut(&[usize]) -> Jet) -> Self {
        let comps = multi_indices(slots.len(), dim).map(|idx| f(&idx)).collect();
        TensorJet { dim, slots, weight, comps }
    }

    pub fn scalar(value: Jet, weight: Weight) -> Self {
        TensorJet { dim: value.nvars().max(1), slots: Vec::new(), weight, comps: vec![value] }
    }

    /// Scalar over a chart of dimension `dim` (the component jet may live in
    /// more variables than `dim`).
    pub fn scalar_on(dim: usize, value: Jet, weight: Weight) -> Self {
        TensorJet { dim, slots: Vec::new(), weight, comps: vec![value] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    /// `(contravariant, covariant)` slot counts.
    pub fn valence(&self) -> (usize, usize) {
        let up = self.slots.iter().filter(|s| **s == Slot::Up).count();
        (up, self.slots.len() - up)
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn with_weight(mut self, w: Weight) -> Self {
        self.weight = w;
        self
    }

    pub fn components(&self) -> &[Jet] {
        &self.comps
    }

    pub fn order(&self) -> usize {
        self.comps.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn nvars(&self) -> usize {
        self.comps[0].nvars()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.slots.len());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.comps[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: Jet) {
        let o = self.offset(idx);
        self.comps[o] = value;
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.get(idx).value()
    }

    pub fn max_abs_value(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, j| m.max(j.value().abs()))
    }

    /// Max componentwise difference of values; shapes must agree.
    pub fn max_abs_diff(&self, other: &TensorJet) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.comps.iter().zip(&other.comps).fold(0.0, |m, (a, b)| m.max((a.value() - b.value()).abs())))
    }

    fn check_same_shape(&self, other: &TensorJet) -> Result<()> {
        if self.dim != other.dim || self.slots != other.slots {
            return Err(Error::Shape(format!(
                "shape {:?}/{} vs {:?}/{}",
                self.slots, self.dim, other.slots, other.dim
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> Self {
        TensorJet { dim: self.dim, slots: self.slots.clone(), weight: self.weight, comps: self.comps.iter().map(f).collect() }
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.map(|j| j.truncate(order))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|j| j.scale(s))
    }

    pub fn embed(&self, nvars: usize) -> Self {
        self.map(|j| j.embed(nvars))
    }

    /// Componentwise sum; weights must agree.
    pub fn add(&self, other: &TensorJet) -> Result<Self> {
        self.check_same_shape(other)?;
        if self.weight != other.weight {
            return Err(Error::Shape(format!("adding weights {} and {}", self.weight, other.weight)));
        }
        Ok(TensorJet {
            dim: self.dim,
            slots: self.slots.clone(),
            weight: self.weight,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &TensorJet) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Tensor product; slots concatenate and weights add.
    pub fn product(&self, other: &TensorJet) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!("dimensions {} and {}", self.dim, other.dim)));
        }
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&other.slots);
        let mut comps = Vec::with_capacity(self.comps.len() * other.comps.len());
        for a in &self.comps {
            for b in &other.comps {
                comps.push(a * b);
            }
        }
        Ok(TensorJet { dim: self.dim, slots, weight: self.weight + other.weight, comps })
    }

    /// Trace over one contravariant and one covariant slot.
    pub fn contract(&self, up: usize, down: usize) -> Result<Self> {
        if up >= self.rank() || down >= self.rank() || self.slots[up] != Slot::Up || self.slots[down] != Slot::Down {
            return Err(Error::Shape(format!("cannot contract slots {up} and {down} of {:?}", self.slots)));
        }
        let slots: Vec<Slot> =
            self.slots.iter().enumerate().filter(|(i, _)| *i != up && *i != down).map(|(_, s)| *s).collect();
        let dim = self.dim;
        Ok(TensorJet::from_fn(dim, slots, self.weight, |rest| {
            let mut full = vec![0; self.rank()];
            let mut it = rest.iter();
            for (i, f) in full.iter_mut().enumerate() {
                if i != up && i != down {
                    *f = *it.next().expect("index");
                }
            }
            let mut acc = self.comps[0].zero_like();
            for k in 0..dim {
                full[up] = k;
                full[down] = k;
                acc = acc + self.get(&full);
            }
            acc
        }))
    }

    /// Reorders slots: slot `i` of the result is slot `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Shape(format!("invalid permutation {perm:?}")));
        }
        let slots = perm.iter().map(|&p| self.slots[p]).collect();
        Ok(TensorJet::from_fn(self.dim, slots, self.weight, |idx| {
            let mut src = vec![0; rank];
            for (i, &p) in perm.iter().enumerate() {
                src[p] = idx[i];
            }
            self.get(&src).clone()
        }))
    }

    fn check_group(&self, group: &[usize]) -> Result<()> {
        if group.is_empty() || group.iter().any(|&s| s >= self.rank()) {
            return Err(Error::Shape(format!("invalid slot group {group:?}")));
        }
        let kind = self.slots[group[0]];
        if group.iter().any(|&s| self.slots[s] != kind) {
            return Err(Error::Shape("cannot symmetrize slots of different variance".into()));
        }
        Ok(())
    }

    fn average_over_group(&self, group: &[usize], signed: bool) -> Result<Self> {
        self.check_group(group)?;
        let k = group.len();
        let mut perms = Vec::new();
        let mut base: Vec<usize> = (0..k).collect();
        linalg::for_each_permutation(&mut base, 0, 1.0, &mut |p, s| perms.push((p.to_vec(), s)));
        let norm = 1.0 / perms.len() as f64;
        Ok(TensorJet::from_fn(self.dim, self.slots.clone(), self.weight, |idx| {
            let mut acc = self.comps[0].zero_like();
            let mut src = idx.to_vec();
            for (p, sign) in &perms {
                for (i, &slot) in group.iter().enumerate() {
                    src[slot] = idx[group[p[i]]];
                }
                let term = self.get(&src);
                acc = if signed && *sign < 0.0 { acc - term } else { acc + term };
            }
            acc.scale(norm)
        }))
    }

    /// Symmetrization over `group` with the `1/k!` normalization.
    pub fn symmetrize(&self, group: &[usize]) -> Result<Self> {
        self.average_over_group(group, false)
    }

    /// Alternation over `group` with the `1/k!` normalization.
    pub fn alternate(&self, group: &[usize]) -> Result<Self> {
        self.average_over_group(group, true)
    }

    /// Lowers a contravariant slot with a `(0,2)` form: `T^{..a..} ↦ g_{ba} T^{..a..}`.
    pub fn lower(&self, slot: usize, form: &TensorJet) -> Result<Self> {
        self.apply_form(slot, form, Slot::Up, Slot::Down)
    }

    /// Raises a covariant slot with the inverse of a non-degenerate `(0,2)`
    /// form. `point` is only used for error reporting.
    pub fn raise(&self, slot: usize, form: &TensorJet, point: &[f64]) -> Result<Self> {
        let inv = form.inverse_form(point)?;
        self.apply_form(slot, &inv, Slot::Down, Slot::Up)
    }

    fn apply_form(&self, slot: usize, form: &TensorJet, from: Slot, to: Slot) -> Result<Self> {
        if slot >= self.rank() || self.slots[slot] != from || form.rank() != 2 || form.dim != self.dim {
            return Err(Error::Shape(format!("cannot move slot {slot} of {:?}", self.slots)));
        }
        let mut slots = self.slots.clone();
        slots[slot] = to;
        let dim = self.dim;
        Ok(TensorJet::from_fn(dim, slots, self.weight + form.weight, |idx| {
            let mut src = idx.to_vec();
            let mut acc = self.comps[0].zero_like();
            for a in 0..dim {
                src[slot] = a;
                acc = acc + form.get(&[idx[slot], a]) * self.get(&src);
            }
            acc
        }))
    }

    /// Inverse of a rank-2 form (both slots flipped), as jets.
    pub fn inverse_form(&self, point: &[f64]) -> Result<Self> {
        if self.rank() != 2 || self.slots[0] != self.slots[1] {
            return Err(Error::Shape("inverse needs a rank-2 form".into()));
        }
        let inv = linalg::invert_jets(&self.comps, self.dim)
            .ok_or_else(|| Error::SingularForm { point: point.to_vec() })?;
        let flipped = match self.slots[0] {
            Slot::Down => Slot::Up,
            Slot::Up => Slot::Down,
        };
        Ok(TensorJet { dim: self.dim, slots: vec![flipped, flipped], weight: -self.weight, comps: inv })
    }

    /// Coordinate partial derivative; prepends a covariant slot and lowers the
    /// order by one. Variables `0..dim` of the jets are the chart coordinates.
    pub fn partial(&self) -> Self {
        let mut slots = vec![Slot::Down];
        slots.extend_from_slice(&self.slots);
        let inner = self.comps.len();
        let mut comps = Vec::with_capacity(self.dim * inner);
        for i in 0..self.dim {
            comps.extend(self.comps.iter().map(|c| c.derivative(i)));
        }
        debug_assert_eq!(comps.len(), self.dim * inner);
        TensorJet { dim: self.dim, slots, weight: self.weight, comps }
    }

    /// Covariant derivative `∇_i T` with connection coefficients
    /// `gamma[k][i][j] = Γ^k_{ij}` (so `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`).
    ///
    /// The new covariant slot is prepended (slot 0). A density weight `w`
    /// contributes `(w/(n+1)) Γ^k_{ki} T`, where `n` is `density_dim`.
    pub fn covariant_derivative(&self, gamma: &TensorJet, density_dim: usize) -> Result<Self> {
        if gamma.dim != self.dim || gamma.slots != [Slot::Up, Slot::Down, Slot::Down] {
            return Err(Error::Shape("connection coefficients must be a (1,2) tensor of matching dimension".into()));
        }
        let d = self.partial();
        let order = d.order().min(gamma.order());
        let gamma = gamma.truncate(order);
        let dim = self.dim;
        let w = weight_to_f64(self.weight);
        let trace: Vec<Jet> = if w != 0.0 {
            (0..dim)
                .map(|i| {
                    let mut acc = gamma.comps[0].zero_like();
                    for k in 0..dim {
                        acc = acc + gamma.get(&[k, k, i]);
                    }
                    acc.scale(w / (density_dim as f64 + 1.0))
                })
                .collect()
        } else {
            Vec::new()
        };
        let slots = d.slots.clone();
        let mut out = Vec::with_capacity(d.comps.len());
        for idx in multi_indices(slots.len(), dim) {
            let i = idx[0];
            let rest = &idx[1..];
            let mut acc = d.get(&idx).truncate(order);
            let mut src = rest.to_vec();
            for (s, kind) in self.slots.iter().enumerate() {
                let original = rest[s];
                for m in 0..dim {
                    src[s] = m;
                    let t = self.get(&src).truncate(order);
                    match kind {
                        Slot::Up => acc = acc + gamma.get(&[original, i, m]) * &t,
                        Slot::Down => acc = acc - gamma.get(&[m, i, original]) * &t,
                    }
                }
                src[s] = original;
            }
            if w != 0.0 {
                acc = acc + &trace[i] * &self.get(rest).truncate(order);
            }
            out.push(acc);
        }
        Ok(TensorJet { dim, slots, weight: self.weight, comps: out })
    }
}
