//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor expansion of a scalar function around an
//! expansion point, truncated at total degree `order` (at most [`MAX_ORDER`]).
//! Internally coefficients are Taylor-normalized (`∂^α f / α!`), which makes
//! products a plain Cauchy product. The public accessors [`Jet::partial`] and
//! [`Jet::raw_partials`] return raw partial derivatives `∂^α f` (not divided
//! by factorials).
//!
//! Monomials are enumerated in graded order: all monomials of degree `d` come
//! before any monomial of degree `d + 1`. The monomials of degree `≤ k` are
//! therefore a prefix of the list, so truncation is slicing and the derivative
//! of an order-`k` jet lands in the same index layout at order `k - 1`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Hard cap on jet order.
pub const MAX_ORDER: usize = 4;

/// Exponent vector of a monomial, one entry per variable.
pub type MultiIndex = Vec<u8>;

/// Monomial layout shared by all jets in a fixed number of variables.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    exps: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `len_upto[k]` = number of monomials of degree ≤ k.
    len_upto: Vec<usize>,
    /// `(i, j, k)` with `exps[i] + exps[j] = exps[k]`, sorted by `k`.
    mul: Vec<(u32, u32, u32)>,
    /// Per variable: `(src, dst, factor)` so that `d[dst] += factor * c[src]`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    factorial: Vec<f64>,
}

impl JetSpace {
    fn build(nvars: usize) -> Self {
        let mut exps: Vec<MultiIndex> = Vec::new();
        let mut len_upto = Vec::with_capacity(MAX_ORDER + 1);
        for degree in 0..=MAX_ORDER {
            let mut current = vec![0u8; nvars];
            push_degree(&mut exps, &mut current, 0, degree as u8);
            len_upto.push(exps.len());
        }
        let lookup: HashMap<MultiIndex, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let mut mul = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                let da: usize = a.iter().map(|&v| v as usize).sum();
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > MAX_ORDER {
                    continue;
                }
                let sum: MultiIndex = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }
        mul.sort_by_key(|&(_, _, k)| k);

        let mut deriv = vec![Vec::new(); nvars];
        for (var, table) in deriv.iter_mut().enumerate() {
            for (src, e) in exps.iter().enumerate() {
                if e[var] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[var] -= 1;
                table.push((src as u32, lookup[&lowered] as u32, e[var] as f64));
            }
        }

        let factorial = exps
            .iter()
            .map(|e| e.iter().map(|&v| fact(v as usize)).product())
            .collect();

        JetSpace { nvars, exps, lookup, len_upto, mul, deriv, factorial }
    }

    /// Shared space for `nvars` variables.
    pub fn get(nvars: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard.entry(nvars).or_insert_with(|| Arc::new(JetSpace::build(nvars))).clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of coefficients of a jet of the given order.
    pub fn len(&self, order: usize) -> usize {
        self.len_upto[order]
    }

    /// Monomial exponents in storage order.
    pub fn monomials(&self, order: usize) -> &[MultiIndex] {
        &self.exps[..self.len_upto[order]]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

fn push_degree(out: &mut Vec<MultiIndex>, current: &mut MultiIndex, var: usize, remaining: u8) {
    if var + 1 == current.len() {
        current[var] = remaining;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for take in (0..=remaining).rev() {
        current[var] = take;
        push_degree(out, current, var + 1, remaining - take);
    }
    current[var] = 0;
}

fn fact(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Truncated Taylor expansion of a scalar function.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars)
            .field("order", &self.order)
            .field("coeffs", &self.c)
            .finish()
    }
}

impl Jet {
    pub fn check_order(order: usize) -> Result<()> {
        if order > MAX_ORDER {
            return Err(Error::Order { requested: order, max: MAX_ORDER });
        }
        Ok(())
    }

    pub fn constant(nvars: usize, order: usize, value: f64) -> Self {
        let space = JetSpace::get(nvars);
        let mut c = vec![0.0; space.len(order)];
        c[0] = value;
        Jet { space, order, c }
    }

    pub fn zero(nvars: usize, order: usize) -> Self {
        Self::constant(nvars, order, 0.0)
    }

    /// The coordinate function `x_var` expanded at `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Self {
        let mut j = Self::constant(nvars, order, value);
        if order >= 1 {
            let mut e = vec![0u8; nvars];
            e[var] = 1;
            let idx = j.space.index_of(&e).expect("degree-1 monomial");
            j.c[idx] = 1.0;
        }
        j
    }

    /// Builds a jet from raw partial derivatives listed in storage order.
    pub fn from_raw_partials(nvars: usize, order: usize, raw: &[f64]) -> Self {
        let space = JetSpace::get(nvars);
        let n = space.len(order);
        assert_eq!(raw.len(), n, "raw partial count mismatch");
        let c = raw.iter().zip(&space.factorial[..n]).map(|(r, f)| r / f).collect();
        Jet { space, order, c }
    }

    pub fn zero_like(&self) -> Self {
        Jet { space: self.space.clone(), order: self.order, c: vec![0.0; self.c.len()] }
    }

    pub fn constant_like(&self, value: f64) -> Self {
        let mut z = self.zero_like();
        z.c[0] = value;
        z
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor-normalized coefficients in storage order.
    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Raw partial derivative `∂^α f` at the expansion point, or `None` when
    /// `|α|` exceeds the jet order.
    pub fn partial(&self, alpha: &[u8]) -> Option<f64> {
        let idx = self.space.index_of(alpha)?;
        if idx >= self.c.len() {
            return None;
        }
        Some(self.c[idx] * self.space.factorial[idx])
    }

    /// All raw partial derivatives keyed by multi-index.
    pub fn raw_partials(&self) -> Vec<(MultiIndex, f64)> {
        self.space
            .monomials(self.order)
            .iter()
            .zip(self.c.iter().zip(&self.space.factorial))
            .map(|(e, (c, f))| (e.clone(), c * f))
            .collect()
    }

    /// First partial derivative `∂_var f` at the expansion point.
    pub fn d1(&self, var: usize) -> f64 {
        let mut e = vec![0u8; self.nvars()];
        e[var] = 1;
        self.partial(&e).unwrap_or(0.0)
    }

    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order {
            return self.clone();
        }
        Jet { space: self.space.clone(), order, c: self.c[..self.space.len(order)].to_vec() }
    }

    /// Partial derivative with respect to `var`; the result has order `order - 1`.
    pub fn derivative(&self, var: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let n = self.space.len(order);
        let mut d = vec![0.0; n];
        let len = self.c.len();
        for &(src, dst, factor) in &self.space.deriv[var] {
            let (src, dst) = (src as usize, dst as usize);
            if src < len && dst < n {
                d[dst] += factor * self.c[src];
            }
        }
        Jet { space: self.space.clone(), order, c: d }
    }

    /// Re-expresses a jet in `nvars` variables, `nvars ≥ self.nvars()`; the
    /// first variables of the target correspond to the variables of `self`.
    pub fn embed(&self, nvars: usize) -> Self {
        assert!(nvars >= self.nvars());
        let target = JetSpace::get(nvars);
        let mut c = vec![0.0; target.len(self.order)];
        for (e, v) in self.space.monomials(self.order).iter().zip(&self.c) {
            let mut padded = e.clone();
            padded.resize(nvars, 0);
            c[target.index_of(&padded).expect("embedded monomial")] = *v;
        }
        Jet { space: target, order: self.order, c }
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet { space: self.space.clone(), order: self.order, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    fn align(&self, other: &Jet) -> usize {
        assert_eq!(self.nvars(), other.nvars(), "jets over different variable counts");
        self.order.min(other.order)
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Self {
        let order = self.align(other);
        let n = self.space.len(order);
        let c = (0..n).map(|i| f(self.c[i], other.c[i])).collect();
        Jet { space: self.space.clone(), order, c }
    }

    pub fn mul_jet(&self, other: &Jet) -> Self {
        let order = self.align(other);
        let n = self.space.len(order);
        let mut c = vec![0.0; n];
        for &(i, j, k) in &self.space.mul {
            let k = k as usize;
            if k >= n {
                break;
            }
            c[k] += self.c[i as usize] * other.c[j as usize];
        }
        Jet { space: self.space.clone(), order, c }
    }

    /// `f(self)` given `derivs[k] = f^{(k)}(self.value())` for `k = 0..=order`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = self.constant_like(derivs[0]);
        let mut power = self.constant_like(1.0);
        let mut kfact = 1.0;
        for (k, dk) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            power = power.mul_jet(&delta);
            kfact *= k as f64;
            if *dk != 0.0 {
                for (o, p) in out.c.iter_mut().zip(&power.c) {
                    *o += dk / kfact * p;
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Result<Self> {
        let u = self.value();
        if u == 0.0 || !u.is_finite() {
            return Err(Error::Domain(format!("division by {u}")));
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut coef = 1.0;
        for k in 0..=self.order {
            d.push(coef * u.powi(-(k as i32) - 1));
            coef *= -((k + 1) as f64);
        }
        Ok(self.compose(&d))
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Self> {
        Ok(self.mul_jet(&other.recip()?))
    }

    /// Real power `self^p`; requires a positive value unless `p` is a
    /// non-negative integer.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let u = self.value();
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            return self.powi(p as i32);
        }
        if u <= 0.0 {
            return Err(Error::Domain(format!("non-integer power {p} of non-positive value {u}")));
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut coef = 1.0;
        for k in 0..=self.order {
            d.push(coef * u.powf(p - k as f64));
            coef *= p - k as f64;
        }
        Ok(self.compose(&d))
    }

    pub fn powi(&self, p: i32) -> Result<Self> {
        if p < 0 {
            return self.recip()?.powi(-p);
        }
        let mut out = self.constant_like(1.0);
        for _ in 0..p {
            out = out.mul_jet(self);
        }
        Ok(out)
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.value() <= 0.0 {
            return Err(Error::Domain(format!("sqrt of non-positive value {}", self.value())));
        }
        self.powf(0.5)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    pub fn ln(&self) -> Result<Self> {
        let u = self.value();
        if u <= 0.0 {
            return Err(Error::Domain(format!("log of non-positive value {u}")));
        }
        let mut d = vec![u.ln()];
        let mut coef = 1.0;
        for k in 1..=self.order {
            d.push(coef * u.powi(-(k as i32)));
            coef *= -(k as f64);
        }
        Ok(self.compose(&d))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

macro_rules! jet_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
jet_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
jet_binop!(Mul, mul, |a, b| a.mul_jet(b));

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for &Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Sum of jets; `None` for an empty iterator.
pub fn sum<'a>(items: impl IntoIterator<Item = &'a Jet>) -> Option<Jet> {
    let mut it = items.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, j| acc + j))
}
