//! Small dense linear algebra on jets and on plain floats.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Inverse of a row-major `n × n` matrix of jets (Gauss–Jordan with partial
/// pivoting on values). Returns `None` when the value matrix is singular.
pub fn invert_jets(m: &[Jet], n: usize) -> Option<Vec<Jet>> {
    assert_eq!(m.len(), n * n);
    let scale = m.iter().fold(0.0f64, |s, j| s.max(j.value().abs()));
    if scale == 0.0 {
        return None;
    }
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| m[0].constant_like(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r * n + col].value().abs().total_cmp(&a[s * n + col].value().abs()))
            .expect("non-empty range");
        if a[pivot_row * n + col].value().abs() <= 1e-13 * scale {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let p = a[col * n + col].recip().ok()?;
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &p;
            inv[col * n + k] = &inv[col * n + k] * &p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col].clone();
            if f.max_abs_coeff() == 0.0 {
                continue;
            }
            for k in 0..n {
                a[r * n + k] = &a[r * n + k] - &(&f * &a[col * n + k]);
                inv[r * n + k] = &inv[r * n + k] - &(&f * &inv[col * n + k]);
            }
        }
    }
    Some(inv)
}

/// Determinant by permutation expansion; exact in jet arithmetic, so it stays
/// valid at points where the matrix is singular.
pub fn det_jets(m: &[Jet], n: usize) -> Jet {
    assert_eq!(m.len(), n * n);
    let mut total = m[0].zero_like();
    let mut perm: Vec<usize> = (0..n).collect();
    for_each_permutation(&mut perm, 0, 1.0, &mut |p, sign| {
        let mut term = m[0].constant_like(sign);
        for (row, &col) in p.iter().enumerate() {
            term = &term * &m[row * n + col];
        }
        total = &total + &term;
    });
    total
}

/// Visits every permutation of `perm[k..]` with its sign relative to the
/// identity.
pub fn for_each_permutation(perm: &mut [usize], k: usize, sign: f64, f: &mut impl FnMut(&[usize], f64)) {
    if k == perm.len() {
        f(perm, sign);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        for_each_permutation(perm, k + 1, if i == k { sign } else { -sign }, f);
        perm.swap(k, i);
    }
}

/// Permutation symbol of a sequence of distinct-or-repeated indices.
pub fn levi_civita_symbol(idx: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

pub fn to_dmatrix(values: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, values)
}

pub fn det(values: &[f64], n: usize) -> f64 {
    to_dmatrix(values, n).determinant()
}

pub fn inverse(values: &[f64], n: usize, point: &[f64]) -> Result<Vec<f64>> {
    let m = to_dmatrix(values, n);
    let inv = m.try_inverse().ok_or_else(|| Error::SingularForm { point: point.to_vec() })?;
    Ok(inv.transpose().as_slice().to_vec())
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(values: &[f64], n: usize) -> Vec<f64> {
    let m = to_dmatrix(values, n);
    let sym = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `(positive, negative, zero)` eigenvalue counts with relative cut-off `tol`.
pub fn signature(values: &[f64], n: usize, tol: f64) -> (usize, usize, usize) {
    let ev = sym_eigenvalues(values, n);
    let scale = ev.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    let pos = ev.iter().filter(|&&v| v > tol * scale).count();
    let neg = ev.iter().filter(|&&v| v < -tol * scale).count();
    (pos, neg, n - pos - neg)
}
