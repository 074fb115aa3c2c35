#![allow(dead_code, unused_imports)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use weylab::catalog::{random_metric, random_one_form};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cube(n: usize) -> weylab::Chart {
    weylab::Chart::new(n, weylab::Domain::Cube { half_width: 1.0 }).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1e-300f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
