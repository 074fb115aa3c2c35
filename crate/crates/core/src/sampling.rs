//! Reproducible quasi-random sample points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::Domain;

/// Distance kept from the domain boundary.
pub const MARGIN: f64 = 0.1;

/// Half-width of the sampling box used for unbounded domains.
const UNBOUNDED_HALF_WIDTH: f64 = 1.0;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` points in `domain`, at least [`MARGIN`] away from its boundary.
///
/// Points come from a Halton sequence with a Cranley–Patterson rotation drawn
/// from a ChaCha8 generator seeded with `seed`; balls are filled by rejection.
pub fn sample_points(domain: &Domain, dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "sampling supports up to {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let (half, radius) = match *domain {
        Domain::Everywhere => (UNBOUNDED_HALF_WIDTH - MARGIN, None),
        Domain::Cube { half_width } => (half_width - MARGIN, None),
        Domain::Ball { radius } => (radius - MARGIN, Some(radius - MARGIN)),
    };
    assert!(half > 0.0, "domain too small for the sampling margin");
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let x: Vec<f64> = (0..dim)
            .map(|d| {
                let u = (radical_inverse(index, PRIMES[d]) + shift[d]).fract();
                half * (2.0 * u - 1.0)
            })
            .collect();
        index += 1;
        if let Some(r) = radius {
            if x.iter().map(|v| v * v).sum::<f64>() >= r * r {
                continue;
            }
        }
        out.push(x);
    }
    out
}

/// `count` fiber coordinate vectors uniform in `[-fiber_scale, fiber_scale)`,
/// from a ChaCha8 generator seeded with `seed + 0x9e3779b97f4a7c15`.
pub fn fiber_coordinates(dim: usize, count: usize, seed: u64, fiber_scale: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    (0..count).map(|_| (0..dim).map(|_| rng.random_range(-fiber_scale..fiber_scale)).collect()).collect()
}

/// Base points from [`sample_points`] paired with [`fiber_coordinates`].
pub fn sample_bundle_points(domain: &Domain, dim: usize, count: usize, seed: u64, fiber_scale: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    sample_points(domain, dim, count, seed).into_iter().zip(fiber_coordinates(dim, count, seed, fiber_scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn points_respect_margin_and_are_reproducible() {
        let ball = Domain::Ball { radius: 1.0 };
        let a = sample_points(&ball, 3, 50, 7);
        assert_eq!(a, sample_points(&ball, 3, 50, 7));
        assert_ne!(a, sample_points(&ball, 3, 50, 8));
        assert!(a.iter().all(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.9));
        let cube = sample_points(&Domain::Cube { half_width: 1.0 }, 2, 50, 1);
        assert!(cube.iter().flatten().all(|v| v.abs() < 0.9));
    }
}
