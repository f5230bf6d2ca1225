//! Seeded point and pair samplers over rectangles of gradient space.

use crate::geom::{Rect, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded generator used across the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_point<R: Rng>(rng: &mut R, b: &Rect) -> Vec2 {
    Vec2::new(rng.random_range(b.min.x..=b.max.x), rng.random_range(b.min.y..=b.max.y))
}

fn unit_dir<R: Rng>(rng: &mut R) -> Vec2 {
    Vec2::polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Smallest pair separation, relative to the box diameter.
pub const MIN_REL_SCALE: f64 = 1e-4;

/// Multi-scale pairs `(ξ, ζ)` in `b`, with `ξ ≠ ζ`.
///
/// Four families: independent uniform pairs, pairs with log-uniform separation,
/// pairs symmetric about nodes of a 9×9 lattice (which contains the box center)
/// at log-uniform scales, and pairs symmetric about uniform centers.
pub fn sample_pairs(b: &Rect, n: usize, seed: u64) -> Vec<(Vec2, Vec2)> {
    let mut rng = rng(seed);
    let diam = b.diameter();
    let log_lo = (MIN_REL_SCALE * diam).ln();
    let log_hi = diam.ln();
    let mut out = Vec::with_capacity(n);
    let lattice = |k: usize| {
        let i = k % 9;
        let j = (k / 9) % 9;
        Vec2::new(b.min.x + b.width() * i as f64 / 8.0, b.min.y + b.height() * j as f64 / 8.0)
    };
    let mut k = 0usize;
    while out.len() < n {
        let family = out.len() % 5;
        let pair = match family {
            0 | 1 => {
                let xi = uniform_point(&mut rng, b);
                let zeta = if family == 0 {
                    uniform_point(&mut rng, b)
                } else {
                    let s = rng.random_range(log_lo..log_hi).exp();
                    xi + unit_dir(&mut rng) * s
                };
                (xi, zeta)
            }
            2 | 3 => {
                let c = if family == 2 {
                    k += 1;
                    lattice(k * 7)
                } else {
                    uniform_point(&mut rng, b)
                };
                let s = rng.random_range(log_lo..log_hi).exp();
                let d = unit_dir(&mut rng) * (0.5 * s);
                (c - d, c + d)
            }
            _ => {
                let xi = uniform_point(&mut rng, b);
                let s = rng.random_range(log_lo..log_hi).exp();
                (xi, xi + unit_dir(&mut rng) * s)
            }
        };
        if b.contains(pair.0) && b.contains(pair.1) && pair.0 != pair.1 {
            out.push(pair);
        }
    }
    out
}

/// Short pairs along rays from the origin, `|ξ| ≤ r_max`, separations in `[1e-3, 1e-1]·r_max`.
pub fn radial_pairs(r_max: f64, n: usize, seed: u64) -> Vec<(Vec2, Vec2)> {
    let mut rng = rng(seed);
    (0..n)
        .map(|_| {
            let d = unit_dir(&mut rng);
            let dr = r_max * rng.random_range((1e-3f64).ln()..(0.1f64).ln()).exp();
            let r = rng.random_range(0.0..(r_max - dr));
            (d * r, d * (r + dr))
        })
        .collect()
}

/// Uniform points in `b`.
pub fn sample_points(b: &Rect, n: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = rng(seed);
    (0..n).map(|_| uniform_point(&mut rng, b)).collect()
}
