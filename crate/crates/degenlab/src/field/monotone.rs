//! Sampled monotonicity diagnostics.

use super::sampling::sample_pairs;
use super::Field;
use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use rayon::prelude::*;
use serde::Serialize;

/// Quotients above this cap count as unbounded in the strong-monotonicity estimate.
pub const STRONG_CAP: f64 = 1e6;

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    /// `(t, ω̂(t))`.
    pub omega_samples: Vec<(f64, f64)>,
    pub strong_constant: Option<f64>,
    pub lipschitz_estimate: f64,
    /// Smallest `⟨ΔG, Δξ⟩` seen and the pair realizing it.
    pub min_inner: f64,
    pub worst_pair: (Vec2, Vec2),
}

/// Per-pair data: separation, inner product, `|ΔG|`.
pub(crate) fn pair_stats(field: &Field, pairs: &[(Vec2, Vec2)]) -> Vec<(f64, f64, f64)> {
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let d = a - b;
            let dg = field.eval(a) - field.eval(b);
            (d.norm(), dg.dot(d), dg.norm())
        })
        .collect()
}

/// Errors with the failing pair if some sampled `⟨ΔG, Δξ⟩` is not positive.
pub fn check_monotone(field: &Field, b: &Rect, n: usize, seed: u64) -> Result<()> {
    let pairs = sample_pairs(b, n, seed);
    let stats = pair_stats(field, &pairs);
    for (k, &(_, ip, _)) in stats.iter().enumerate() {
        if !(ip > 0.0) {
            let (xi, zeta) = pairs[k];
            if !field.eval(xi).is_finite() {
                return Err(Error::NonFinite(xi));
            }
            if !field.eval(zeta).is_finite() {
                return Err(Error::NonFinite(zeta));
            }
            return Err(Error::NotMonotone { xi, zeta, value: ip });
        }
    }
    Ok(())
}

/// `ω̂(t)` over an explicit pair set; `None` when no pair is separated by more than `t`.
pub fn monotony_modulus_on(field: &Field, pairs: &[(Vec2, Vec2)], t: f64) -> Option<f64> {
    let stats = pair_stats(field, pairs);
    omega_from_stats(&stats, t)
}

fn omega_from_stats(stats: &[(f64, f64, f64)], t: f64) -> Option<f64> {
    stats.iter().filter(|s| s.0 > t).map(|s| s.1).reduce(f64::min)
}

/// Sampled modulus of monotony `ω̂(t) = min ⟨G(ξ)−G(ζ), ξ−ζ⟩` over pairs with `|ξ−ζ| > t`.
pub fn monotony_modulus(field: &Field, t: f64, b: &Rect, n_samples: usize, seed: u64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("t must be positive".into()));
    }
    if n_samples < 1000 {
        return Err(Error::InvalidParameter("at least 1000 pairs are required".into()));
    }
    let pairs = sample_pairs(b, n_samples, seed);
    let stats = pair_stats(field, &pairs);
    let w = omega_from_stats(&stats, t)
        .ok_or_else(|| Error::InvalidParameter(format!("no sampled pair separated by more than {t}")))?;
    if !(w > 0.0) {
        let k = stats.iter().position(|s| s.0 > t && s.1 == w).unwrap_or(0);
        return Err(Error::NotMonotone { xi: pairs[k].0, zeta: pairs[k].1, value: w });
    }
    Ok(w)
}

fn strong_from_stats(stats: &[(f64, f64, f64)]) -> Option<f64> {
    let mut c: f64 = 0.0;
    for &(d, ip, dg) in stats {
        let q = (d * d + dg * dg) / ip;
        if !(q.is_finite() && q > 0.0) || q > STRONG_CAP {
            return None;
        }
        c = c.max(q);
    }
    Some(c)
}

/// Smallest `Ĉ` with `Ĉ⟨ΔG, Δξ⟩ ≥ |Δξ|² + |ΔG|²` on the sampled pairs; `None` if unbounded.
pub fn strong_monotonicity_constant(field: &Field, b: &Rect, n_samples: usize, seed: u64) -> Option<f64> {
    let pairs = sample_pairs(b, n_samples, seed);
    strong_from_stats(&pair_stats(field, &pairs))
}

/// All sampled monotonicity quantities from one pair set.
pub fn monotonicity_report(field: &Field, ts: &[f64], b: &Rect, n_samples: usize, seed: u64) -> MonotonicityReport {
    let pairs = sample_pairs(b, n_samples, seed);
    let stats = pair_stats(field, &pairs);
    let omega_samples = ts.iter().map(|&t| (t, omega_from_stats(&stats, t).unwrap_or(f64::NAN))).collect();
    let lipschitz_estimate = stats.iter().map(|s| s.2 / s.0).fold(0.0, f64::max);
    let (k, min_inner) = stats
        .iter()
        .enumerate()
        .map(|(k, s)| (k, s.1))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    MonotonicityReport {
        omega_samples,
        strong_constant: strong_from_stats(&stats),
        lipschitz_estimate,
        min_inner,
        worst_pair: pairs[k],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_builtin, BuiltinSpec};
    use approx::assert_relative_eq;

    fn b(spec: BuiltinSpec) -> Field {
        make_builtin(&spec).unwrap()
    }

    #[test]
    fn identity_modulus() {
        let bx = Rect::centered(2.0);
        let w = monotony_modulus(&b(BuiltinSpec::Identity), 1.0, &bx, 10_000, 1).unwrap();
        assert!((1.0..=1.0 / 0.95).contains(&w), "{w}");
        let w2 = monotony_modulus(&b(BuiltinSpec::IdentityScaled { c: 2.0 }), 1.0, &bx, 10_000, 1).unwrap();
        assert!((2.0..=2.0 / 0.95).contains(&w2), "{w2}");
    }

    #[test]
    fn strong_constants() {
        let bx = Rect::centered(2.0);
        let c1 = strong_monotonicity_constant(&b(BuiltinSpec::Identity), &bx, 5000, 3).unwrap();
        assert_relative_eq!(c1, 2.0, epsilon = 1e-12);
        let c2 = strong_monotonicity_constant(&b(BuiltinSpec::IdentityScaled { c: 2.0 }), &bx, 5000, 3).unwrap();
        assert_relative_eq!(c2, 2.5, epsilon = 1e-12);
        assert!(strong_monotonicity_constant(&b(BuiltinSpec::PLaplacian { p: 4.0 }), &bx, 5000, 3).is_none());
    }

    #[test]
    fn quartic_modulus_matches_lattice_oracle() {
        // Brute force over all pairs of a 61×61 lattice of [-2,2]².
        let n = 61;
        let pts: Vec<Vec2> = (0..n * n)
            .map(|k| Vec2::new(-2.0 + 4.0 * (k / n) as f64 / (n - 1) as f64, -2.0 + 4.0 * (k % n) as f64 / (n - 1) as f64))
            .collect();
        let g = |p: Vec2| Vec2::new(p.x.powi(3), p.y.cbrt());
        let gs: Vec<Vec2> = pts.iter().map(|&p| g(p)).collect();
        let mut oracle = f64::INFINITY;
        for a in 0..pts.len() {
            for c in a + 1..pts.len() {
                let d = pts[a] - pts[c];
                if d.norm() > 1.0 {
                    oracle = oracle.min((gs[a] - gs[c]).dot(d));
                }
            }
        }
        let f = b(BuiltinSpec::QuarticQuartroot);
        let w = monotony_modulus(&f, 1.0, &Rect::centered(2.0), 20_000, 11).unwrap();
        // both are upper estimates of the same infimum; sampling is within a few percent of the lattice
        assert!(w > 0.0 && oracle > 0.0);
        assert!((w - oracle).abs() <= 0.1 * oracle, "sampled {w} vs lattice {oracle}");
    }

    #[test]
    fn modulus_is_nondecreasing() {
        let f = b(BuiltinSpec::KinkCircle);
        let ts = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
        let rep = monotonicity_report(&f, &ts, &Rect::centered(2.0), 5000, 5);
        for w in rep.omega_samples.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        assert!(rep.min_inner > 0.0);
    }
}
