//! Finite-radius surrogates of the ellipticity liminf quotients.

use super::Field;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use serde::{Deserialize, Serialize};

/// Below this `|ΔG|` an s-quotient sample counts as `+∞`.
pub const DG_FLOOR: f64 = 1e-14;

/// Probe radii and direction count for the quotients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuotientOpts {
    /// Decreasing probe radii.
    pub radii: Vec<f64>,
    pub n_directions: usize,
}

impl Default for QuotientOpts {
    fn default() -> Self {
        QuotientOpts::geometric(1e-6, 8, 64)
    }
}

impl QuotientOpts {
    /// `n_radii` radii with ratio 1/2 ending at `smallest`.
    pub fn geometric(smallest: f64, n_radii: usize, n_directions: usize) -> Self {
        let radii = (0..n_radii).rev().map(|k| smallest * 2f64.powi(k as i32)).collect();
        QuotientOpts { radii, n_directions }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_directions < 32 {
            return Err(Error::InvalidParameter("at least 32 directions are required".into()));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(r.is_finite() && *r >= 1e-12)) {
            return Err(Error::InvalidParameter("radii must be finite and at least 1e-12".into()));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("radii must be strictly decreasing".into()));
        }
        Ok(())
    }

    pub(crate) fn probes(&self) -> Vec<Vec2> {
        let n = self.n_directions;
        let dirs: Vec<Vec2> =
            (0..n).map(|k| Vec2::polar(1.0, std::f64::consts::TAU * k as f64 / n as f64)).collect();
        self.radii.iter().flat_map(|&r| dirs.iter().map(move |&d| d * r)).collect()
    }
}

/// Minimal sampled quotients at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quotients {
    /// `min ⟨ΔG, ζ⟩ / |ζ|²`.
    pub d_quot: f64,
    /// `min ⟨ΔG, ζ⟩ / |ΔG|²`.
    pub s_quot: f64,
}

pub(crate) fn quotients_with(field: &Field, xi: Vec2, probes: &[Vec2]) -> Quotients {
    let g0 = field.eval(xi);
    let mut d_quot = f64::INFINITY;
    let mut s_quot = f64::INFINITY;
    for &z in probes {
        let dg = field.eval(xi + z) - g0;
        let ip = dg.dot(z);
        d_quot = d_quot.min(ip / z.norm2());
        let n2 = dg.norm2();
        if n2.sqrt() >= DG_FLOOR {
            s_quot = s_quot.min(ip / n2);
        }
    }
    Quotients { d_quot, s_quot }
}

/// Sampled lower/upper ellipticity quotients at `xi`.
pub fn ellipticity_quotients(field: &Field, xi: Vec2, opts: &QuotientOpts) -> Result<Quotients> {
    opts.validate()?;
    Ok(quotients_with(field, xi, &opts.probes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_builtin, BuiltinSpec};
    use approx::assert_relative_eq;

    #[test]
    fn identity_quotients_are_one() {
        let f = make_builtin(&BuiltinSpec::Identity).unwrap();
        let q = ellipticity_quotients(&f, Vec2::new(0.3, 0.7), &QuotientOpts::default()).unwrap();
        assert_relative_eq!(q.d_quot, 1.0, epsilon = 1e-9);
        assert_relative_eq!(q.s_quot, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn quartic_origin_quotients() {
        let f = make_builtin(&BuiltinSpec::QuarticQuartroot).unwrap();
        let opts = QuotientOpts::geometric(1e-3, 8, 64);
        let q = ellipticity_quotients(&f, Vec2::ZERO, &opts).unwrap();
        assert!(q.d_quot <= 1e-6 * 1.0001, "{}", q.d_quot);
        assert!(q.s_quot <= 1e-2 * 1.0001, "{}", q.s_quot);
    }

    #[test]
    fn kink_on_circle_is_degenerate() {
        let f = make_builtin(&BuiltinSpec::KinkCircle).unwrap();
        let q = ellipticity_quotients(&f, Vec2::new(1.0, 0.0), &QuotientOpts::default()).unwrap();
        // radially inward the quotient is about 3·r², tiny at the probe radii
        assert!(q.d_quot < 1e-6);
        let far = ellipticity_quotients(&f, Vec2::new(0.5, 0.0), &QuotientOpts::default()).unwrap();
        assert!(far.d_quot > 0.5);
    }

    #[test]
    fn options_validated() {
        assert!(QuotientOpts { radii: vec![1e-3], n_directions: 16 }.validate().is_err());
        assert!(QuotientOpts { radii: vec![1e-3, 1e-2], n_directions: 64 }.validate().is_err());
        assert!(QuotientOpts::default().validate().is_ok());
    }
}
