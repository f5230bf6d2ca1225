//! Closed-form builtin fields.

use super::FieldRule;
use crate::error::{Error, Result};
use crate::geom::{signed_pow, Mat2, Vec2};
use serde::{Deserialize, Serialize};

/// `G(ξ) = c·ξ`.
pub(crate) struct IdentityScaled {
    pub c: f64,
}

impl FieldRule for IdentityScaled {
    fn eval(&self, xi: Vec2) -> Vec2 {
        xi * self.c
    }
    fn jacobian(&self, _xi: Vec2) -> Option<Mat2> {
        Some(Mat2::scalar(self.c))
    }
    fn potential(&self, xi: Vec2) -> Option<f64> {
        Some(0.5 * self.c * xi.norm2())
    }
    fn is_gradient(&self) -> bool {
        true
    }
    fn is_radial(&self) -> bool {
        true
    }
}

/// `G(ξ) = |ξ|^{p−2} ξ`.
pub(crate) struct PLaplacian {
    pub p: f64,
}

impl FieldRule for PLaplacian {
    fn eval(&self, xi: Vec2) -> Vec2 {
        let r = xi.norm();
        if r == 0.0 {
            return Vec2::ZERO;
        }
        xi * r.powf(self.p - 2.0)
    }
    fn jacobian(&self, xi: Vec2) -> Option<Mat2> {
        let r = xi.norm();
        if r == 0.0 {
            return Some(if self.p > 2.0 {
                Mat2::ZERO
            } else if self.p == 2.0 {
                Mat2::IDENTITY
            } else {
                Mat2::scalar(f64::INFINITY)
            });
        }
        let n = xi / r;
        let s = r.powf(self.p - 2.0);
        Some((Mat2::IDENTITY + Mat2::outer(n, n) * (self.p - 2.0)) * s)
    }
    fn potential(&self, xi: Vec2) -> Option<f64> {
        Some(xi.norm().powf(self.p) / self.p)
    }
    fn is_gradient(&self) -> bool {
        true
    }
    fn is_radial(&self) -> bool {
        true
    }
}

/// `G(ξ) = (ξ₁³, sign(ξ₂)|ξ₂|^{1/3})`.
pub(crate) struct QuarticQuartroot;

impl FieldRule for QuarticQuartroot {
    fn eval(&self, xi: Vec2) -> Vec2 {
        Vec2::new(xi.x * xi.x * xi.x, xi.y.cbrt())
    }
    fn jacobian(&self, xi: Vec2) -> Option<Mat2> {
        let d2 = if xi.y == 0.0 { f64::INFINITY } else { xi.y.abs().powf(-2.0 / 3.0) / 3.0 };
        Some(Mat2::diag(3.0 * xi.x * xi.x, d2))
    }
    fn potential(&self, xi: Vec2) -> Option<f64> {
        Some(xi.x.powi(4) / 4.0 + 0.75 * xi.y.abs().powf(4.0 / 3.0))
    }
    fn is_gradient(&self) -> bool {
        true
    }
}

/// One piece of a radial derivative rule: `φ'(r) = a + b·sign(r−r₀)|r−r₀|^e` for `r ∈ [r_lo, r_hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialPiece {
    pub r_lo: f64,
    /// Upper end of the piece; `None` means unbounded.
    #[serde(default)]
    pub r_hi: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub r0: f64,
    pub e: f64,
}

impl RadialPiece {
    fn dphi(&self, r: f64) -> f64 {
        self.a + self.b * signed_pow(r - self.r0, self.e)
    }

    fn d2phi(&self, r: f64) -> f64 {
        let t = (r - self.r0).abs();
        if t == 0.0 {
            return if self.e > 1.0 {
                0.0
            } else if self.e == 1.0 {
                self.b
            } else {
                f64::INFINITY
            };
        }
        self.b * self.e * t.powf(self.e - 1.0)
    }

    /// Antiderivative of `dphi` up to a constant.
    fn antider(&self, r: f64) -> f64 {
        self.a * r + self.b * (r - self.r0).abs().powf(self.e + 1.0) / (self.e + 1.0)
    }

    fn hi(&self) -> f64 {
        self.r_hi.unwrap_or(f64::INFINITY)
    }
}

/// A radial gradient field `G = ∇F`, `F(ξ) = φ(|ξ|)`, with a piecewise `φ'`.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pieces: Vec<RadialPiece>,
    /// Values of `φ` at the start of each piece.
    offsets: Vec<f64>,
}

impl RadialProfile {
    /// Validates continuity, `φ'(0) = 0` and strict increase of `φ'`.
    pub fn new(pieces: Vec<RadialPiece>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("radial rule: {m}")));
        if pieces.is_empty() {
            return bad("no pieces");
        }
        if pieces[0].r_lo != 0.0 {
            return bad("first piece must start at r = 0");
        }
        for (k, p) in pieces.iter().enumerate() {
            let finite = [p.r_lo, p.a, p.b, p.r0, p.e].iter().all(|v| v.is_finite());
            if !finite {
                return bad("non-finite coefficient");
            }
            if p.b <= 0.0 || p.e <= 0.0 {
                return bad("phi' must be strictly increasing (need b > 0 and e > 0)");
            }
            if p.hi() <= p.r_lo {
                return bad("empty piece");
            }
            match pieces.get(k + 1) {
                Some(next) => {
                    if p.r_hi != Some(next.r_lo) {
                        return bad("pieces must be contiguous");
                    }
                    let r = next.r_lo;
                    let (l, rt) = (p.dphi(r), next.dphi(r));
                    if (l - rt).abs() > 1e-12 * (1.0 + l.abs()) {
                        return bad("phi' must be continuous");
                    }
                }
                None => {
                    if p.r_hi.is_some() {
                        return bad("last piece must be unbounded");
                    }
                }
            }
        }
        if pieces[0].dphi(0.0).abs() > 1e-14 {
            return bad("phi'(0) must vanish");
        }
        let mut offsets = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            offsets.push(acc);
            if let Some(hi) = p.r_hi {
                acc += p.antider(hi) - p.antider(p.r_lo);
            }
        }
        Ok(RadialProfile { pieces, offsets })
    }

    /// The kink-circle rule: `φ'(r) = 1−(1−r)³` on `[0,1]`, `1+(r−1)^{1/3}` beyond.
    pub fn kink_circle() -> Self {
        RadialProfile::new(vec![
            RadialPiece { r_lo: 0.0, r_hi: Some(1.0), a: 1.0, b: 1.0, r0: 1.0, e: 3.0 },
            RadialPiece { r_lo: 1.0, r_hi: None, a: 1.0, b: 1.0, r0: 1.0, e: 1.0 / 3.0 },
        ])
        .expect("kink-circle rule is valid")
    }

    fn piece(&self, r: f64) -> usize {
        self.pieces.iter().rposition(|p| r >= p.r_lo).unwrap_or(0)
    }

    pub fn pieces(&self) -> &[RadialPiece] {
        &self.pieces
    }

    /// Radii where `φ''` may jump.
    pub fn kink_radii(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.r_lo).collect()
    }

    pub fn dphi(&self, r: f64) -> f64 {
        self.pieces[self.piece(r)].dphi(r)
    }

    /// One-sided second derivative, taken from the piece containing `r`.
    pub fn d2phi(&self, r: f64) -> f64 {
        self.pieces[self.piece(r)].d2phi(r)
    }

    pub fn phi(&self, r: f64) -> f64 {
        let k = self.piece(r);
        let p = &self.pieces[k];
        self.offsets[k] + p.antider(r) - p.antider(p.r_lo)
    }
}

impl FieldRule for RadialProfile {
    fn eval(&self, xi: Vec2) -> Vec2 {
        let r = xi.norm();
        if r == 0.0 {
            return Vec2::ZERO;
        }
        xi * (self.dphi(r) / r)
    }
    fn jacobian(&self, xi: Vec2) -> Option<Mat2> {
        let r = xi.norm();
        if r == 0.0 {
            return Some(Mat2::scalar(self.d2phi(0.0)));
        }
        let n = xi / r;
        let nn = Mat2::outer(n, n);
        Some(nn * self.d2phi(r) + (Mat2::IDENTITY - nn) * (self.dphi(r) / r))
    }
    fn potential(&self, xi: Vec2) -> Option<f64> {
        Some(self.phi(xi.norm()))
    }
    fn is_gradient(&self) -> bool {
        true
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn kink_radii(&self) -> Vec<f64> {
        RadialProfile::kink_radii(self)
    }
}
