//! Small fixed-size linear algebra for the plane.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Vec2::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by a quarter turn.
    pub fn rot90(self) -> Self {
        Vec2::new(-self.y, self.x)
    }

    /// Clockwise rotation by a quarter turn.
    pub fn rot_neg90(self) -> Self {
        Vec2::new(self.y, -self.x)
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn diag(p: f64, q: f64) -> Self {
        Mat2::new(p, 0.0, 0.0, q)
    }

    pub fn scalar(s: f64) -> Self {
        Mat2::diag(s, s)
    }

    /// Build from columns.
    pub fn from_cols(c0: Vec2, c1: Vec2) -> Self {
        Mat2::new(c0.x, c1.x, c0.y, c1.y)
    }

    /// `u ⊗ v`, i.e. `u vᵀ`.
    pub fn outer(u: Vec2, v: Vec2) -> Self {
        Mat2::new(u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y)
    }

    pub fn transpose(self) -> Self {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn sym(self) -> Self {
        let off = 0.5 * (self.b + self.c);
        Mat2::new(self.a, off, off, self.d)
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det);
        inv.is_finite().then_some(inv)
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn max_abs(self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn frobenius(self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(self) -> f64 {
        let ata = self.transpose() * self;
        let (_, hi) = ata.sym_eigenvalues();
        hi.max(0.0).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Eigenvalues `(lo, hi)` of the symmetric part.
    pub fn sym_eigenvalues(self) -> (f64, f64) {
        let s = self.sym();
        let half_tr = 0.5 * (s.a + s.d);
        let half_diff = 0.5 * (s.a - s.d);
        let rad = half_diff.hypot(s.b);
        (half_tr - rad, half_tr + rad)
    }

    /// Frobenius inner product `Tr(Aᵀ B)`.
    pub fn inner(self, o: Mat2) -> f64 {
        self.a * o.a + self.b * o.b + self.c * o.c + self.d * o.d
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }
}

impl Mul<Mat2> for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { min: Vec2::new(x0, y0), max: Vec2::new(x1, y1) }
    }

    /// Square `[-s, s]²`.
    pub fn centered(s: f64) -> Self {
        Rect::new(-s, s, -s, s)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect::new(self.min.x - by, self.max.x + by, self.min.y - by, self.max.y + by)
    }

    /// True when the closed disk `B̄_r(c)` lies inside the rectangle.
    pub fn contains_disk(&self, c: Vec2, r: f64) -> bool {
        c.x - r >= self.min.x && c.x + r <= self.max.x && c.y - r >= self.min.y && c.y + r <= self.max.y
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.width() > 0.0 && self.height() > 0.0
    }
}

/// Closed disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Disk { center, radius }
    }

    pub fn unit() -> Self {
        Disk::new(Vec2::ZERO, 1.0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm() <= self.radius
    }

    /// True when `other` lies inside `self` (with a small relative slack).
    pub fn contains_disk(&self, other: &Disk) -> bool {
        (other.center - self.center).norm() + other.radius <= self.radius * (1.0 + 1e-12)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// `sign(x)·|x|^e`.
pub fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// Quintic smoothstep `6s⁵ − 15s⁴ + 10s³` on `[0, 1]`, clamped outside.
pub fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (s * 6.0 - 15.0) + 10.0)
}

/// Derivative of [`smoothstep5`].
pub fn smoothstep5_deriv(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (s - 1.0) * (s - 1.0)
}

/// Signed area of the triangle `(a, b, c)`; positive when counter-clockwise.
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotation_is_quarter_turn() {
        let v = Vec2::new(1.0, 0.0);
        assert_eq!(v.rot90(), Vec2::new(0.0, 1.0));
        assert_eq!(v.rot90().rot_neg90(), v);
        assert_eq!(v.rot90().rot90(), -v);
    }

    #[test]
    fn sym_eigenvalues_match_closed_form() {
        let m = Mat2::new(2.0, 1.0, 1.0, 2.0);
        let (lo, hi) = m.sym_eigenvalues();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-14);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2::new(3.0, -1.0, 2.0, 5.0);
        let p = m * m.inverse().unwrap();
        assert!((p - Mat2::IDENTITY).max_abs() < 1e-14);
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).inverse().is_none());
    }

    #[test]
    fn op_norm_of_rotation_is_one() {
        let r = Mat2::new(0.6, -0.8, 0.8, 0.6);
        assert_relative_eq!(r.op_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep5(-1.0), 0.0);
        assert_eq!(smoothstep5(2.0), 1.0);
        assert_relative_eq!(smoothstep5(0.5), 0.5, epsilon = 1e-15);
        assert_eq!(smoothstep5_deriv(0.0), 0.0);
        assert_relative_eq!(smoothstep5_deriv(0.5), 1.875, epsilon = 1e-15);
    }
}
