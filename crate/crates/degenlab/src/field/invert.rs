//! Damped Newton inversion of a monotone field.

use super::Field;
use crate::error::{Error, Result};
use crate::geom::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertOpts {
    pub max_iter: usize,
    /// Converged once `|G(x) − target| ≤ tol·(1 + |target|)`.
    pub tol: f64,
    /// Accept a stalled iterate if its residual is below `accept·(1 + |target|)`.
    pub accept: f64,
    /// Difference step for the Jacobian fallback.
    pub fd_step: f64,
}

impl Default for InvertOpts {
    fn default() -> Self {
        InvertOpts { max_iter: 200, tol: 1e-14, accept: 1e-10, fd_step: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Inversion {
    pub x: Vec2,
    pub residual: f64,
    pub iterations: usize,
}

const ARMIJO_C: f64 = 1e-4;

/// Solves `G(x) = target` from `x0`.
///
/// Newton directions come from the (difference) Jacobian, clipped in length; when
/// the Jacobian is singular a transposed-Jacobian step is used, and as a last
/// resort a step against the residual. Step lengths are halved until the squared
/// residual decreases by the Armijo factor.
pub fn invert(field: &Field, target: Vec2, x0: Vec2, opts: &InvertOpts) -> Result<Inversion> {
    let scale = 1.0 + target.norm();
    let res = |x: Vec2| field.eval(x) - target;
    let mut x = x0;
    let mut r = res(x);
    if !r.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let mut phi = 0.5 * r.norm2();
    for it in 0..opts.max_iter {
        if r.norm() <= opts.tol * scale {
            return Ok(Inversion { x, residual: r.norm(), iterations: it });
        }
        let h = opts.fd_step * (1.0 + x.norm());
        let j = field.jacobian_matrix(x, h);
        let mut accepted = false;
        let max_step = 2.0 * (1.0 + x.norm());
        let dirs: [Option<Vec2>; 2] = [j.inverse().map(|ji| -ji.mul_vec(r)), gradient_dir(j, r)];
        for d in dirs.into_iter().flatten() {
            let d = if d.norm() > max_step { d * (max_step / d.norm()) } else { d };
            if !d.is_finite() {
                continue;
            }
            // ⟨∇φ, d⟩ for this direction
            let slope = j.transpose().mul_vec(r).dot(d);
            if !(slope < 0.0) {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..60 {
                let xn = x + d * alpha;
                let rn = res(xn);
                let pn = 0.5 * rn.norm2();
                if rn.is_finite() && pn <= phi + ARMIJO_C * alpha * slope {
                    x = xn;
                    r = rn;
                    phi = pn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            // monotone fallback: move against the residual while it shrinks
            let mut tau = 1.0;
            for _ in 0..60 {
                let xn = x - r * tau;
                let rn = res(xn);
                let pn = 0.5 * rn.norm2();
                if rn.is_finite() && pn < phi {
                    x = xn;
                    r = rn;
                    phi = pn;
                    accepted = true;
                    break;
                }
                tau *= 0.5;
            }
        }
        if !accepted {
            let rn = r.norm();
            return if rn <= opts.accept * scale {
                Ok(Inversion { x, residual: rn, iterations: it })
            } else {
                Err(Error::InversionFailed { target, residual: rn })
            };
        }
    }
    let rn = r.norm();
    if rn <= opts.accept * scale {
        Ok(Inversion { x, residual: rn, iterations: opts.max_iter })
    } else {
        Err(Error::InversionFailed { target, residual: rn })
    }
}

fn gradient_dir(j: Mat2, r: Vec2) -> Option<Vec2> {
    let g = j.transpose().mul_vec(r);
    let jg = j.mul_vec(g);
    let n = jg.norm2();
    if n > 0.0 && n.is_finite() {
        // exact minimizer of the linearized residual along -g
        Some(-g * (g.norm2() / n))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_builtin, BuiltinSpec};

    #[test]
    fn inverts_builtins() {
        for spec in [BuiltinSpec::QuarticQuartroot, BuiltinSpec::KinkCircle, BuiltinSpec::PLaplacian { p: 4.0 }] {
            let f = make_builtin(&spec).unwrap();
            for &xi in &[Vec2::new(0.7, -1.2), Vec2::new(-1.5, 0.05), Vec2::new(0.3, 1.9)] {
                let inv = invert(&f, f.eval(xi), Vec2::ZERO, &InvertOpts::default()).unwrap();
                assert!((inv.x - xi).norm() < 1e-9, "{spec:?} {xi:?} -> {inv:?}");
            }
        }
    }

    #[test]
    fn cube_root_target_zero() {
        let f = make_builtin(&BuiltinSpec::QuarticQuartroot).unwrap();
        let inv = invert(&f, Vec2::ZERO, Vec2::new(1.0, 1.0), &InvertOpts::default()).unwrap();
        assert!(inv.x.norm() < 1e-4);
    }
}
