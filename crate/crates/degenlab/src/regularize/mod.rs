//! Modification at infinity and mollification of monotone fields, with sampled
//! verification of their post-conditions.

pub mod quadrature;

use crate::error::{Error, Result};
use crate::field::sampling::{radial_pairs, sample_pairs, sample_points};
use crate::field::{
    monotony_modulus_on, strong_monotonicity_constant, LADDER_RTOL, DegeneracyGrid, Field, FieldKind, FieldRule,
};
use crate::geom::{smoothstep5, smoothstep5_deriv, Mat2, Rect, Vec2};
use crate::io::write_json;
use quadrature::mollifier_nodes;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// Default quadrature order of the mollifier and the order used to check it.
pub const QUAD_ORDER: usize = 8;
pub const QUAD_CHECK_ORDER: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Modify,
    Mollify,
    Verify,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub worst_value: f64,
    pub worst_point: Option<Vec2>,
}

impl CheckResult {
    fn new(name: &str, pass: bool, worst_value: f64, worst_point: Option<Vec2>) -> Self {
        CheckResult { name: name.into(), pass, worst_value, worst_point }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RegParams {
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Number of times `c` was doubled.
    pub retries: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizationReport {
    pub stage: Stage,
    pub params: RegParams,
    pub checks: Vec<CheckResult>,
}

impl RegularizationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn cutoff(m: f64, r: f64) -> (f64, f64) {
    let s = (4.0 * m - r) / (3.0 * m);
    (smoothstep5(s), -smoothstep5_deriv(s) / (3.0 * m))
}

struct Modified {
    inner: Field,
    m: f64,
    c: f64,
}

impl FieldRule for Modified {
    fn eval(&self, xi: Vec2) -> Vec2 {
        let r = xi.norm();
        if r <= self.m {
            return self.inner.eval(xi);
        }
        if r >= 4.0 * self.m {
            return xi * self.c;
        }
        let (chi, _) = cutoff(self.m, r);
        self.inner.eval(xi) * chi + xi * ((1.0 - chi) * self.c)
    }

    fn jacobian(&self, xi: Vec2) -> Option<Mat2> {
        let r = xi.norm();
        if r <= self.m {
            return self.inner.rule().jacobian(xi);
        }
        if r >= 4.0 * self.m {
            return Some(Mat2::scalar(self.c));
        }
        let (chi, dchi) = cutoff(self.m, r);
        let jg = self.inner.rule().jacobian(xi)?;
        let diff = self.inner.eval(xi) - xi * self.c;
        Some(jg * chi + Mat2::scalar((1.0 - chi) * self.c) + Mat2::outer(diff, xi * (dchi / r)))
    }

    fn is_gradient(&self) -> bool {
        self.inner.is_radial() && self.inner.is_gradient()
    }

    fn is_radial(&self) -> bool {
        self.inner.is_radial()
    }

    fn kink_radii(&self) -> Vec<f64> {
        self.inner.kink_radii().into_iter().filter(|&r| r < 4.0 * self.m).collect()
    }
}

/// Number of sampled pairs used by the verification checks.
pub const CHECK_PAIRS: usize = 10_000;

fn min_inner(field: &Field, pairs: &[(Vec2, Vec2)]) -> (f64, (Vec2, Vec2)) {
    pairs
        .par_iter()
        .map(|&(a, b)| ((field.eval(a) - field.eval(b)).dot(a - b), (a, b)))
        .reduce(|| (f64::INFINITY, (Vec2::ZERO, Vec2::ZERO)), |x, y| if y.0 < x.0 { y } else { x })
}

fn build_modified(field: &Field, m: f64, c: f64) -> Result<Field> {
    let half = (6.0 * m).max(field.working_box().max.x.abs()).max(field.working_box().min.x.abs());
    let rule = Modified { inner: field.clone(), m, c };
    Field::from_rule(Arc::new(rule), FieldKind::Modified, format!("modified({})", field.name()), Rect::centered(half))
}

/// `G̃ = χ(|ξ|)G + (1−χ(|ξ|))·c·ξ` with `χ = 1` on `B_M` and `χ = 0` outside `B_{4M}`.
///
/// If sampled monotonicity fails, `c` is doubled up to eight times; persistent
/// failure returns the offending pair.
pub fn modify_at_infinity(field: &Field, m: f64, c: f64) -> Result<(Field, RegularizationReport)> {
    if !(m > 0.0 && m.is_finite() && c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter("modify_at_infinity needs M > 0 and c > 0".into()));
    }
    let check_box = Rect::centered(6.0 * m);
    let mut pairs = sample_pairs(&check_box, CHECK_PAIRS, 17);
    pairs.extend(radial_pairs(6.0 * m, CHECK_PAIRS / 2, 18));
    let mut c_cur = c;
    let mut retries = 0;
    let (g, mono) = loop {
        let g = build_modified(field, m, c_cur)?;
        let mono = min_inner(&g, &pairs);
        if mono.0 > 0.0 {
            break (g, mono);
        }
        if retries == 8 {
            let (xi, zeta) = mono.1;
            return Err(Error::NotMonotone { xi, zeta, value: mono.0 });
        }
        retries += 1;
        c_cur *= 2.0;
    };

    let pts = sample_points(&check_box, CHECK_PAIRS, 19);
    let mut checks = vec![CheckResult::new("strict-monotonicity", true, mono.0, Some(mono.1 .0))];

    // equality on the closed ball B̄_M
    let (eq_err, eq_pt) = pts
        .iter()
        .map(|&p| if p.norm() <= m { p } else { p * (m / p.norm()) })
        .map(|p| ((g.eval(p) - field.eval(p)).norm(), p))
        .fold((0.0, None), |acc, (e, p)| if e > acc.0 { (e, Some(p)) } else { acc });
    checks.push(CheckResult::new("equal-on-ball", eq_err == 0.0, eq_err, eq_pt));

    // c ≤ eigenvalues of the symmetric Jacobian ≤ |∇G̃| ≤ 4c outside B_{4M}
    let mut worst = (f64::INFINITY, None);
    let mut pass = true;
    for &p in &pts {
        let r = p.norm();
        if r <= 4.0 * m {
            continue;
        }
        let j = g.jacobian(p, 1e-6 * (1.0 + r))?;
        let norm = j.matrix.op_norm();
        let ok = j.eigenvalues.0 >= c_cur * (1.0 - 1e-12) && j.eigenvalues.1 <= norm * (1.0 + 1e-12) && norm <= 4.0 * c_cur;
        pass &= ok;
        let margin = (j.eigenvalues.0 - c_cur).min(4.0 * c_cur - norm);
        if margin < worst.0 {
            worst = (margin, Some(p));
        }
    }
    checks.push(CheckResult::new("outer-ellipticity", pass, worst.0, worst.1));

    let (l, lp) = pts
        .iter()
        .map(|&p| (g.eval(p).norm() / (1.0 + p.norm()), p))
        .fold((0.0, None), |acc, (v, p)| if v > acc.0 { (v, Some(p)) } else { acc });
    checks.push(CheckResult::new("linear-growth", l.is_finite(), l, lp));

    let report = RegularizationReport {
        stage: Stage::Modify,
        params: RegParams { m: Some(m), eps: None, c: Some(c_cur), l: Some(l), retries },
        checks,
    };
    Ok((g, report))
}

struct Mollified {
    inner: Field,
    eps: f64,
    nodes: Vec<(Vec2, f64)>,
}

impl Mollified {
    fn eval_with(&self, nodes: &[(Vec2, f64)], xi: Vec2) -> Vec2 {
        let mut acc = Vec2::ZERO;
        for &(y, w) in nodes {
            acc += self.inner.eval(xi - y) * w;
        }
        acc + xi * self.eps
    }
}

impl FieldRule for Mollified {
    fn eval(&self, xi: Vec2) -> Vec2 {
        self.eval_with(&self.nodes, xi)
    }

    fn jacobian(&self, xi: Vec2) -> Option<Mat2> {
        let h = 1e-7 * (1.0 + xi.norm());
        let mut acc = Mat2::scalar(self.eps);
        for &(y, w) in &self.nodes {
            acc = acc + self.inner.jacobian_matrix(xi - y, h) * w;
        }
        Some(acc)
    }

    fn potential(&self, xi: Vec2) -> Option<f64> {
        let mut acc = 0.5 * self.eps * xi.norm2();
        for &(y, w) in &self.nodes {
            acc += self.inner.potential(xi - y)? * w;
        }
        Some(acc)
    }

    fn is_gradient(&self) -> bool {
        self.inner.is_gradient()
    }
}

/// Offsets of the mollifier quadrature for `eps` (order [`QUAD_ORDER`]).
pub fn mollifier_offsets(eps: f64) -> Vec<Vec2> {
    mollifier_nodes(eps, QUAD_ORDER).into_iter().map(|p| p.0).collect()
}

/// `ω̂_{G_ε}(t) ≥ ω̂_G(t)` comparison: `G` is sampled on the pairs and all their
/// shifts by the mollifier offsets, `G_ε` on the pairs only.
pub fn modulus_comparison(g: &Field, g_eps: &Field, eps: f64, pairs: &[(Vec2, Vec2)], ts: &[f64]) -> Vec<(f64, f64, f64)> {
    let offsets = mollifier_offsets(eps);
    let mut shifted = pairs.to_vec();
    for &y in &offsets {
        shifted.extend(pairs.iter().map(|&(a, b)| (a - y, b - y)));
    }
    ts.iter()
        .map(|&t| {
            let we = monotony_modulus_on(g_eps, pairs, t).unwrap_or(f64::NAN);
            let w = monotony_modulus_on(g, &shifted, t).unwrap_or(f64::NAN);
            (t, we, w)
        })
        .collect()
}

/// `G_ε = ρ_ε ⋆ G + ε·ξ` with a fixed tensor Gauss–Legendre rule.
pub fn mollify(field: &Field, eps: f64) -> Result<(Field, RegularizationReport)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("mollification scale must lie in (0, 1), got {eps}")));
    }
    let rule = Mollified { inner: field.clone(), eps, nodes: mollifier_nodes(eps, QUAD_ORDER) };
    let check_rule = Mollified { inner: field.clone(), eps, nodes: mollifier_nodes(eps, QUAD_CHECK_ORDER) };
    let wb = field.working_box();
    let g = Field::from_rule(Arc::new(rule), FieldKind::Mollified, format!("mollified({}, {eps})", field.name()), wb)?;
    let mut checks = Vec::new();

    let strong = strong_monotonicity_constant(&g, &wb, CHECK_PAIRS, 23);
    checks.push(CheckResult::new("strong-monotonicity", strong.is_some(), strong.unwrap_or(f64::INFINITY), None));

    let pairs = sample_pairs(&wb, 2000, 29);
    let cmp = modulus_comparison(field, &g, eps, &pairs, &[0.1, 0.5, 1.0]);
    let (gap, t_worst) = cmp
        .iter()
        .map(|&(t, we, w)| (we - w, t))
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    checks.push(CheckResult::new("modulus-comparison", gap >= -1e-10, gap, Some(Vec2::new(t_worst, 0.0))));

    let l = field.growth_bound();
    let pts = sample_points(&wb, 2000, 31);
    let (ratio, rp) = pts
        .iter()
        .map(|&p| (g.eval(p).norm() / (2.0 * l * (1.0 + p.norm())), p))
        .fold((0.0, None), |a, (v, p)| if v > a.0 { (v, Some(p)) } else { a });
    checks.push(CheckResult::new("linear-growth", ratio <= 1.0, ratio, rp));

    let (qerr, qp) = pts
        .par_iter()
        .take(200)
        .map(|&p| {
            let a = g.eval(p);
            let b = check_rule.eval(p);
            ((a - b).norm() / (1.0 + b.norm()), p)
        })
        .reduce(|| (0.0, Vec2::ZERO), |a, b| if b.0 > a.0 { b } else { a });
    checks.push(CheckResult::new("quadrature-accuracy", qerr <= QUAD_TOL, qerr, Some(qp)));

    let report = RegularizationReport {
        stage: Stage::Mollify,
        params: RegParams { m: None, eps: Some(eps), c: None, l: Some(g.growth_bound()), retries: 0 },
        checks,
    };
    Ok((g, report))
}

/// Relative tolerance between the order-8 and order-12 convolution rules.
pub const QUAD_TOL: f64 = 1e-2;

/// Options for [`verify_regularization`].
#[derive(Clone, Debug)]
pub struct VerifyOpts {
    pub eps: f64,
    /// Radius of the ball on which `|G_ε − G|` is measured.
    pub m: f64,
    pub ts: Vec<f64>,
    pub n_pairs: usize,
    pub seed: u64,
}

/// Transfer of ellipticity labels from `G` to `G_ε`, modulus comparison and uniform
/// closeness, on two grids classified with the same spec. Nodes for which `exclude`
/// returns true are skipped in the transfer checks.
pub fn verify_regularization(
    g: &Field,
    g_eps: &Field,
    grid: &DegeneracyGrid,
    grid_eps: &DegeneracyGrid,
    opts: &VerifyOpts,
    exclude: Option<&(dyn Fn(Vec2) -> bool + Sync)>,
) -> Result<RegularizationReport> {
    if grid.nx != grid_eps.nx || grid.ny != grid_eps.ny || grid.bbox != grid_eps.bbox || grid.h != grid_eps.h {
        return Err(Error::InvalidParameter("grids must share the lattice".into()));
    }
    let eps = opts.eps;
    let mut checks = Vec::new();
    let skip = |k: usize| exclude.is_some_and(|f| f(grid.node(k)));

    // B_{2ε}(ξ) ⊂ Ô_λ(G) ⇒ ξ ∈ Ô_λ(G_ε), per ladder value
    let mut bad_o: Option<(f64, Vec2)> = None;
    for (li, &lambda) in grid.lambda_ladder.iter().enumerate() {
        let outside: Vec<bool> = grid.raw_o_level.iter().map(|l| !l.is_some_and(|v| v as usize <= li)).collect();
        let d = crate::field::edt::distance_transform(&outside, grid.nx, grid.ny, grid.h);
        for k in 0..grid.len() {
            let inside_ball = d[k] > 2.0 * eps && grid.bbox.contains_disk(grid.node(k), 2.0 * eps);
            if inside_ball && !skip(k) && grid_eps.d_quot[k] < lambda * (1.0 - LADDER_RTOL) {
                let gap = grid_eps.d_quot[k] - lambda;
                if bad_o.is_none_or(|b| gap < b.0) {
                    bad_o = Some((gap, grid.node(k)));
                }
            }
        }
    }
    checks.push(CheckResult::new("transfer-lower", bad_o.is_none(), bad_o.map_or(0.0, |b| b.0), bad_o.map(|b| b.1)));

    // B_{2ε}(ξ) ⊂ V̂_Λ(G) ⇒ ξ ∈ V̂_{Λ+ε}(G_ε)
    let mut bad_v: Option<(f64, Vec2)> = None;
    for (li, &big) in grid.big_lambda_ladder.iter().enumerate() {
        let outside: Vec<bool> = grid.raw_v_level.iter().map(|l| !l.is_some_and(|v| v as usize <= li)).collect();
        let d = crate::field::edt::distance_transform(&outside, grid.nx, grid.ny, grid.h);
        for k in 0..grid.len() {
            let inside_ball = d[k] > 2.0 * eps && grid.bbox.contains_disk(grid.node(k), 2.0 * eps);
            let need = (1.0 - LADDER_RTOL) / (big + eps);
            if inside_ball && !skip(k) && grid_eps.s_quot[k] < need {
                let gap = grid_eps.s_quot[k] - need;
                if bad_v.is_none_or(|b| gap < b.0) {
                    bad_v = Some((gap, grid.node(k)));
                }
            }
        }
    }
    checks.push(CheckResult::new("transfer-upper", bad_v.is_none(), bad_v.map_or(0.0, |b| b.0), bad_v.map(|b| b.1)));

    let pairs = sample_pairs(&grid.bbox, opts.n_pairs, opts.seed);
    let cmp = modulus_comparison(g, g_eps, eps, &pairs, &opts.ts);
    let (gap, t_worst) = cmp
        .iter()
        .map(|&(t, we, w)| (we - w, t))
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    checks.push(CheckResult::new("modulus-comparison", gap >= -1e-10, gap, Some(Vec2::new(t_worst, 0.0))));

    let (dev, dp) = (0..grid.len())
        .into_par_iter()
        .map(|k| grid.node(k))
        .filter(|p| p.norm() <= opts.m)
        .map(|p| ((g_eps.eval(p) - g.eval(p)).norm(), p))
        .reduce(|| (0.0, Vec2::ZERO), |a, b| if b.0 > a.0 { b } else { a });
    checks.push(CheckResult::new("uniform-closeness", dev.is_finite(), dev, Some(dp)));

    Ok(RegularizationReport {
        stage: Stage::Verify,
        params: RegParams { m: Some(opts.m), eps: Some(eps), c: None, l: None, retries: 0 },
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_builtin, BuiltinSpec};
    use approx::assert_relative_eq;

    #[test]
    fn identity_modification_is_identity() {
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let (g, rep) = modify_at_infinity(&id, 1.0, 1.0).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert_eq!(rep.params.retries, 0);
        for p in [Vec2::new(0.3, 0.2), Vec2::new(2.5, -1.0), Vec2::new(7.0, 3.0)] {
            assert!((g.eval(p) - p).norm() < 1e-14);
        }
    }

    #[test]
    fn plaplacian_modification() {
        let f = make_builtin(&BuiltinSpec::PLaplacian { p: 4.0 }).unwrap();
        let (g, rep) = modify_at_infinity(&f, 1.0, 1.0).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        let c = rep.params.c.unwrap();
        let p = Vec2::new(0.6, -0.7);
        assert_eq!(g.eval(p), f.eval(p));
        let q = Vec2::new(4.5, 0.0);
        assert_relative_eq!(g.eval(q).x, c * 4.5, epsilon = 1e-12);
    }

    #[test]
    fn identity_mollification_is_exact() {
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let (g, rep) = mollify(&id, 0.1).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        let v = g.eval(Vec2::new(0.4, -1.3));
        assert_relative_eq!(v.x, 1.1 * 0.4, epsilon = 1e-14);
        assert_relative_eq!(v.y, 1.1 * -1.3, epsilon = 1e-14);
    }

    #[test]
    fn plaplacian_mollified_at_origin() {
        let f = make_builtin(&BuiltinSpec::PLaplacian { p: 4.0 }).unwrap();
        let (g, _) = mollify(&f, 0.05).unwrap();
        assert!(g.eval(Vec2::ZERO).norm() <= 1e-12);
        let j = g.jacobian(Vec2::ZERO, 1e-6).unwrap();
        assert!(j.eigenvalues.0 >= 0.05);
    }

    #[test]
    fn rejects_bad_parameters() {
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        assert!(mollify(&id, 0.0).is_err());
        assert!(mollify(&id, 1.0).is_err());
        assert!(modify_at_infinity(&id, 0.0, 1.0).is_err());
        assert!(modify_at_infinity(&id, 1.0, -1.0).is_err());
    }
}
