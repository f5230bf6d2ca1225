//! Explicit exponential barrier `w = γ·exp(k(x₂ − 20x₁²)) − c` on the square
//! `|x₁|, |x₂| ≤ 1/8`, its constants in log-space and subsolution checks.

use crate::error::{Error, Result};
use crate::field::{DegeneracyGrid, Field};
use crate::geom::{Mat2, Vec2};
use crate::io::write_csv;
use crate::mesh::{build_mesh, Domain};
use crate::solve::{solve, BoundaryData, SolveOpts};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// Half side of the barrier square.
pub const HALF_SIDE: f64 = 0.125;

/// A positive number carried as its natural logarithm, with a decimal mantissa and
/// exponent, and the plain value when it is a normal double.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogValue {
    pub ln: f64,
    pub mantissa: f64,
    pub exp10: i64,
    pub value: Option<f64>,
}

impl LogValue {
    pub fn from_ln(ln: f64) -> Self {
        let l10 = ln / std::f64::consts::LN_10;
        let exp10 = l10.floor() as i64;
        let mantissa = 10f64.powf(l10 - exp10 as f64);
        let v = ln.exp();
        let value = (v.is_normal()).then_some(v);
        LogValue { ln, mantissa, exp10, value }
    }

    pub fn underflows(&self) -> bool {
        self.value.is_none()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierParams {
    pub lambda: f64,
    pub rho: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub k: f64,
    pub gamma: LogValue,
    pub c: LogValue,
    /// `γρe^{−k/8}/(8M)`.
    pub eps: LogValue,
    /// `ρ²e^{−k}e^{−k/8}/(32Mk√1601)`.
    pub eps_alt: LogValue,
    /// `|ε/ε_alt − 1|`.
    pub eps_rel_diff: f64,
    /// Some constant is below the normal double range and only its log form is usable.
    pub underflow: bool,
    pub half_side: f64,
}

/// `((80 + √(6400 + 4000λ²)) / (10λ))²`.
pub fn barrier_k(lambda: f64) -> f64 {
    let q = (80.0 + (6400.0 + 4000.0 * lambda * lambda).sqrt()) / (10.0 * lambda);
    q * q
}

pub fn barrier_constants(lambda: f64, rho: f64, m: f64) -> Result<BarrierParams> {
    if !(lambda > 0.0 && rho > 0.0 && m > 0.0) || ![lambda, rho, m].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("λ, ρ and M must be positive".into()));
    }
    let k = barrier_k(lambda);
    let ln1601 = 0.5 * 1601f64.ln();
    let ln_gamma = (rho / 4.0).ln() - k - ln1601 - k.ln();
    let ln_eps = ln_gamma + rho.ln() - k / 8.0 - (8.0 * m).ln();
    let ln_eps_alt = 2.0 * rho.ln() - k - k / 8.0 - (32.0 * m * k).ln() - ln1601;
    let gamma = LogValue::from_ln(ln_gamma);
    let c = LogValue::from_ln(ln_gamma - k / 8.0);
    let eps = LogValue::from_ln(ln_eps);
    let eps_alt = LogValue::from_ln(ln_eps_alt);
    Ok(BarrierParams {
        lambda,
        rho,
        m,
        k,
        underflow: [gamma, c, eps, eps_alt].iter().any(LogValue::underflows),
        gamma,
        c,
        eps,
        eps_alt,
        eps_rel_diff: (ln_eps - ln_eps_alt).exp_m1().abs(),
        half_side: HALF_SIDE,
    })
}

/// `|A⁻|`: magnitude of the most negative eigenvalue of a symmetric matrix, 0 if none.
pub fn neg_part_norm(a: Mat2) -> f64 {
    let half_tr = 0.5 * (a.a + a.d);
    let disc = (0.25 * (a.a - a.d) * (a.a - a.d) + a.b * a.c).max(0.0).sqrt();
    let det = a.a * a.d - a.b * a.c;
    let lo = if half_tr > 0.0 { det / (half_tr + disc) } else { half_tr - disc };
    (-lo).max(0.0)
}

/// `|A⁺|` for a symmetric matrix.
pub fn pos_part_norm(a: Mat2) -> f64 {
    neg_part_norm(a * -1.0)
}

/// Scaled Hessian `A = ∇²w / (γk e^{kv})`.
pub fn barrier_matrix(k: f64, x1: f64) -> Mat2 {
    let off = -40.0 * k * x1;
    Mat2 { a: 1600.0 * k * x1 * x1 - 40.0, b: off, c: off, d: k }
}

/// The displayed closed form `80k / (t + √(t² + 40k))`, `t = tr A`.
pub fn displayed_neg_part(k: f64, x1: f64) -> f64 {
    let t = barrier_matrix(k, x1).trace();
    80.0 * k / (t + (t * t + 40.0 * k).sqrt())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BarrierEval {
    pub w: f64,
    pub grad: Vec2,
    pub hess: Mat2,
    /// `ln(γk e^{kv})`, the common factor of `∇w` and `∇²w`.
    pub ln_scale: f64,
    /// `∇w` and `∇²w` divided by the common factor.
    pub grad_scaled: Vec2,
    pub hess_scaled: Mat2,
}

pub fn barrier_eval(p: &BarrierParams, x: Vec2) -> Result<BarrierEval> {
    if x.max_abs() > 1.1 * HALF_SIDE {
        return Err(Error::OutOfRegion(x));
    }
    let v = x.y - 20.0 * x.x * x.x;
    let ln_scale = p.gamma.ln + p.k.ln() + p.k * v;
    let grad_scaled = Vec2::new(-40.0 * x.x, 1.0);
    let hess_scaled = barrier_matrix(p.k, x.x);
    let s = ln_scale.exp();
    let w = (p.gamma.ln + p.k * v).exp() - p.c.ln.exp();
    Ok(BarrierEval { w, grad: grad_scaled * s, hess: hess_scaled * s, ln_scale, grad_scaled, hess_scaled })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub x: Vec2,
    /// `λ|A⁺| − |A⁻|/λ` with `|A⁺| = 40k/|A⁻|`.
    pub bound: f64,
    pub neg: f64,
    /// `λ√(40k) − |A⁻|`.
    pub margin: f64,
    /// `Tr(∇ˢG(∇w)·A)`, the trace divided by the positive factor `γk e^{kv}`.
    pub trace_scaled: f64,
    pub det_rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsolutionReport {
    pub n: usize,
    pub min_trace_scaled: f64,
    pub min_bound: f64,
    pub min_margin: f64,
    pub max_grad_ln: f64,
    pub max_det_rel_err: f64,
    pub bound_positive: bool,
    pub trace_positive: bool,
    #[serde(skip)]
    pub rows: Vec<ScanRow>,
}

impl SubsolutionReport {
    /// CSV: `x1, x2, trace_lower_bound, neg_part, margin`.
    pub fn write_scan(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            Some(&["x1", "x2", "trace_lower_bound", "neg_part", "margin"]),
            self.rows.iter().map(|r| [r.x.x, r.x.y, r.bound, r.neg, r.margin]),
        )
    }
}

/// Nodes of the `n × n` grid of the barrier square.
pub fn square_nodes(n: usize) -> Vec<Vec2> {
    let step = 2.0 * HALF_SIDE / (n - 1) as f64;
    (0..n * n).map(|k| Vec2::new(-HALF_SIDE + (k / n) as f64 * step, -HALF_SIDE + (k % n) as f64 * step)).collect()
}

/// Direct trace with the field's symmetric Jacobian and the eigenvalue bound form on an
/// `n × n` grid. With a grid, `B_{ρ/2}(0)` must lie in `Ô_λ ∩ V̂_{1/λ}`.
pub fn subsolution_check(field: &Field, p: &BarrierParams, n: usize, grid: Option<&DegeneracyGrid>) -> Result<SubsolutionReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("scan needs n ≥ 2".into()));
    }
    if let Some(g) = grid {
        if !g.covers_ball(0.5 * p.rho) {
            return Err(Error::Precondition("grid does not cover B_{ρ/2}".into()));
        }
        for k in 0..g.len() {
            let xi = g.node(k);
            if xi.norm() <= 0.5 * p.rho && !(g.in_o(k, p.lambda) && g.in_v(k, 1.0 / p.lambda)) {
                return Err(Error::NotCovered(xi));
            }
        }
    }
    let nodes = square_nodes(n);
    let ln_half_rho = (0.5 * p.rho).ln();
    let evals: Vec<BarrierEval> = nodes.iter().map(|&x| barrier_eval(p, x)).collect::<Result<_>>()?;
    let mut max_grad_ln = f64::NEG_INFINITY;
    for (x, e) in nodes.iter().zip(&evals) {
        let ln_grad = e.ln_scale + e.grad_scaled.norm().ln();
        max_grad_ln = max_grad_ln.max(ln_grad);
        if ln_grad > ln_half_rho {
            return Err(Error::Precondition(format!("|∇w| exceeds ρ/2 at {x:?}")));
        }
    }
    let bound_k = p.lambda * (40.0 * p.k).sqrt();
    let rows: Vec<ScanRow> = nodes
        .par_iter()
        .zip(&evals)
        .map(|(&x, e)| {
            let a = e.hess_scaled;
            let neg = neg_part_norm(a);
            let pos = 40.0 * p.k / neg;
            let js = field.jacobian_matrix(e.grad, 1e-6 * (1.0 + e.grad.norm())).sym();
            ScanRow {
                x,
                bound: p.lambda * pos - neg / p.lambda,
                neg,
                margin: bound_k - neg,
                trace_scaled: (js * a).trace(),
                det_rel_err: (a.det() / (-40.0 * p.k) - 1.0).abs(),
            }
        })
        .collect();
    let min = |f: fn(&ScanRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let min_bound = min(|r| r.bound);
    let min_trace_scaled = min(|r| r.trace_scaled);
    Ok(SubsolutionReport {
        n,
        min_trace_scaled,
        min_bound,
        min_margin: min(|r| r.margin),
        max_grad_ln,
        max_det_rel_err: rows.iter().map(|r| r.det_rel_err).fold(0.0, f64::max),
        bound_positive: min_bound > 0.0,
        trace_positive: min_trace_scaled > 0.0,
        rows,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MarginScan {
    pub max_neg: f64,
    pub limit: f64,
    pub holds: bool,
    /// Largest `|exact − displayed|` over the scan.
    pub displayed_discrepancy: f64,
}

/// `max |A⁻|` over `n` points of `x₁ ∈ [−1/8, 1/8]` against `λ√(40k)`.
pub fn margin_scan(p: &BarrierParams, n: usize) -> MarginScan {
    let mut max_neg: f64 = 0.0;
    let mut disc: f64 = 0.0;
    for i in 0..n {
        let x1 = -HALF_SIDE + 2.0 * HALF_SIDE * i as f64 / (n - 1).max(1) as f64;
        let exact = neg_part_norm(barrier_matrix(p.k, x1));
        max_neg = max_neg.max(exact);
        disc = disc.max((exact - displayed_neg_part(p.k, x1)).abs());
    }
    let limit = p.lambda * (40.0 * p.k).sqrt();
    MarginScan { max_neg, limit, holds: max_neg <= limit, displayed_discrepancy: disc }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatnessReport {
    pub p0: Vec2,
    pub q: Vec2,
    pub rho: f64,
    pub eps: f64,
    /// Smallest `|∇u − q|` over cells centred in `B_{1/2}`.
    pub min_distance: f64,
    pub pass: bool,
    pub converged: bool,
    pub newton_iterations: usize,
}

/// Solves with data `⟨p₀, x⟩ + ε·sin(3θ)` on the unit disk and checks that no cell
/// gradient in `B_{1/2}` enters `B_{ρ/2}(q)`.
#[allow(clippy::too_many_arguments)]
pub fn flatness_experiment(
    field: &Field,
    p0: Vec2,
    q: Vec2,
    rho: f64,
    eps: f64,
    h: f64,
    opts: &SolveOpts,
    grid: Option<&DegeneracyGrid>,
) -> Result<FlatnessReport> {
    if !(rho > 0.0 && eps >= 0.0) {
        return Err(Error::InvalidParameter("ρ must be positive and ε nonnegative".into()));
    }
    if (p0 - q).norm() < rho {
        return Err(Error::Precondition("p₀ lies in B_ρ(q)".into()));
    }
    if let Some(g) = grid {
        for k in 0..g.len() {
            let xi = g.node(k);
            if (xi - q).norm() < rho && (g.in_d[k] || g.in_s[k]) {
                return Err(Error::NotCovered(xi));
            }
        }
    }
    let mesh = Arc::new(build_mesh(Domain::Disk { radius: 1.0 }, h)?);
    let data = BoundaryData::FlatPerturbed { p: [p0.x, p0.y], eps, freq: 3.0 };
    let sol = solve(field, mesh.clone(), &data, opts)?;
    if !sol.diagnostics.converged {
        return Err(Error::Precondition(format!("solver did not converge: {:?}", sol.diagnostics.stall)));
    }
    let min_distance = (0..mesh.n_triangles())
        .filter(|&t| mesh.centroid(t).norm() <= 0.5)
        .map(|t| (sol.grads[t] - q).norm())
        .fold(f64::INFINITY, f64::min);
    Ok(FlatnessReport {
        p0,
        q,
        rho,
        eps,
        min_distance,
        pass: min_distance > 0.5 * rho,
        converged: sol.diagnostics.converged,
        newton_iterations: sol.diagnostics.newton_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_builtin, BuiltinSpec};
    use approx::assert_relative_eq;

    #[test]
    fn k_matches_high_precision_values() {
        // 50-digit evaluations of the closed form
        let cases = [
            (0.5, 1102.5488170907281133906863062431816724497622756666),
            (1.0, 331.16862443496911456090317148872902366604067027519),
            (2.0, 131.86651818838306216933997971706478882809631692446),
            (10.0, 51.479921568325905514643942877597069515748923135227),
        ];
        for (l, k) in cases {
            assert_relative_eq!(barrier_k(l), k, max_relative = 1e-14);
        }
    }

    #[test]
    fn epsilon_forms_agree_and_rho_scaling() {
        for l in [0.5, 1.0, 2.0, 10.0] {
            let p = barrier_constants(l, 1.0, 1.0).unwrap();
            assert!(p.eps_rel_diff <= 1e-12);
            let q = barrier_constants(l, 2.0, 1.0).unwrap();
            assert_relative_eq!(q.gamma.ln - p.gamma.ln, 2f64.ln(), epsilon = 1e-12);
        }
        assert!(barrier_constants(0.5, 1.0, 1.0).unwrap().underflow);
        assert!(!barrier_constants(10.0, 1.0, 1.0).unwrap().underflow);
        assert!(barrier_constants(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn log_value_mantissa() {
        let v = LogValue::from_ln(1234.5f64.ln());
        assert_eq!(v.exp10, 3);
        assert_relative_eq!(v.mantissa, 1.2345, epsilon = 1e-12);
        assert!(LogValue::from_ln(-1000.0).underflows());
    }

    #[test]
    fn negative_part() {
        assert_eq!(neg_part_norm(Mat2::diag(3.0, 5.0)), 0.0);
        assert_relative_eq!(neg_part_norm(Mat2::diag(1.0, -2.0)), 2.0);
        assert_relative_eq!(neg_part_norm(Mat2 { a: 0.0, b: 2.0, c: 2.0, d: 0.0 }), 2.0);
    }

    #[test]
    fn eval_at_special_points() {
        let p = barrier_constants(10.0, 1.0, 1.0).unwrap();
        let e = barrier_eval(&p, Vec2::new(0.0, -HALF_SIDE)).unwrap();
        assert!(e.w.abs() <= 1e-12 * p.c.value.unwrap());
        let z = barrier_eval(&p, Vec2::ZERO).unwrap();
        assert_eq!(z.hess_scaled, Mat2::diag(-40.0, p.k));
        assert_relative_eq!(neg_part_norm(z.hess_scaled), 40.0);
        assert!(barrier_eval(&p, Vec2::new(0.2, 0.0)).is_err());
    }

    #[test]
    fn identity_subsolution() {
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let p = barrier_constants(1.0, 1.0, 1.0).unwrap();
        let r = subsolution_check(&id, &p, 64, None).unwrap();
        assert!(r.bound_positive && r.trace_positive, "{r:?}");
        assert!(r.max_det_rel_err <= 1e-10);
        let m = margin_scan(&p, 10_000);
        assert!(m.holds && m.displayed_discrepancy > 0.0);
        // the maximum 40 sits at x₁ = 0, which an odd count hits exactly
        assert!(m.max_neg <= 40.0 && m.max_neg > 39.99);
        assert_relative_eq!(margin_scan(&p, 10_001).max_neg, 40.0, max_relative = 1e-12);
    }

    #[test]
    fn linear_data_flatness() {
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let (p0, q) = (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        let r = flatness_experiment(&id, p0, q, 0.5, 0.0, 0.1, &SolveOpts::default(), None).unwrap();
        assert_relative_eq!(r.min_distance, 2f64.sqrt(), epsilon = 1e-9);
        let r = flatness_experiment(&id, p0, q, 0.5, 0.01, 0.1, &SolveOpts::default(), None).unwrap();
        assert!(r.pass);
        assert!(flatness_experiment(&id, q, q, 0.5, 0.01, 0.1, &SolveOpts::default(), None).is_err());
    }
}
