//! Planar monotone vector fields, their monotonicity and ellipticity
//! diagnostics, degeneracy grids and the dual field.

mod builtin;
mod dual;
pub mod edt;
mod grid;
pub mod invert;
mod monotone;
mod quotients;
pub mod sampling;

pub use builtin::{RadialPiece, RadialProfile};
pub use dual::{dual_field, duality_residuals, grid_image_duality, DualOpts, GridDuality};
pub use grid::{classify_grid, hausdorff, ClassLabel, DegeneracyGrid, EmptyInteriorReport, GridSpec, LADDER_RTOL};
pub use invert::{invert, InvertOpts, Inversion};
pub use monotone::{
    check_monotone, monotonicity_report, monotony_modulus, monotony_modulus_on,
    strong_monotonicity_constant, MonotonicityReport,
};
pub use quotients::{ellipticity_quotients, QuotientOpts, Quotients};

use crate::error::{Error, Result};
use crate::geom::{Mat2, Rect, Vec2};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// The evaluation rule behind a [`Field`].
pub trait FieldRule: Send + Sync {
    fn eval(&self, xi: Vec2) -> Vec2;

    /// Analytic Jacobian, if known. Non-finite entries trigger a difference fallback.
    fn jacobian(&self, _xi: Vec2) -> Option<Mat2> {
        None
    }

    /// Potential `F` with `G = ∇F`, when the field is a gradient with known potential.
    fn potential(&self, _xi: Vec2) -> Option<f64> {
        None
    }

    fn is_gradient(&self) -> bool {
        false
    }

    fn is_radial(&self) -> bool {
        false
    }

    /// Radii `|ξ|` across which the Jacobian may jump.
    fn kink_radii(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Tag describing how a field was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    IdentityScaled,
    PLaplacian,
    RadialGradient,
    KinkCircle,
    QuarticQuartroot,
    Custom,
    Modified,
    Mollified,
    Dual,
}

/// Builtin field specification, as read from scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuiltinSpec {
    Identity,
    IdentityScaled { c: f64 },
    #[serde(rename = "p-laplacian")]
    PLaplacian { p: f64 },
    RadialGradient { pieces: Vec<RadialPiece> },
    KinkCircle,
    QuarticQuartroot,
}

impl BuiltinSpec {
    /// Parses the short names accepted on the command line.
    pub fn from_name(name: &str) -> Option<BuiltinSpec> {
        Some(match name {
            "identity" => BuiltinSpec::Identity,
            "identity-scaled" => BuiltinSpec::IdentityScaled { c: 1.0 },
            "p-laplacian" => BuiltinSpec::PLaplacian { p: 4.0 },
            "kink-circle" => BuiltinSpec::KinkCircle,
            "quartic-quartroot" => BuiltinSpec::QuarticQuartroot,
            _ => return None,
        })
    }
}

/// Default working box of builtin fields.
pub const DEFAULT_WORKING_BOX: f64 = 4.0;

/// A continuous, strictly monotone planar vector field with metadata.
///
/// Cheap to clone; the rule is shared.
#[derive(Clone)]
pub struct Field {
    rule: Arc<dyn FieldRule>,
    kind: FieldKind,
    name: String,
    working_box: Rect,
    growth_bound: f64,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("kind", &self.kind)
            .field("name", &self.name)
            .field("working_box", &self.working_box)
            .field("growth_bound", &self.growth_bound)
            .finish()
    }
}

/// Result of [`Field::jacobian`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobianEval {
    pub matrix: Mat2,
    pub sym: Mat2,
    /// Eigenvalues `(lo, hi)` of the symmetric part.
    pub eigenvalues: (f64, f64),
    pub analytic: bool,
    /// The two one-sided difference quotients disagreed by more than the kink ratio.
    pub near_kink: bool,
}

/// Ratio between one-sided difference quotients beyond which an evaluation is flagged near a kink.
pub const KINK_RATIO: f64 = 10.0;

impl Field {
    /// Wraps a rule; the growth bound is measured on a lattice over the working box.
    pub fn from_rule(
        rule: Arc<dyn FieldRule>,
        kind: FieldKind,
        name: impl Into<String>,
        working_box: Rect,
    ) -> Result<Self> {
        if !working_box.is_valid() {
            return Err(Error::InvalidParameter("working box must be a nondegenerate rectangle".into()));
        }
        let mut f = Field { rule, kind, name: name.into(), working_box, growth_bound: f64::NAN };
        f.growth_bound = f.measure_growth(41)?;
        Ok(f)
    }

    /// A user-supplied rule. Rejected if sampled values are non-finite or non-monotone.
    pub fn custom<F>(name: &str, working_box: Rect, eval: F) -> Result<Self>
    where
        F: Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    {
        Self::custom_with(name, working_box, eval, None, false)
    }

    /// A user-supplied rule with optional analytic Jacobian; `gradient` declares `G = ∇F`.
    pub fn custom_with<F>(
        name: &str,
        working_box: Rect,
        eval: F,
        jacobian: Option<Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>>,
        gradient: bool,
    ) -> Result<Self>
    where
        F: Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    {
        let rule = CustomRule { eval: Box::new(eval), jacobian, gradient };
        let f = Field::from_rule(Arc::new(rule), FieldKind::Custom, name, working_box)?;
        check_monotone(&f, &f.working_box, 1000, 0)?;
        Ok(f)
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn working_box(&self) -> Rect {
        self.working_box
    }

    /// `L` with `|G(ξ)| ≤ L(1+|ξ|)` on the working box (measured).
    pub fn growth_bound(&self) -> f64 {
        self.growth_bound
    }

    pub fn is_gradient(&self) -> bool {
        self.rule.is_gradient()
    }

    pub fn is_radial(&self) -> bool {
        self.rule.is_radial()
    }

    pub fn kink_radii(&self) -> Vec<f64> {
        self.rule.kink_radii()
    }

    pub fn rule(&self) -> &Arc<dyn FieldRule> {
        &self.rule
    }

    /// `G(ξ)` without range checks.
    #[inline]
    pub fn eval(&self, xi: Vec2) -> Vec2 {
        self.rule.eval(xi)
    }

    /// `G(ξ)`, rejecting points far outside the working box and non-finite output.
    pub fn checked_eval(&self, xi: Vec2) -> Result<Vec2> {
        let wb = self.working_box;
        if !xi.is_finite() || !wb.inflate(wb.diameter()).contains(xi) {
            return Err(Error::OutOfRegion(xi));
        }
        let g = self.rule.eval(xi);
        if !g.is_finite() {
            return Err(Error::NonFinite(xi));
        }
        Ok(g)
    }

    /// Potential `F(ξ)` if available.
    pub fn potential(&self, xi: Vec2) -> Option<f64> {
        self.rule.potential(xi)
    }

    pub fn has_potential(&self) -> bool {
        self.rule.potential(Vec2::ZERO).is_some()
    }

    /// Jacobian matrix: analytic when finite, else central differences with step `h`.
    pub fn jacobian_matrix(&self, xi: Vec2, h: f64) -> Mat2 {
        if let Some(j) = self.rule.jacobian(xi) {
            if j.is_finite() {
                return j;
            }
        }
        self.central_difference(xi, h)
    }

    /// Full Jacobian evaluation with symmetric part, eigenvalues and kink detection.
    pub fn jacobian(&self, xi: Vec2, h: f64) -> Result<JacobianEval> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("difference step must be positive".into()));
        }
        let analytic = self.rule.jacobian(xi).filter(|j| j.is_finite());
        let (matrix, near_kink) = match analytic {
            Some(j) => (j, false),
            None => {
                let c = self.central_difference(xi, h);
                (c, self.one_sided_disagree(xi, h))
            }
        };
        let sym = matrix.sym();
        Ok(JacobianEval { matrix, sym, eigenvalues: sym.sym_eigenvalues(), analytic: analytic.is_some(), near_kink })
    }

    fn central_difference(&self, xi: Vec2, h: f64) -> Mat2 {
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        let c0 = (self.eval(xi + ex) - self.eval(xi - ex)) / (2.0 * h);
        let c1 = (self.eval(xi + ey) - self.eval(xi - ey)) / (2.0 * h);
        Mat2::from_cols(c0, c1)
    }

    fn one_sided_disagree(&self, xi: Vec2, h: f64) -> bool {
        let g0 = self.eval(xi);
        [Vec2::new(h, 0.0), Vec2::new(0.0, h)].iter().any(|&e| {
            let fwd = (self.eval(xi + e) - g0).norm() / h;
            let bwd = (g0 - self.eval(xi - e)).norm() / h;
            let (lo, hi) = if fwd < bwd { (fwd, bwd) } else { (bwd, fwd) };
            hi > KINK_RATIO * lo.max(1e-300)
        })
    }

    fn measure_growth(&self, n: usize) -> Result<f64> {
        let wb = self.working_box;
        let mut l: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let xi = Vec2::new(
                    wb.min.x + wb.width() * i as f64 / (n - 1) as f64,
                    wb.min.y + wb.height() * j as f64 / (n - 1) as f64,
                );
                let g = self.eval(xi);
                if !g.is_finite() {
                    return Err(Error::NonFinite(xi));
                }
                l = l.max(g.norm() / (1.0 + xi.norm()));
            }
        }
        Ok(l)
    }
}

struct CustomRule {
    eval: Box<dyn Fn(Vec2) -> Vec2 + Send + Sync>,
    jacobian: Option<Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>>,
    gradient: bool,
}

impl FieldRule for CustomRule {
    fn eval(&self, xi: Vec2) -> Vec2 {
        (self.eval)(xi)
    }
    fn jacobian(&self, xi: Vec2) -> Option<Mat2> {
        self.jacobian.as_ref().map(|j| j(xi))
    }
    fn is_gradient(&self) -> bool {
        self.gradient
    }
}

/// Builds a builtin field on the default working box `[-4, 4]²`.
pub fn make_builtin(spec: &BuiltinSpec) -> Result<Field> {
    make_builtin_on(spec, Rect::centered(DEFAULT_WORKING_BOX))
}

/// Builds a builtin field on the given working box and checks monotonicity on sampled pairs.
pub fn make_builtin_on(spec: &BuiltinSpec, working_box: Rect) -> Result<Field> {
    let (rule, kind, name): (Arc<dyn FieldRule>, _, String) = match spec {
        BuiltinSpec::Identity => (Arc::new(builtin::IdentityScaled { c: 1.0 }), FieldKind::IdentityScaled, "identity".into()),
        BuiltinSpec::IdentityScaled { c } => {
            if !(c.is_finite() && *c > 0.0) {
                return Err(Error::InvalidParameter(format!("identity-scaled needs c > 0, got {c}")));
            }
            (Arc::new(builtin::IdentityScaled { c: *c }), FieldKind::IdentityScaled, format!("identity-scaled(c={c})"))
        }
        BuiltinSpec::PLaplacian { p } => {
            if !(p.is_finite() && *p > 1.0) {
                return Err(Error::InvalidParameter(format!("p-laplacian needs p > 1, got {p}")));
            }
            (Arc::new(builtin::PLaplacian { p: *p }), FieldKind::PLaplacian, format!("p-laplacian(p={p})"))
        }
        BuiltinSpec::RadialGradient { pieces } => {
            let prof = RadialProfile::new(pieces.clone())?;
            (Arc::new(prof), FieldKind::RadialGradient, "radial-gradient".into())
        }
        BuiltinSpec::KinkCircle => (Arc::new(RadialProfile::kink_circle()), FieldKind::KinkCircle, "kink-circle".into()),
        BuiltinSpec::QuarticQuartroot => {
            (Arc::new(builtin::QuarticQuartroot), FieldKind::QuarticQuartroot, "quartic-quartroot".into())
        }
    };
    let f = Field::from_rule(rule, kind, name, working_box)?;
    check_monotone(&f, &working_box, 1000, 0)?;
    Ok(f)
}
