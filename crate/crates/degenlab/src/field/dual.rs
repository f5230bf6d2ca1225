//! The dual field `G*(η) = i·G⁻¹(−i·η)`.

use super::grid::{hausdorff, DegeneracyGrid};
use super::invert::{invert, InvertOpts};
use super::{Field, FieldKind, FieldRule};
use crate::error::Result;
use crate::geom::{Mat2, Rect, Vec2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualOpts {
    pub newton: InvertOpts,
    /// Working box of the dual; defaults to the bounding box of `iG(working box)`.
    pub working_box: Option<Rect>,
    /// Side of the warm-start lattice.
    pub cache_n: usize,
}

impl Default for DualOpts {
    fn default() -> Self {
        DualOpts { newton: InvertOpts::default(), working_box: None, cache_n: 33 }
    }
}

/// Read-only lattice of previously inverted points, used for initial guesses.
struct WarmCache {
    bbox: Rect,
    n: usize,
    x: Vec<Option<Vec2>>,
}

impl WarmCache {
    fn build(primal: &Field, bbox: Rect, n: usize, opts: &InvertOpts) -> Self {
        let n = n.max(2);
        let mut x = vec![None; n * n];
        let mut prev = Vec2::ZERO;
        for i in 0..n {
            for jj in 0..n {
                // serpentine sweep so consecutive nodes are neighbours
                let j = if i % 2 == 0 { jj } else { n - 1 - jj };
                let eta = node(&bbox, n, i, j);
                if let Ok(inv) = invert(primal, eta.rot_neg90(), prev, opts) {
                    prev = inv.x;
                    x[i * n + j] = Some(inv.x);
                }
            }
        }
        WarmCache { bbox, n, x }
    }

    fn guess(&self, eta: Vec2) -> Option<Vec2> {
        let fi = ((eta.x - self.bbox.min.x) / self.bbox.width() * (self.n - 1) as f64).round();
        let fj = ((eta.y - self.bbox.min.y) / self.bbox.height() * (self.n - 1) as f64).round();
        let i = fi.clamp(0.0, (self.n - 1) as f64) as usize;
        let j = fj.clamp(0.0, (self.n - 1) as f64) as usize;
        self.x[i * self.n + j]
    }
}

fn node(b: &Rect, n: usize, i: usize, j: usize) -> Vec2 {
    Vec2::new(
        b.min.x + b.width() * i as f64 / (n - 1) as f64,
        b.min.y + b.height() * j as f64 / (n - 1) as f64,
    )
}

struct DualRule {
    primal: Field,
    cache: WarmCache,
    opts: InvertOpts,
}

impl DualRule {
    fn preimage(&self, eta: Vec2) -> Option<Vec2> {
        let target = eta.rot_neg90();
        let guesses = [self.cache.guess(eta), Some(Vec2::ZERO), Some(target)];
        guesses
            .into_iter()
            .flatten()
            .find_map(|g| invert(&self.primal, target, g, &self.opts).ok())
            .map(|inv| inv.x)
    }
}

impl FieldRule for DualRule {
    fn eval(&self, eta: Vec2) -> Vec2 {
        match self.preimage(eta) {
            Some(x) => x.rot90(),
            None => Vec2::new(f64::NAN, f64::NAN),
        }
    }

    fn jacobian(&self, eta: Vec2) -> Option<Mat2> {
        let x = self.preimage(eta)?;
        let j = self.primal.rule().jacobian(x).filter(|j| j.is_finite())?;
        let ji = j.inverse()?;
        // R J⁻¹ Rᵀ with R the quarter turn
        let r = Mat2::new(0.0, -1.0, 1.0, 0.0);
        Some(r * ji * r.transpose())
    }

    fn is_gradient(&self) -> bool {
        self.primal.is_gradient()
    }

    fn is_radial(&self) -> bool {
        self.primal.is_radial()
    }
}

/// Builds `G*`; inversions that fail evaluate to NaN (see [`Field::checked_eval`]).
pub fn dual_field(field: &Field, opts: &DualOpts) -> Result<Field> {
    let bbox = match opts.working_box {
        Some(b) => b,
        None => image_box(field),
    };
    let cache = WarmCache::build(field, bbox, opts.cache_n, &opts.newton);
    let rule = DualRule { primal: field.clone(), cache, opts: opts.newton.clone() };
    Field::from_rule(Arc::new(rule), FieldKind::Dual, format!("dual({})", field.name()), bbox)
}

fn image_box(field: &Field) -> Rect {
    let wb = field.working_box();
    let n = 64;
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            let p = field.eval(node(&wb, n, i, j)).rot90();
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    Rect { min: lo, max: hi }
}

/// `|G*(i·G(ξ)) − i·ξ|` at each point.
pub fn duality_residuals(field: &Field, dual: &Field, points: &[Vec2]) -> Vec<f64> {
    points.par_iter().map(|&xi| (dual.eval(field.eval(xi).rot90()) - xi.rot90()).norm()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GridDuality {
    pub hausdorff: f64,
    /// Raw 𝒮̂ nodes of the primal grid whose image lands in the dual box.
    pub image_nodes: usize,
    /// Raw 𝒟̂ nodes of the dual grid.
    pub dual_nodes: usize,
}

/// Compares `i·G(𝒮̂)`, restricted to the dual grid's box, with `𝒟̂(G*)`, both from
/// unclosed labels.
pub fn grid_image_duality(field: &Field, grid: &DegeneracyGrid, dual_grid: &DegeneracyGrid) -> GridDuality {
    let image: Vec<Vec2> = (0..grid.len())
        .filter(|&k| grid.raw_in_s(k))
        .map(|k| field.eval(grid.node(k)).rot90())
        .filter(|p| dual_grid.bbox.contains(*p))
        .collect();
    let dual: Vec<Vec2> = (0..dual_grid.len()).filter(|&k| dual_grid.raw_in_d(k)).map(|k| dual_grid.node(k)).collect();
    GridDuality { hausdorff: hausdorff(&image, &dual), image_nodes: image.len(), dual_nodes: dual.len() }
}
