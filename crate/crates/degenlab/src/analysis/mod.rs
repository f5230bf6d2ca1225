//! Blow-up rescaling, ball averages, profiles, discrete Young measures and the
//! dichotomy and covering diagnostics built on them.

mod bump;
mod cover;
mod locate;
mod sv;

pub use bump::{composite_energy, make_bump, superlevel_fraction, BumpH, CompositeEnergy, DeltaSubsequence, SubsequenceStep};
pub use cover::{
    connected_components, component_bound, find_elliptic_ball, lebesgue_number, localization_check, Components,
    EllipticBall, Localization, LocalizationState,
};
pub use sv::{disk_superlevel_fraction, sv_dichotomy, sv_suite, RandomSmooth, SvReport, SvSuiteReport, SV_ANGLES, SV_RADII, SV_SLACK};

use crate::error::{Error, Result};
use crate::field::{ClassLabel, DegeneracyGrid};
use crate::geom::{Disk, Rect, Vec2};
use crate::io::write_csv;
use crate::solve::DiscreteSolution;
use locate::Locator;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// Lattice side used to sample synthetic fields over a region's bounding square.
pub const SYNTHETIC_LATTICE: usize = 512;

type VecMap = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

#[derive(Clone)]
enum Source {
    Solution { sol: Arc<DiscreteSolution>, locator: Arc<Locator> },
    Synthetic(VecMap),
}

/// A gradient field `x ↦ map(∇u(center + scale·x))` on a disk of its own coordinates.
#[derive(Clone)]
pub struct GradientField {
    source: Source,
    region: Disk,
    center: Vec2,
    scale: f64,
    map: Option<VecMap>,
    lipschitz: f64,
}

/// Integration region in the field's own coordinates.
#[derive(Clone, Copy, Debug)]
pub enum Region {
    Ball(Disk),
    /// Intersection of a ball with an axis-aligned window.
    Window { ball: Disk, rect: Rect },
}

impl Region {
    pub fn ball(center: Vec2, r: f64) -> Self {
        Region::Ball(Disk::new(center, r))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Region::Ball(d) => d.contains(p),
            Region::Window { ball, rect } => ball.contains(p) && rect.contains(p),
        }
    }

    fn outer_ball(&self) -> Disk {
        match self {
            Region::Ball(d) | Region::Window { ball: d, .. } => *d,
        }
    }

    fn bbox(&self) -> Rect {
        let d = self.outer_ball();
        let b = Rect::new(d.center.x - d.radius, d.center.x + d.radius, d.center.y - d.radius, d.center.y + d.radius);
        match self {
            Region::Ball(_) => b,
            Region::Window { rect, .. } => Rect::new(
                b.min.x.max(rect.min.x),
                b.max.x.min(rect.max.x),
                b.min.y.max(rect.min.y),
                b.max.y.min(rect.max.y),
            ),
        }
    }

    fn map(&self, center: Vec2, scale: f64) -> Region {
        let md = |d: &Disk| Disk::new(center + d.center * scale, d.radius * scale);
        match self {
            Region::Ball(d) => Region::Ball(md(d)),
            Region::Window { ball, rect } => Region::Window {
                ball: md(ball),
                rect: Rect { min: center + rect.min * scale, max: center + rect.max * scale },
            },
        }
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm2()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Area fraction of triangle `v` inside a convex region: exact when the triangle is
/// fully inside or outside, otherwise the share of its 16 sub-triangle centroids.
fn triangle_fraction(region: &Region, v: [Vec2; 3]) -> f64 {
    if v.iter().all(|&p| region.contains(p)) {
        return 1.0;
    }
    let bb = region.bbox();
    let tmin = Vec2::new(v[0].x.min(v[1].x).min(v[2].x), v[0].y.min(v[1].y).min(v[2].y));
    let tmax = Vec2::new(v[0].x.max(v[1].x).max(v[2].x), v[0].y.max(v[1].y).max(v[2].y));
    if tmax.x < bb.min.x || tmin.x > bb.max.x || tmax.y < bb.min.y || tmin.y > bb.max.y {
        return 0.0;
    }
    if let Region::Ball(d) = region {
        let inside = crate::geom::signed_area(v[0], v[1], d.center) >= 0.0
            && crate::geom::signed_area(v[1], v[2], d.center) >= 0.0
            && crate::geom::signed_area(v[2], v[0], d.center) >= 0.0;
        let dist = (0..3).map(|k| point_segment_distance(d.center, v[k], v[(k + 1) % 3])).fold(f64::INFINITY, f64::min);
        if !inside && dist >= d.radius {
            return 0.0;
        }
    }
    let n = 4.0;
    let e1 = (v[1] - v[0]) * (1.0 / n);
    let e2 = (v[2] - v[0]) * (1.0 / n);
    let mut hits = 0;
    for i in 0..4 {
        for j in 0..4 - i {
            let (fi, fj) = (i as f64, j as f64);
            if region.contains(v[0] + e1 * (fi + 1.0 / 3.0) + e2 * (fj + 1.0 / 3.0)) {
                hits += 1;
            }
            if i + j < 3 && region.contains(v[0] + e1 * (fi + 2.0 / 3.0) + e2 * (fj + 2.0 / 3.0)) {
                hits += 1;
            }
        }
    }
    hits as f64 / 16.0
}

impl GradientField {
    /// Cell gradients of a solution on a disk mesh, defined on the inscribed disk.
    pub fn from_solution(sol: Arc<DiscreteSolution>) -> Result<Self> {
        if !matches!(sol.mesh.domain, crate::mesh::Domain::Disk { .. }) {
            return Err(Error::Precondition("gradient fields need a disk mesh".into()));
        }
        let region = Disk::new(Vec2::ZERO, sol.mesh.inscribed_radius());
        let locator = Arc::new(Locator::new(&sol.mesh));
        let lipschitz = sol.lipschitz;
        Ok(GradientField { source: Source::Solution { sol, locator }, region, center: Vec2::ZERO, scale: 1.0, map: None, lipschitz })
    }

    /// A closed-form gradient field on `region`.
    pub fn synthetic(region: Disk, f: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        let mut g = GradientField {
            source: Source::Synthetic(Arc::new(f)),
            region,
            center: Vec2::ZERO,
            scale: 1.0,
            map: None,
            lipschitz: 0.0,
        };
        g.lipschitz = g.sampled_max_norm();
        g
    }

    fn sampled_max_norm(&self) -> f64 {
        match &self.source {
            Source::Solution { sol, .. } => {
                let phys = Region::Ball(self.region).map(self.center, self.scale);
                (0..sol.mesh.n_triangles())
                    .filter(|&t| triangle_fraction(&phys, sol.mesh.tri_vertices(t)) > 0.0)
                    .map(|t| self.apply_map(sol.grads[t]).norm())
                    .fold(0.0, f64::max)
            }
            Source::Synthetic(_) => self
                .weighted_samples_unchecked(&Region::Ball(self.region), 256)
                .iter()
                .map(|s| s.0.norm())
                .fold(0.0, f64::max),
        }
    }

    pub fn region(&self) -> Disk {
        self.region
    }

    /// `M̂`: largest gradient norm of the source.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn solution(&self) -> Option<&Arc<DiscreteSolution>> {
        match &self.source {
            Source::Solution { sol, .. } => Some(sol),
            Source::Synthetic(_) => None,
        }
    }

    /// Source-coordinate image of an own-coordinate point.
    pub fn to_source(&self, x: Vec2) -> Vec2 {
        self.center + x * self.scale
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn apply_map(&self, g: Vec2) -> Vec2 {
        match &self.map {
            Some(m) => m(g),
            None => g,
        }
    }

    /// `x ↦ ∇u(x₀ + δx)` on the unit disk.
    pub fn rescale(&self, x0: Vec2, delta: f64) -> Result<GradientField> {
        if !(delta > 0.0) || !self.region.contains_disk(&Disk::new(x0, delta)) {
            return Err(Error::OutOfRegion(x0));
        }
        Ok(GradientField {
            source: self.source.clone(),
            region: Disk::unit(),
            center: self.to_source(x0),
            scale: self.scale * delta,
            map: self.map.clone(),
            lipschitz: self.lipschitz,
        })
    }

    /// Post-composes the sampled values with `f`, e.g. `ξ ↦ i·G(ξ)`.
    pub fn mapped(&self, f: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> GradientField {
        let inner = self.map.clone();
        let map: VecMap = match inner {
            Some(m) => Arc::new(move |g| f(m(g))),
            None => Arc::new(f),
        };
        let mut g = GradientField { map: Some(map), ..self.clone() };
        g.lipschitz = g.sampled_max_norm();
        g
    }

    pub fn eval(&self, x: Vec2) -> Result<Vec2> {
        if !self.region.contains(x) {
            return Err(Error::OutOfRegion(x));
        }
        let y = self.to_source(x);
        let g = match &self.source {
            Source::Solution { sol, locator } => {
                let t = locator.locate(&sol.mesh, y).ok_or(Error::NotCovered(y))?;
                sol.grads[t]
            }
            Source::Synthetic(f) => f(y),
        };
        Ok(self.apply_map(g))
    }

    /// Gradient values with their area weights (own coordinates) over `region`.
    pub fn weighted_samples(&self, region: &Region) -> Result<Vec<(Vec2, f64)>> {
        let outer = region.outer_ball();
        if !self.region.contains_disk(&outer) {
            return Err(Error::OutOfRegion(outer.center));
        }
        Ok(self.weighted_samples_unchecked(region, SYNTHETIC_LATTICE))
    }

    fn weighted_samples_unchecked(&self, region: &Region, lattice: usize) -> Vec<(Vec2, f64)> {
        match &self.source {
            Source::Solution { sol, .. } => {
                let phys = region.map(self.center, self.scale);
                let inv = 1.0 / (self.scale * self.scale);
                let mesh = &sol.mesh;
                (0..mesh.n_triangles())
                    .into_par_iter()
                    .filter_map(|t| {
                        let f = triangle_fraction(&phys, mesh.tri_vertices(t));
                        (f > 0.0).then(|| (self.apply_map(sol.grads[t]), f * mesh.geom[t].area * inv))
                    })
                    .collect()
            }
            Source::Synthetic(f) => {
                let bb = region.bbox();
                let side = bb.width().max(bb.height());
                let h = side / lattice as f64;
                let w = h * h;
                (0..lattice * lattice)
                    .into_par_iter()
                    .filter_map(|k| {
                        let x = bb.min + Vec2::new(((k / lattice) as f64 + 0.5) * h, ((k % lattice) as f64 + 0.5) * h);
                        region.contains(x).then(|| (self.apply_map(f(self.to_source(x))), w))
                    })
                    .collect()
            }
        }
    }

    /// Area-weighted mean of the gradient over `B_r(x)`.
    pub fn ball_mean(&self, x: Vec2, r: f64) -> Result<Vec2> {
        let s = self.weighted_samples(&Region::ball(x, r))?;
        let (sum, w) = s.iter().fold((Vec2::ZERO, 0.0), |(a, b), &(g, w)| (a + g * w, b + w));
        Ok(sum * (1.0 / w))
    }
}

fn weighted_mean(samples: &[(Vec2, f64)], f: impl Fn(Vec2) -> f64) -> f64 {
    let (s, w) = samples.iter().fold((0.0, 0.0), |(a, b), &(g, w)| (a + f(g) * w, b + w));
    s / w
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("δ list must be positive and strictly decreasing".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct LebesgueProfile {
    pub center: Vec2,
    /// Mean gradient over the smallest ball.
    pub p: Vec2,
    /// `(δ, mean |∇u − p| over B_δ)`.
    pub profile: Vec<(f64, f64)>,
    pub threshold: f64,
    pub flagged: bool,
}

impl LebesgueProfile {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, Some(&["delta", "mean_deviation"]), self.profile.iter().map(|&(d, v)| [d, v]))
    }
}

/// Lebesgue-like profile at `x0`; flagged when the value at the smallest δ is
/// below `threshold` (default `0.05·M̂`) and not above the value at the previous δ.
pub fn lebesgue_profile(gf: &GradientField, x0: Vec2, deltas: &[f64], threshold: Option<f64>) -> Result<LebesgueProfile> {
    check_deltas(deltas)?;
    let samples: Vec<Vec<(Vec2, f64)>> =
        deltas.iter().map(|&d| gf.weighted_samples(&Region::ball(x0, d))).collect::<Result<_>>()?;
    let last = samples.last().unwrap();
    let (sum, w) = last.iter().fold((Vec2::ZERO, 0.0), |(a, b), &(g, w)| (a + g * w, b + w));
    let p = sum * (1.0 / w);
    let profile: Vec<(f64, f64)> = deltas.iter().zip(&samples).map(|(&d, s)| (d, weighted_mean(s, |g| (g - p).norm()))).collect();
    let threshold = threshold.unwrap_or(0.05 * gf.lipschitz());
    let n = profile.len();
    let tail = profile[n - 1].1;
    let trend_ok = n < 2 || tail <= profile[n - 2].1 * (1.0 + 1e-9) + 1e-12;
    Ok(LebesgueProfile { center: x0, p, profile, threshold, flagged: tail < threshold && trend_ok })
}

/// `(δ, mean dist(∇u, class) over B_δ(x0))`; `+∞` for an empty class.
pub fn distance_profile(
    gf: &GradientField,
    grid: &DegeneracyGrid,
    x0: Vec2,
    deltas: &[f64],
    class: ClassLabel,
) -> Result<Vec<(f64, f64)>> {
    check_deltas(deltas)?;
    let empty = grid.is_class_empty(class);
    deltas
        .iter()
        .map(|&d| {
            if empty {
                return Ok((d, f64::INFINITY));
            }
            let s = gf.weighted_samples(&Region::ball(x0, d))?;
            let dists: Vec<f64> = s.iter().map(|&(g, _)| grid.dist_to_class(g, class)).collect::<Result<_>>()?;
            let (a, w) = s.iter().zip(&dists).fold((0.0, 0.0), |(a, b), (&(_, w), &dd)| (a + dd * w, b + w));
            Ok((d, a / w))
        })
        .collect()
}

/// Mass share of `region` whose gradient lies within `dist` of the class.
pub fn mass_fraction_near(
    gf: &GradientField,
    region: &Region,
    grid: &DegeneracyGrid,
    class: ClassLabel,
    dist: f64,
) -> Result<f64> {
    let s = gf.weighted_samples(region)?;
    let mut near = 0.0;
    let mut total = 0.0;
    for &(g, w) in &s {
        total += w;
        if grid.dist_to_class(g, class)? <= dist {
            near += w;
        }
    }
    Ok(near / total)
}

/// Binned mass distribution of the gradient: a discrete Young measure.
#[derive(Clone, Debug, Serialize)]
pub struct GradientHistogram {
    pub bbox: Rect,
    pub n: usize,
    /// Row-major by x-bin: `mass[i·n + j]`.
    pub mass: Vec<f64>,
    /// Mass of gradients outside the box.
    pub overflow: f64,
    pub total_mass: f64,
    /// Overflow exceeds 1% of the total.
    pub warning: bool,
}

impl GradientHistogram {
    pub fn bin_of(&self, g: Vec2) -> Option<usize> {
        if !self.bbox.contains(g) {
            return None;
        }
        let i = (((g.x - self.bbox.min.x) / self.bbox.width() * self.n as f64) as usize).min(self.n - 1);
        let j = (((g.y - self.bbox.min.y) / self.bbox.height() * self.n as f64) as usize).min(self.n - 1);
        Some(i * self.n + j)
    }

    pub fn bin_center(&self, k: usize) -> Vec2 {
        let (i, j) = (k / self.n, k % self.n);
        Vec2::new(
            self.bbox.min.x + (i as f64 + 0.5) * self.bbox.width() / self.n as f64,
            self.bbox.min.y + (j as f64 + 0.5) * self.bbox.height() / self.n as f64,
        )
    }

    /// Nonempty bins.
    pub fn support(&self) -> Vec<usize> {
        (0..self.mass.len()).filter(|&k| self.mass[k] > 0.0).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            Some(&["bin_x", "bin_y", "mass"]),
            (0..self.mass.len()).map(|k| {
                let c = self.bin_center(k);
                [c.x, c.y, self.mass[k]]
            }),
        )
    }
}

pub fn gradient_histogram(gf: &GradientField, region: &Region, bbox: Rect, n_bins: usize) -> Result<GradientHistogram> {
    if n_bins == 0 || !bbox.is_valid() {
        return Err(Error::InvalidParameter("histogram needs a valid box and at least one bin".into()));
    }
    let s = gf.weighted_samples(region)?;
    let mut h = GradientHistogram { bbox, n: n_bins, mass: vec![0.0; n_bins * n_bins], overflow: 0.0, total_mass: 0.0, warning: false };
    for &(g, w) in &s {
        h.total_mass += w;
        match h.bin_of(g) {
            Some(k) => h.mass[k] += w,
            None => h.overflow += w,
        }
    }
    h.warning = h.overflow > 0.01 * h.total_mass;
    Ok(h)
}

/// Histograms over the 8×8 partition of the region's bounding square.
pub fn windowed_histograms(gf: &GradientField, ball: Disk, bbox: Rect, n_bins: usize) -> Result<Vec<(Rect, GradientHistogram)>> {
    const K: usize = 8;
    let side = 2.0 * ball.radius / K as f64;
    let mut out = Vec::new();
    for i in 0..K {
        for j in 0..K {
            let x0 = ball.center.x - ball.radius + i as f64 * side;
            let y0 = ball.center.y - ball.radius + j as f64 * side;
            let rect = Rect::new(x0, x0 + side, y0, y0 + side);
            let h = gradient_histogram(gf, &Region::Window { ball, rect }, bbox, n_bins)?;
            if h.total_mass > 0.0 {
                out.push((rect, h));
            }
        }
    }
    Ok(out)
}
