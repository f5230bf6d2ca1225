use super::{GradientField, Region};
use crate::error::{Error, Result};
use crate::geom::{smoothstep5, smoothstep5_deriv, Disk, Vec2};
use crate::solve::recover_hessians;
use serde::Serialize;

/// Radial quintic bump: `1` on `B_{η/2}(ξ₀)`, `0` outside `B_η(ξ₀)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BumpH {
    pub center: Vec2,
    pub eta: f64,
    /// `‖∇H‖_∞`.
    pub grad_bound: f64,
}

impl BumpH {
    fn s(&self, r: f64) -> f64 {
        (self.eta - r) / (0.5 * self.eta)
    }

    pub fn radial(&self, r: f64) -> f64 {
        smoothstep5(self.s(r))
    }

    pub fn eval(&self, xi: Vec2) -> f64 {
        self.radial((xi - self.center).norm())
    }

    pub fn gradient(&self, xi: Vec2) -> Vec2 {
        let d = xi - self.center;
        let r = d.norm();
        if r == 0.0 {
            return Vec2::ZERO;
        }
        d * (-smoothstep5_deriv(self.s(r)) * 2.0 / (self.eta * r))
    }

    /// Radius where the profile equals `level ∈ (0, 1)`, by bisection.
    pub fn level_radius(&self, level: f64) -> f64 {
        let (mut lo, mut hi) = (0.5 * self.eta, self.eta);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.radial(mid) >= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Builds the bump and verifies its support and level-set containments on 10³ radii.
pub fn make_bump(center: Vec2, eta: f64) -> Result<BumpH> {
    if !(eta > 0.0 && eta.is_finite()) || !center.is_finite() {
        return Err(Error::InvalidParameter(format!("bump radius must be positive, got {eta}")));
    }
    let h = BumpH { center, eta, grad_bound: 1.875 * 2.0 / eta };
    for k in 0..=1000 {
        let r = 1.2 * eta * k as f64 / 1000.0;
        let v = h.radial(r);
        let bad = (r <= 0.5 * eta && v != 1.0)
            || (r >= eta && v != 0.0)
            || (v >= 5.0 / 8.0 && r >= 0.75 * eta)
            || (v <= 0.75 && r < 2.0 * eta / 3.0);
        if bad {
            return Err(Error::Precondition(format!("bump profile check failed at radius {r}")));
        }
    }
    Ok(h)
}

/// `f(δ) = |{H(∇u) ≥ 3/4} ∩ B_δ| / |B_δ|`, balls centred at the origin of `gf`.
pub fn superlevel_fraction(gf: &GradientField, h: &BumpH, delta: f64) -> Result<f64> {
    let s = gf.weighted_samples(&Region::Ball(Disk::new(Vec2::ZERO, delta)))?;
    let (hit, total) = s.iter().fold((0.0, 0.0), |(a, b), &(g, w)| (if h.eval(g) >= 0.75 { a + w } else { a }, b + w));
    Ok(if total > 0.0 { hit / total } else { 0.0 })
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositeEnergy {
    pub value: f64,
    pub triangles: usize,
    pub degenerate: usize,
    /// More than 5% of the annulus triangles lacked a recovered Hessian.
    pub warning: bool,
    /// `Σ |T|·|D²u|²` over the same triangles, for comparison bounds.
    pub hessian_energy: f64,
}

/// `∫ |∇(H(∇u))|²` over the annulus `r_in ≤ |x| ≤ r_out` (own coordinates),
/// with recovered Hessians; triangles are selected by centroid.
pub fn composite_energy(gf: &GradientField, h: &BumpH, r_in: f64, r_out: f64) -> Result<CompositeEnergy> {
    if !(0.0 <= r_in && r_in < r_out) {
        return Err(Error::InvalidParameter("annulus radii must satisfy 0 ≤ r_in < r_out".into()));
    }
    if !gf.region().contains_disk(&Disk::new(Vec2::ZERO, r_out)) {
        return Err(Error::OutOfRegion(Vec2::new(r_out, 0.0)));
    }
    let sol = gf
        .solution()
        .filter(|_| gf.map.is_none())
        .ok_or_else(|| Error::Precondition("composite energy needs an unmapped solution-backed field".into()))?;
    let mesh = &sol.mesh;
    let rec = recover_hessians(mesh, &sol.u);
    let mut out = CompositeEnergy { value: 0.0, triangles: 0, degenerate: 0, warning: false, hessian_energy: 0.0 };
    for t in 0..mesh.n_triangles() {
        let c = (mesh.centroid(t) - gf.center) * (1.0 / gf.scale);
        let r = c.norm();
        if r < r_in || r > r_out {
            continue;
        }
        out.triangles += 1;
        let Some(hess) = rec.on_triangle(mesh, t) else {
            out.degenerate += 1;
            continue;
        };
        // area and Hessian scalings of the blow-up cancel
        let area = mesh.geom[t].area;
        out.value += area * hess.mul_vec(h.gradient(sol.grads[t])).norm2();
        out.hessian_energy += area * hess.frobenius().powi(2);
    }
    out.warning = out.degenerate as f64 > 0.05 * out.triangles as f64;
    Ok(out)
}

/// One selected scale of the sub-sequence construction.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SubsequenceStep {
    pub index: usize,
    pub delta: f64,
    pub f: f64,
}

/// Walks a decreasing δ grid choosing `δ_{j_{i+1}}` as the first grid value below
/// `δ_{j_i}·√(f(δ_{j_i})/4)`. After the iterator ends, `exhausted` tells whether the
/// grid ran out before `f` reached zero.
pub struct DeltaSubsequence<'a, F: FnMut(f64) -> Result<f64>> {
    grid: &'a [f64],
    f: F,
    next: Option<usize>,
    pub exhausted: bool,
}

impl<'a, F: FnMut(f64) -> Result<f64>> DeltaSubsequence<'a, F> {
    pub fn new(grid: &'a [f64], f: F) -> Self {
        DeltaSubsequence { grid, f, next: if grid.is_empty() { None } else { Some(0) }, exhausted: grid.is_empty() }
    }
}

impl<F: FnMut(f64) -> Result<f64>> Iterator for DeltaSubsequence<'_, F> {
    type Item = Result<SubsequenceStep>;

    fn next(&mut self) -> Option<Self::Item> {
        let index = self.next.take()?;
        let delta = self.grid[index];
        let f = match (self.f)(delta) {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        if f > 0.0 {
            let bound = delta * (f / 4.0).sqrt();
            self.next = (index + 1..self.grid.len()).find(|&k| self.grid[k] < bound);
            self.exhausted = self.next.is_none();
        }
        Some(Ok(SubsequenceStep { index, delta, f }))
    }
}
