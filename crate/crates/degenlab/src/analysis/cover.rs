use super::{GradientField, Region};
use crate::error::{Error, Result};
use crate::field::edt::distance_transform;
use crate::field::DegeneracyGrid;
use crate::geom::Vec2;
use serde::Serialize;
use std::collections::VecDeque;

/// `4(2M + r/2)² / r²`.
pub fn component_bound(m: f64, r: f64) -> f64 {
    4.0 * (2.0 * m + 0.5 * r).powi(2) / (r * r)
}

#[derive(Clone, Debug, Serialize)]
pub struct Components {
    pub count: usize,
    /// Component of each node, for nodes of `B̄_{2M}` farther than `r` from 𝒟̂∩𝒮̂.
    #[serde(skip)]
    pub labels: Vec<Option<u32>>,
    pub sizes: Vec<usize>,
    pub r: f64,
    pub m: f64,
    pub bound: f64,
    pub within_bound: bool,
}

impl Components {
    pub fn label_of(&self, grid: &DegeneracyGrid, p: Vec2) -> Option<u32> {
        grid.nearest(p).and_then(|k| self.labels[k])
    }
}

fn in_ball(grid: &DegeneracyGrid, k: usize, radius: f64) -> bool {
    grid.node(k).norm() <= radius * (1.0 + 1e-12)
}

/// 4-connected components of `{ξ ∈ B̄_{2M} : dist(ξ, 𝒟̂∩𝒮̂) > r}`.
pub fn connected_components(grid: &DegeneracyGrid, r: f64, m: f64) -> Result<Components> {
    if !(r > 0.0 && m > 0.0) {
        return Err(Error::InvalidParameter("exclusion radius and M must be positive".into()));
    }
    if !grid.covers_ball(2.0 * m) {
        return Err(Error::Precondition(format!("grid does not cover the ball of radius {}", 2.0 * m)));
    }
    let active: Vec<bool> = (0..grid.len()).map(|k| in_ball(grid, k, 2.0 * m) && grid.dist_ds[k] > r).collect();
    let mut labels = vec![None; grid.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !active[start] || labels[start].is_some() {
            continue;
        }
        let id = sizes.len() as u32;
        labels[start] = Some(id);
        queue.push_back(start);
        let mut size = 0;
        while let Some(k) = queue.pop_front() {
            size += 1;
            for n in grid.neighbors4(k) {
                if active[n] && labels[n].is_none() {
                    labels[n] = Some(id);
                    queue.push_back(n);
                }
            }
        }
        sizes.push(size);
    }
    let bound = component_bound(m, r);
    let count = sizes.len();
    Ok(Components { count, labels, sizes, r, m, bound, within_bound: count as f64 <= bound })
}

/// Distance from `B̄_{2M}` to the edge of the grid box.
fn box_margin(grid: &DegeneracyGrid, m: f64) -> f64 {
    let b = grid.bbox;
    (-b.min.x).min(b.max.x).min(-b.min.y).min(b.max.y) - 2.0 * m
}

/// Largest `η` of a halving search from the box-limited cap such that every node of
/// `B̄_{2M}` has its `η`-ball inside one of `Ô_λ`, `V̂_Λ`, `N^r(𝒟̂∩𝒮̂)`.
pub fn lebesgue_number(grid: &DegeneracyGrid, lambda: f64, big_lambda: f64, r: f64, m: f64) -> Result<f64> {
    let cap = box_margin(grid, m);
    if !(cap > 0.0) {
        return Err(Error::Precondition(format!("grid does not cover the ball of radius {}", 2.0 * m)));
    }
    let n = grid.len();
    let in_o: Vec<bool> = (0..n).map(|k| grid.in_o(k, lambda)).collect();
    let in_v: Vec<bool> = (0..n).map(|k| grid.in_v(k, big_lambda)).collect();
    let in_n: Vec<bool> = (0..n).map(|k| grid.dist_ds[k] < r).collect();
    let nodes: Vec<usize> = (0..n).filter(|&k| in_ball(grid, k, 2.0 * m)).collect();
    if let Some(&k) = nodes.iter().find(|&&k| !(in_o[k] || in_v[k] || in_n[k])) {
        return Err(Error::NotCovered(grid.node(k)));
    }
    let outside = |mask: &[bool]| distance_transform(&mask.iter().map(|b| !b).collect::<Vec<_>>(), grid.nx, grid.ny, grid.h);
    let (d_o, d_v, d_n) = (outside(&in_o), outside(&in_v), outside(&in_n));
    let reach: Vec<f64> = nodes.iter().map(|&k| d_o[k].max(d_v[k]).max(d_n[k])).collect();
    let mut eta = cap;
    for _ in 0..60 {
        if reach.iter().all(|&d| d > eta) {
            return Ok(eta);
        }
        eta *= 0.5;
    }
    Err(Error::Precondition("no positive Lebesgue number at grid resolution".into()))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EllipticBall {
    pub q: Vec2,
    pub rho: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    /// The ball was moved to exclude the given point.
    pub shifted: bool,
}

/// Elliptic ball inside component `label`, as far as possible from non-elliptic
/// nodes and from the component boundary; `p0` is kept outside the returned ball.
pub fn find_elliptic_ball(grid: &DegeneracyGrid, comps: &Components, label: u32, p0: Vec2) -> Result<EllipticBall> {
    let n = grid.len();
    let elliptic = |k: usize| !grid.in_d[k] && !grid.in_s[k];
    let non_elliptic: Vec<bool> = (0..n).map(|k| !elliptic(k)).collect();
    let outside: Vec<bool> = (0..n).map(|k| comps.labels[k] != Some(label)).collect();
    let d1 = distance_transform(&non_elliptic, grid.nx, grid.ny, grid.h);
    let d2 = distance_transform(&outside, grid.nx, grid.ny, grid.h);
    let b = grid.bbox;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..n {
        if outside[k] || !elliptic(k) {
            continue;
        }
        let x = grid.node(k);
        let edge = (x.x - b.min.x).min(b.max.x - x.x).min(x.y - b.min.y).min(b.max.y - x.y);
        let score = d1[k].min(d2[k]).min(edge);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, k));
        }
    }
    let (score, k) = best.ok_or(Error::NoEllipticNode)?;
    let mut q = grid.node(k);
    let mut rho = 0.5 * score;
    let (mut lo, mut vo) = (0u8, 0u8);
    for j in 0..n {
        if (grid.node(j) - q).norm() < rho {
            lo = lo.max(grid.o_level[j].unwrap_or(u8::MAX));
            vo = vo.max(grid.v_level[j].unwrap_or(u8::MAX));
        }
    }
    let lambda = grid.lambda_ladder.get(lo as usize).copied().unwrap_or(0.0);
    let big_lambda = grid.big_lambda_ladder.get(vo as usize).copied().unwrap_or(f64::INFINITY);
    let mut shifted = false;
    if (p0 - q).norm() < rho {
        let d = q - p0;
        let dir = if d.norm() > 0.0 { d * (1.0 / d.norm()) } else { Vec2::new(1.0, 0.0) };
        q = q + dir * (0.5 * rho);
        rho *= 0.5;
        shifted = true;
    }
    Ok(EllipticBall { q, rho, lambda, big_lambda, shifted })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalizationState {
    Contained,
    Disjoint,
    Neither,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Localization {
    pub delta: f64,
    pub state: LocalizationState,
    /// Mean gradient over the ball.
    pub p: Vec2,
    /// Largest distance of a sampled gradient from `p`.
    pub spread: f64,
}

/// For each δ, whether `∇u(B_δ(x0))` lies in `B_r(p)` with `p` in component `label`,
/// misses the component, or neither.
pub fn localization_check(
    gf: &GradientField,
    x0: Vec2,
    deltas: &[f64],
    grid: &DegeneracyGrid,
    comps: &Components,
    label: u32,
    r: f64,
) -> Result<Vec<Localization>> {
    super::check_deltas(deltas)?;
    deltas
        .iter()
        .map(|&delta| {
            let s = gf.weighted_samples(&Region::ball(x0, delta))?;
            let (sum, w) = s.iter().fold((Vec2::ZERO, 0.0), |(a, b), &(g, w)| (a + g * w, b + w));
            let p = sum * (1.0 / w);
            let spread = s.iter().map(|&(g, _)| (g - p).norm()).fold(0.0, f64::max);
            let state = if spread < r && comps.label_of(grid, p) == Some(label) {
                LocalizationState::Contained
            } else if s.iter().all(|&(g, _)| comps.label_of(grid, g) != Some(label)) {
                LocalizationState::Disjoint
            } else {
                LocalizationState::Neither
            };
            Ok(Localization { delta, state, p, spread })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{classify_grid, make_builtin, BuiltinSpec, GridSpec};
    use crate::geom::{Disk, Rect};

    fn grid_for(spec: BuiltinSpec, half: f64, h: f64) -> DegeneracyGrid {
        let f = make_builtin(&spec).unwrap();
        classify_grid(&f, &GridSpec::new(Rect::centered(half), h)).unwrap()
    }

    #[test]
    fn identity_is_one_component_with_capped_lebesgue_number() {
        let g = grid_for(BuiltinSpec::Identity, 2.5, 0.1);
        let c = connected_components(&g, 0.1, 1.0).unwrap();
        assert_eq!(c.count, 1);
        assert!(c.within_bound);
        let eta = lebesgue_number(&g, 1.0, 1.0, 0.1, 1.0).unwrap();
        assert!((eta - 0.5).abs() < 1e-12, "{eta}");
    }

    #[test]
    fn quartic_origin_keeps_one_component() {
        let g = grid_for(BuiltinSpec::QuarticQuartroot, 2.5, 0.05);
        let c = connected_components(&g, 0.1, 1.0).unwrap();
        assert_eq!(c.count, 1);
    }

    #[test]
    fn elliptic_ball_in_identity_grid() {
        let g = grid_for(BuiltinSpec::Identity, 2.5, 0.1);
        let c = connected_components(&g, 0.1, 1.0).unwrap();
        let b = find_elliptic_ball(&g, &c, 0, Vec2::new(5.0, 5.0)).unwrap();
        assert!(b.q.norm() < 1e-9, "{b:?}");
        assert!(!b.shifted);
        let s = find_elliptic_ball(&g, &c, 0, b.q).unwrap();
        assert!(s.shifted && (s.q - b.q).norm() >= s.rho);
    }

    #[test]
    fn localization_of_constant_gradients() {
        let g = grid_for(BuiltinSpec::Identity, 2.5, 0.1);
        let c = connected_components(&g, 0.1, 1.0).unwrap();
        let inside = GradientField::synthetic(Disk::unit(), |_| Vec2::new(0.3, 0.2));
        let outside = GradientField::synthetic(Disk::unit(), |_| Vec2::new(2.4, 0.0));
        let ds = [0.5, 0.25];
        let a = localization_check(&inside, Vec2::ZERO, &ds, &g, &c, 0, 0.1).unwrap();
        assert!(a.iter().all(|l| l.state == LocalizationState::Contained && (l.p - Vec2::new(0.3, 0.2)).norm() < 1e-9), "{a:?}");
        let b = localization_check(&outside, Vec2::ZERO, &ds, &g, &c, 0, 0.1).unwrap();
        assert!(b.iter().all(|l| l.state == LocalizationState::Disjoint));
    }

    #[test]
    fn rejects_uncovered_ball() {
        let g = grid_for(BuiltinSpec::Identity, 1.0, 0.1);
        assert!(connected_components(&g, 0.1, 1.0).is_err());
        assert!(lebesgue_number(&g, 1.0, 1.0, 0.1, 1.0).is_err());
    }
}
