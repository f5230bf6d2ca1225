//! Lattice classification of gradient space into elliptic, degenerate and singular nodes.

use super::edt::distance_transform;
use super::quotients::{quotients_with, QuotientOpts};
use super::Field;
use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use crate::io::{parse_csv, write_csv, write_json};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Grid and ladder parameters for [`classify_grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: Rect,
    pub h: f64,
    /// Strictly decreasing λ values.
    pub lambda_ladder: Vec<f64>,
    /// Strictly increasing Λ values.
    pub big_lambda_ladder: Vec<f64>,
    pub quotients: QuotientOpts,
}

impl GridSpec {
    /// Default ladders `λ ∈ {1, …, 2⁻¹⁰}`, `Λ ∈ {1, …, 2¹⁰}`.
    pub fn new(bbox: Rect, h: f64) -> Self {
        GridSpec {
            bbox,
            h,
            lambda_ladder: (0..=10).map(|k| 0.5f64.powi(k)).collect(),
            big_lambda_ladder: (0..=10).map(|k| 2f64.powi(k)).collect(),
            quotients: QuotientOpts::default(),
        }
    }

    pub fn with_ladders(mut self, lambda: Vec<f64>, big_lambda: Vec<f64>) -> Self {
        self.lambda_ladder = lambda;
        self.big_lambda_ladder = big_lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !self.bbox.is_valid() {
            return bad("grid box must be a nondegenerate rectangle");
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("grid spacing must be positive");
        }
        if self.h > self.bbox.width().min(self.bbox.height()) {
            return bad("grid spacing exceeds the box");
        }
        let l = &self.lambda_ladder;
        let bl = &self.big_lambda_ladder;
        if l.is_empty() || bl.is_empty() {
            return bad("ladders must be nonempty");
        }
        if l.iter().chain(bl).any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("ladder values must be positive");
        }
        if l.windows(2).any(|w| w[1] >= w[0]) {
            return bad("lambda ladder must be strictly decreasing");
        }
        if bl.windows(2).any(|w| w[1] <= w[0]) {
            return bad("Lambda ladder must be strictly increasing");
        }
        self.quotients.validate()
    }

    fn dims(&self) -> (usize, usize) {
        let n = |w: f64| (w / self.h + 1e-9).floor() as usize + 1;
        (n(self.bbox.width()), n(self.bbox.height()))
    }
}

/// Class selector for distance queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassLabel {
    D,
    S,
    #[serde(rename = "d-and-s")]
    DAndS,
}

/// Labelled lattice over gradient space. Node `(i, j)` sits at `bbox.min + (i·h, j·h)`
/// and is stored at index `i·ny + j`.
#[derive(Clone, Debug)]
pub struct DegeneracyGrid {
    pub bbox: Rect,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub lambda_ladder: Vec<f64>,
    pub big_lambda_ladder: Vec<f64>,
    pub quotient_opts: QuotientOpts,
    pub d_quot: Vec<f64>,
    pub s_quot: Vec<f64>,
    /// Index of the largest λ with `d_quot ≥ λ`, before the one-cell closure.
    pub raw_o_level: Vec<Option<u8>>,
    /// Index of the smallest Λ with `s_quot ≥ 1/Λ`, before the one-cell closure.
    pub raw_v_level: Vec<Option<u8>>,
    /// Levels after eroding the elliptic sets by one cell (equivalently, closing 𝒟̂ and 𝒮̂).
    pub o_level: Vec<Option<u8>>,
    pub v_level: Vec<Option<u8>>,
    pub in_d: Vec<bool>,
    pub in_s: Vec<bool>,
    pub dist_ds: Vec<f64>,
    pub dist_d: Vec<f64>,
    pub dist_s: Vec<f64>,
}

/// Worst-case result of the empty-interior checks.
#[derive(Clone, Debug, Serialize)]
pub struct EmptyInteriorReport {
    pub radius: f64,
    /// Center of a disk made only of 𝒟̂∖𝒮̂ nodes, if any.
    pub d_minus_s: Option<Vec2>,
    /// Center of a disk made only of 𝒮̂∖𝒟̂ nodes, if any.
    pub s_minus_d: Option<Vec2>,
}

impl EmptyInteriorReport {
    pub fn passes(&self) -> bool {
        self.d_minus_s.is_none() && self.s_minus_d.is_none()
    }
}

fn erode(raw: &[Option<u8>], nx: usize, ny: usize) -> Vec<Option<u8>> {
    let worst = |a: Option<u8>, b: Option<u8>| match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    };
    (0..nx * ny)
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            let mut l = raw[k];
            if i > 0 {
                l = worst(l, raw[k - ny]);
            }
            if i + 1 < nx {
                l = worst(l, raw[k + ny]);
            }
            if j > 0 {
                l = worst(l, raw[k - 1]);
            }
            if j + 1 < ny {
                l = worst(l, raw[k + 1]);
            }
            l
        })
        .collect()
}

/// Relative tolerance when comparing sampled quotients with ladder values.
pub const LADDER_RTOL: f64 = 1e-9;

/// Classifies every lattice node by thresholding sampled quotients against the ladders.
pub fn classify_grid(field: &Field, spec: &GridSpec) -> Result<DegeneracyGrid> {
    spec.validate()?;
    let (nx, ny) = spec.dims();
    let probes = spec.quotients.probes();
    let node = |k: usize| spec.bbox.min + Vec2::new((k / ny) as f64 * spec.h, (k % ny) as f64 * spec.h);
    let q: Vec<_> = (0..nx * ny).into_par_iter().map(|k| quotients_with(field, node(k), &probes)).collect();
    let d_quot: Vec<f64> = q.iter().map(|x| x.d_quot).collect();
    let s_quot: Vec<f64> = q.iter().map(|x| x.s_quot).collect();
    let raw_o_level: Vec<Option<u8>> = d_quot
        .iter()
        .map(|&d| spec.lambda_ladder.iter().position(|&l| d >= l * (1.0 - LADDER_RTOL)).map(|p| p as u8))
        .collect();
    let raw_v_level: Vec<Option<u8>> = s_quot
        .iter()
        .map(|&s| spec.big_lambda_ladder.iter().position(|&bl| s >= (1.0 - LADDER_RTOL) / bl).map(|p| p as u8))
        .collect();
    DegeneracyGrid::assemble(spec, nx, ny, d_quot, s_quot, raw_o_level, raw_v_level)
}

impl DegeneracyGrid {
    fn assemble(
        spec: &GridSpec,
        nx: usize,
        ny: usize,
        d_quot: Vec<f64>,
        s_quot: Vec<f64>,
        raw_o_level: Vec<Option<u8>>,
        raw_v_level: Vec<Option<u8>>,
    ) -> Result<Self> {
        let o_level = erode(&raw_o_level, nx, ny);
        let v_level = erode(&raw_v_level, nx, ny);
        let in_d: Vec<bool> = o_level.iter().map(Option::is_none).collect();
        let in_s: Vec<bool> = v_level.iter().map(Option::is_none).collect();
        let ds: Vec<bool> = in_d.iter().zip(&in_s).map(|(a, b)| *a && *b).collect();
        Ok(DegeneracyGrid {
            bbox: spec.bbox,
            h: spec.h,
            nx,
            ny,
            lambda_ladder: spec.lambda_ladder.clone(),
            big_lambda_ladder: spec.big_lambda_ladder.clone(),
            quotient_opts: spec.quotients.clone(),
            dist_ds: distance_transform(&ds, nx, ny, spec.h),
            dist_d: distance_transform(&in_d, nx, ny, spec.h),
            dist_s: distance_transform(&in_s, nx, ny, spec.h),
            d_quot,
            s_quot,
            raw_o_level,
            raw_v_level,
            o_level,
            v_level,
            in_d,
            in_s,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn node(&self, k: usize) -> Vec2 {
        self.bbox.min + Vec2::new((k / self.ny) as f64 * self.h, (k % self.ny) as f64 * self.h)
    }

    /// Nearest node index, if `p` lies in the box.
    pub fn nearest(&self, p: Vec2) -> Option<usize> {
        if !self.bbox.contains(p) {
            return None;
        }
        let i = (((p.x - self.bbox.min.x) / self.h).round() as usize).min(self.nx - 1);
        let j = (((p.y - self.bbox.min.y) / self.h).round() as usize).min(self.ny - 1);
        Some(self.index(i, j))
    }

    pub fn neighbors4(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = (k / self.ny, k % self.ny);
        let mut out = [usize::MAX; 4];
        if i > 0 {
            out[0] = k - self.ny;
        }
        if i + 1 < self.nx {
            out[1] = k + self.ny;
        }
        if j > 0 {
            out[2] = k - 1;
        }
        if j + 1 < self.ny {
            out[3] = k + 1;
        }
        out.into_iter().filter(|&x| x != usize::MAX)
    }

    pub fn in_ds(&self, k: usize) -> bool {
        self.in_d[k] && self.in_s[k]
    }

    pub fn raw_in_d(&self, k: usize) -> bool {
        self.raw_o_level[k].is_none()
    }

    pub fn raw_in_s(&self, k: usize) -> bool {
        self.raw_v_level[k].is_none()
    }

    /// Largest ladder λ whose Ô contains node `k`, or 0.
    pub fn lambda_at(&self, k: usize) -> f64 {
        self.o_level[k].map_or(0.0, |l| self.lambda_ladder[l as usize])
    }

    /// Smallest ladder Λ whose V̂ contains node `k`, or `+∞`.
    pub fn big_lambda_at(&self, k: usize) -> f64 {
        self.v_level[k].map_or(f64::INFINITY, |l| self.big_lambda_ladder[l as usize])
    }

    /// Node `k` belongs to `Ô_λ` (closure-adjusted labels).
    pub fn in_o(&self, k: usize, lambda: f64) -> bool {
        self.lambda_at(k) >= lambda
    }

    /// Node `k` belongs to `V̂_Λ` (closure-adjusted labels).
    pub fn in_v(&self, k: usize, big_lambda: f64) -> bool {
        self.big_lambda_at(k) <= big_lambda
    }

    pub fn class_mask(&self, class: ClassLabel) -> Vec<bool> {
        match class {
            ClassLabel::D => self.in_d.clone(),
            ClassLabel::S => self.in_s.clone(),
            ClassLabel::DAndS => (0..self.len()).map(|k| self.in_ds(k)).collect(),
        }
    }

    pub fn class_nodes(&self, class: ClassLabel) -> Vec<Vec2> {
        let m = self.class_mask(class);
        (0..self.len()).filter(|&k| m[k]).map(|k| self.node(k)).collect()
    }

    pub fn is_class_empty(&self, class: ClassLabel) -> bool {
        !self.class_mask(class).iter().any(|&b| b)
    }

    pub fn distances(&self, class: ClassLabel) -> &[f64] {
        match class {
            ClassLabel::D => &self.dist_d,
            ClassLabel::S => &self.dist_s,
            ClassLabel::DAndS => &self.dist_ds,
        }
    }

    /// Bilinear interpolation of the distance to `class`; `+∞` for an empty class.
    pub fn dist_to_class(&self, p: Vec2, class: ClassLabel) -> Result<f64> {
        if !p.is_finite() || !self.bbox.contains(p) {
            return Err(Error::OutOfRegion(p));
        }
        let d = self.distances(class);
        let fx = ((p.x - self.bbox.min.x) / self.h).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p.y - self.bbox.min.y) / self.h).clamp(0.0, (self.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let j0 = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let i1 = (i0 + 1).min(self.nx - 1);
        let j1 = (j0 + 1).min(self.ny - 1);
        let tx = (fx - i0 as f64).clamp(0.0, 1.0);
        let ty = (fy - j0 as f64).clamp(0.0, 1.0);
        let v = |i: usize, j: usize| d[self.index(i, j)];
        let (a, b, c, e) = (v(i0, j0), v(i1, j0), v(i0, j1), v(i1, j1));
        if [a, b, c, e].iter().any(|x| x.is_infinite()) {
            return Ok(f64::INFINITY);
        }
        Ok((1.0 - tx) * (1.0 - ty) * a + tx * (1.0 - ty) * b + (1.0 - tx) * ty * c + tx * ty * e)
    }

    /// True when `B̄_r(0)` lies in the grid box.
    pub fn covers_ball(&self, r: f64) -> bool {
        self.bbox.contains_disk(Vec2::ZERO, r)
    }

    /// Looks for disks of radius `radius_cells·h`, fully inside the box, made only of
    /// 𝒟̂∖𝒮̂ nodes or only of 𝒮̂∖𝒟̂ nodes.
    pub fn empty_interior_check(&self, radius_cells: f64) -> EmptyInteriorReport {
        let r = radius_cells * self.h;
        let find = |mask: Vec<bool>| {
            let comp: Vec<bool> = mask.iter().map(|m| !m).collect();
            let d = distance_transform(&comp, self.nx, self.ny, self.h);
            (0..self.len())
                .filter(|&k| mask[k] && d[k] > r * (1.0 + 1e-9) && self.bbox.contains_disk(self.node(k), r))
                .max_by(|&a, &b| d[a].total_cmp(&d[b]))
                .map(|k| self.node(k))
        };
        let dms: Vec<bool> = (0..self.len()).map(|k| self.in_d[k] && !self.in_s[k]).collect();
        let smd: Vec<bool> = (0..self.len()).map(|k| self.in_s[k] && !self.in_d[k]).collect();
        EmptyInteriorReport { radius: r, d_minus_s: find(dms), s_minus_d: find(smd) }
    }

    /// Writes `header.json` plus one CSV matrix per channel (row `i`, column `j`).
    pub fn write(&self, dir: &Path) -> Result<()> {
        let header = GridHeader {
            bbox: [self.bbox.min.x, self.bbox.max.x, self.bbox.min.y, self.bbox.max.y],
            h_grid: self.h,
            nx: self.nx,
            ny: self.ny,
            lambda_ladder: self.lambda_ladder.clone(),
            big_lambda_ladder: self.big_lambda_ladder.clone(),
            radii: self.quotient_opts.radii.clone(),
            n_directions: self.quotient_opts.n_directions,
            ds_empty: self.is_class_empty(ClassLabel::DAndS),
            d_count: self.in_d.iter().filter(|b| **b).count(),
            s_count: self.in_s.iter().filter(|b| **b).count(),
            ds_count: (0..self.len()).filter(|&k| self.in_ds(k)).count(),
        };
        write_json(&dir.join("header.json"), &header)?;
        let lvl = |v: &Option<u8>| v.map_or(-1.0, |x| x as f64);
        let flag = |b: &bool| if *b { 1.0 } else { 0.0 };
        let channels: [(&str, Vec<f64>); 9] = [
            ("d_quot", self.d_quot.clone()),
            ("s_quot", self.s_quot.clone()),
            ("raw_o_level", self.raw_o_level.iter().map(lvl).collect()),
            ("raw_v_level", self.raw_v_level.iter().map(lvl).collect()),
            ("o_level", self.o_level.iter().map(lvl).collect()),
            ("v_level", self.v_level.iter().map(lvl).collect()),
            ("in_d", self.in_d.iter().map(flag).collect()),
            ("in_s", self.in_s.iter().map(flag).collect()),
            ("dist_ds", self.dist_ds.clone()),
        ];
        for (name, data) in channels {
            let rows = data.chunks(self.ny).map(|c| c.to_vec());
            write_csv(&dir.join(format!("{name}.csv")), None, rows)?;
        }
        Ok(())
    }

    /// Reads a grid written by [`DegeneracyGrid::write`]; derived channels are recomputed.
    pub fn read(dir: &Path) -> Result<Self> {
        let header: GridHeader = serde_json::from_str(&std::fs::read_to_string(dir.join("header.json"))?)?;
        let load = |name: &str| -> Result<Vec<f64>> {
            let text = std::fs::read_to_string(dir.join(format!("{name}.csv")))?;
            let m = parse_csv(&text).map_err(|e| Error::InvalidParameter(format!("{name}.csv: {e}")))?;
            let flat: Vec<f64> = m.into_iter().flatten().collect();
            if flat.len() != header.nx * header.ny {
                return Err(Error::InvalidParameter(format!("{name}.csv has the wrong size")));
            }
            Ok(flat)
        };
        let lvl = |v: Vec<f64>| v.into_iter().map(|x| if x < 0.0 { None } else { Some(x as u8) }).collect();
        let spec = GridSpec {
            bbox: Rect::new(header.bbox[0], header.bbox[1], header.bbox[2], header.bbox[3]),
            h: header.h_grid,
            lambda_ladder: header.lambda_ladder.clone(),
            big_lambda_ladder: header.big_lambda_ladder.clone(),
            quotients: QuotientOpts { radii: header.radii.clone(), n_directions: header.n_directions },
        };
        DegeneracyGrid::assemble(
            &spec,
            header.nx,
            header.ny,
            load("d_quot")?,
            load("s_quot")?,
            lvl(load("raw_o_level")?),
            lvl(load("raw_v_level")?),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    h_grid: f64,
    nx: usize,
    ny: usize,
    lambda_ladder: Vec<f64>,
    #[serde(rename = "Lambda_ladder")]
    big_lambda_ladder: Vec<f64>,
    radii: Vec<f64>,
    n_directions: usize,
    ds_empty: bool,
    d_count: usize,
    s_count: usize,
    ds_count: usize,
}

/// Symmetric Hausdorff distance between finite point sets (`+∞` if exactly one is empty).
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one = |x: &[Vec2], y: &[Vec2]| {
        x.par_iter()
            .map(|p| y.iter().map(|q| (*p - *q).norm2()).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
            .sqrt()
    };
    one(a, b).max(one(b, a))
}
