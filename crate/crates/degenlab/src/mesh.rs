//! Ring meshes of disks and annuli with P1 element geometry.

use crate::error::{Error, Result};
use crate::geom::{signed_area, Vec2};
use crate::io::{write_csv, write_json};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

/// Computational domain centered at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Domain {
    Disk { radius: f64 },
    Annulus { r_in: f64, r_out: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Disk { radius } if radius > 0.0 && radius.is_finite() => Ok(()),
            Domain::Annulus { r_in, r_out } if r_in > 0.0 && r_out > r_in && r_out.is_finite() => Ok(()),
            _ => Err(Error::InvalidParameter(format!("invalid domain {self:?}"))),
        }
    }

    pub fn width(&self) -> f64 {
        match *self {
            Domain::Disk { radius } => 2.0 * radius,
            Domain::Annulus { r_in, r_out } => r_out - r_in,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        match *self {
            Domain::Disk { radius } => radius,
            Domain::Annulus { r_out, .. } => r_out,
        }
    }
}

/// Area and hat-function gradients of one triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriGeom {
    pub area: f64,
    pub grads: [Vec2; 3],
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub domain: Domain,
    pub vertices: Vec<Vec2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub is_boundary: Vec<bool>,
    pub boundary_vertices: Vec<usize>,
    /// Longest edge.
    pub h: f64,
    pub geom: Vec<TriGeom>,
    /// Vertex count of the outermost ring.
    pub outer_ring: usize,
}

fn ring(r: f64, m: usize) -> impl Iterator<Item = Vec2> {
    (0..m).map(move |j| Vec2::polar(r, TAU * j as f64 / m as f64))
}

/// Triangulates the band between two rings of vertex indices starting at angle 0.
fn zipper(a: &[usize], b: &[usize], verts: &[Vec2], tris: &mut Vec<[usize; 3]>) {
    let (ma, mb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < ma || j < mb {
        let na = if i < ma { (i + 1) as f64 / ma as f64 } else { f64::INFINITY };
        let nb = if j < mb { (j + 1) as f64 / mb as f64 } else { f64::INFINITY };
        let t = if na <= nb {
            let t = [a[i % ma], a[(i + 1) % ma], b[j % mb]];
            i += 1;
            t
        } else {
            let t = [a[i % ma], b[j % mb], b[(j + 1) % mb]];
            j += 1;
            t
        };
        tris.push(orient(t, verts));
    }
}

fn orient(t: [usize; 3], v: &[Vec2]) -> [usize; 3] {
    if signed_area(v[t[0]], v[t[1]], v[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn assemble(domain: Domain, radii: &[f64], counts: &[usize], center: bool) -> Mesh {
    let mut vertices = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::new();
    if center {
        vertices.push(Vec2::ZERO);
    }
    for (&r, &m) in radii.iter().zip(counts) {
        let start = vertices.len();
        vertices.extend(ring(r, m));
        rings.push((start..start + m).collect());
    }
    let mut triangles = Vec::new();
    if center {
        let first = &rings[0];
        for j in 0..first.len() {
            triangles.push(orient([0, first[j], first[(j + 1) % first.len()]], &vertices));
        }
    }
    for w in rings.windows(2) {
        zipper(&w[0], &w[1], &vertices, &mut triangles);
    }
    let mut is_boundary = vec![false; vertices.len()];
    let mut boundary_rings = vec![rings.len() - 1];
    if !center {
        boundary_rings.push(0);
    }
    for &k in &boundary_rings {
        for &v in &rings[k] {
            is_boundary[v] = true;
        }
    }
    let boundary_vertices = (0..vertices.len()).filter(|&v| is_boundary[v]).collect();
    let geom = triangles.iter().map(|t| tri_geom(&vertices, t)).collect();
    let mut mesh = Mesh {
        domain,
        vertices,
        triangles,
        is_boundary,
        boundary_vertices,
        h: 0.0,
        geom,
        outer_ring: *counts.last().unwrap(),
    };
    mesh.h = mesh.max_edge();
    mesh
}

fn tri_geom(v: &[Vec2], t: &[usize; 3]) -> TriGeom {
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    let area = signed_area(a, b, c);
    let s = 1.0 / (2.0 * area);
    TriGeom { area, grads: [(c - b).rot90() * s, (a - c).rot90() * s, (b - a).rot90() * s] }
}

/// Deterministic ring mesh with longest edge at most `h_target`.
pub fn build_mesh(domain: Domain, h_target: f64) -> Result<Mesh> {
    domain.validate()?;
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::InvalidParameter("mesh size must be positive".into()));
    }
    if h_target > domain.width() {
        return Err(Error::InvalidParameter(format!(
            "mesh size {h_target} exceeds the domain width {}",
            domain.width()
        )));
    }
    let (lo, span) = match domain {
        Domain::Disk { radius } => (0.0, radius),
        Domain::Annulus { r_in, r_out } => (r_in, r_out - r_in),
    };
    let mut n = (span / h_target).ceil().max(1.0) as usize;
    loop {
        let dr = span / n as f64;
        let mesh = match domain {
            Domain::Disk { .. } => {
                let radii: Vec<f64> = (1..=n).map(|k| k as f64 * dr).collect();
                let counts: Vec<usize> = (1..=n).map(|k| 6 * k).collect();
                assemble(domain, &radii, &counts, true)
            }
            Domain::Annulus { .. } => {
                let radii: Vec<f64> = (0..=n).map(|k| lo + k as f64 * dr).collect();
                let counts: Vec<usize> = radii.iter().map(|r| ((TAU * r / dr).ceil() as usize).max(6)).collect();
                assemble(domain, &radii, &counts, false)
            }
        };
        if mesh.h <= h_target {
            return Ok(mesh);
        }
        n += 1;
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn max_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    pub fn tri_vertices(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Total area of the polygonal domain.
    pub fn area(&self) -> f64 {
        self.geom.iter().map(|g| g.area).sum()
    }

    /// Radius of the largest origin-centered disk inside the polygonal outer boundary.
    pub fn inscribed_radius(&self) -> f64 {
        self.domain.outer_radius() * (std::f64::consts::PI / self.outer_ring as f64).cos()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.vertices.iter().map(|&v| f(v)).collect()
    }

    /// Gradient of the P1 function with nodal values `u` on triangle `t`.
    pub fn cell_gradient(&self, u: &[f64], t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        let g = &self.geom[t].grads;
        g[0] * u[a] + g[1] * u[b] + g[2] * u[c]
    }

    pub fn cell_gradients(&self, u: &[f64]) -> Vec<Vec2> {
        (0..self.n_triangles()).map(|t| self.cell_gradient(u, t)).collect()
    }

    /// Graph distance (in edges) from every vertex to the boundary.
    pub fn boundary_hops(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut d = vec![usize::MAX; self.n_vertices()];
        let mut queue = std::collections::VecDeque::new();
        for &b in &self.boundary_vertices {
            d[b] = 0;
            queue.push_back(b);
        }
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if d[w] == usize::MAX {
                    d[w] = d[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        d
    }

    /// Sorted vertex neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.n_vertices()];
        for (k, t) in self.triangles.iter().enumerate() {
            for &v in t {
                vt[v].push(k);
            }
        }
        vt
    }

    /// Writes `mesh.json`, `vertices.csv` and `triangles.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Header {
            domain: Domain,
            h: f64,
            n_vertices: usize,
            n_triangles: usize,
            n_boundary: usize,
        }
        write_json(
            &dir.join("mesh.json"),
            &Header {
                domain: self.domain,
                h: self.h,
                n_vertices: self.n_vertices(),
                n_triangles: self.n_triangles(),
                n_boundary: self.boundary_vertices.len(),
            },
        )?;
        write_csv(
            &dir.join("vertices.csv"),
            Some(&["x", "y", "boundary"]),
            self.vertices
                .iter()
                .zip(&self.is_boundary)
                .map(|(v, b)| [v.x, v.y, if *b { 1.0 } else { 0.0 }]),
        )?;
        write_csv(
            &dir.join("triangles.csv"),
            Some(&["a", "b", "c"]),
            self.triangles.iter().map(|t| t.map(|v| v as f64)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn check_valid(m: &Mesh) {
        assert!(m.geom.iter().all(|g| g.area > 0.0));
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                *edges.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        // conforming: every directed edge once; interior edges appear in both directions
        assert!(edges.values().all(|&c| c == 1));
        let mut boundary_edges = 0;
        for &(a, b) in edges.keys() {
            if !edges.contains_key(&(b, a)) {
                boundary_edges += 1;
                assert!(m.is_boundary[a] && m.is_boundary[b]);
            }
        }
        assert_eq!(boundary_edges, m.boundary_vertices.len());
        let n_edges = (edges.len() + boundary_edges) / 2;
        let euler = m.n_vertices() as i64 - n_edges as i64 + m.n_triangles() as i64;
        let expected = match m.domain {
            Domain::Disk { .. } => 1,
            Domain::Annulus { .. } => 0,
        };
        assert_eq!(euler, expected);
    }

    #[test]
    fn coarse_disk() {
        let m = build_mesh(Domain::Disk { radius: 1.0 }, 0.5).unwrap();
        assert!(m.n_vertices() >= 13);
        assert!(m.h <= 0.5);
        check_valid(&m);
    }

    #[test]
    fn annulus_boundary_radii() {
        let m = build_mesh(Domain::Annulus { r_in: 0.5, r_out: 1.0 }, 0.1).unwrap();
        check_valid(&m);
        for &b in &m.boundary_vertices {
            let r = m.vertices[b].norm();
            assert!((r - 0.5).abs() < 1e-3 || (r - 1.0).abs() < 1e-3);
        }
        assert!(m.h <= 0.1);
    }

    #[test]
    fn refinement_quadruples_vertices() {
        let counts: Vec<usize> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| build_mesh(Domain::Disk { radius: 1.0 }, h).unwrap().n_vertices())
            .collect();
        for w in counts.windows(2) {
            let r = w[1] as f64 / w[0] as f64;
            assert!((3.0..5.0).contains(&r), "{counts:?}");
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_mesh(Domain::Disk { radius: 1.0 }, 3.0).is_err());
        assert!(build_mesh(Domain::Annulus { r_in: 0.5, r_out: 1.0 }, 0.6).is_err());
        assert!(build_mesh(Domain::Annulus { r_in: 1.0, r_out: 0.5 }, 0.1).is_err());
        assert!(build_mesh(Domain::Disk { radius: 1.0 }, -0.1).is_err());
    }

    #[test]
    fn deterministic_and_gradients_exact() {
        let a = build_mesh(Domain::Disk { radius: 1.0 }, 0.2).unwrap();
        let b = build_mesh(Domain::Disk { radius: 1.0 }, 0.2).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.triangles, b.triangles);
        let p = Vec2::new(0.7, -1.3);
        let u = a.interpolate(|x| p.dot(x) + 2.0);
        for g in a.cell_gradients(&u) {
            assert!((g - p).norm() < 1e-12);
        }
        let area = a.area();
        assert!((area - std::f64::consts::PI).abs() < 0.05);
    }
}
