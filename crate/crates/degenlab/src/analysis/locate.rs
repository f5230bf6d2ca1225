use crate::geom::{signed_area, Vec2};
use crate::mesh::Mesh;

/// Uniform bucket grid over the mesh bounding box for point location.
pub(crate) struct Locator {
    min: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub(crate) fn new(mesh: &Mesh) -> Self {
        let (mut min, mut max) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for v in &mesh.vertices {
            min = Vec2::new(min.x.min(v.x), min.y.min(v.y));
            max = Vec2::new(max.x.max(v.x), max.y.max(v.y));
        }
        let cell = mesh.h.max(1e-12);
        let nx = ((max.x - min.x) / cell).ceil() as usize + 1;
        let ny = ((max.y - min.y) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.n_triangles() {
            let v = mesh.tri_vertices(t);
            let lo = |a: f64, b: f64, c: f64| a.min(b).min(c);
            let hi = |a: f64, b: f64, c: f64| a.max(b).max(c);
            let i0 = ((lo(v[0].x, v[1].x, v[2].x) - min.x) / cell) as usize;
            let i1 = ((hi(v[0].x, v[1].x, v[2].x) - min.x) / cell) as usize;
            let j0 = ((lo(v[0].y, v[1].y, v[2].y) - min.y) / cell) as usize;
            let j1 = ((hi(v[0].y, v[1].y, v[2].y) - min.y) / cell) as usize;
            for i in i0..=i1.min(nx - 1) {
                for j in j0..=j1.min(ny - 1) {
                    buckets[i * ny + j].push(t);
                }
            }
        }
        Locator { min, cell, nx, ny, buckets }
    }

    /// Lowest-index triangle containing `p` (boundary inclusive).
    pub(crate) fn locate(&self, mesh: &Mesh, p: Vec2) -> Option<usize> {
        let fi = (p.x - self.min.x) / self.cell;
        let fj = (p.y - self.min.y) / self.cell;
        if !(fi >= 0.0 && fj >= 0.0) {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        if i >= self.nx || j >= self.ny {
            return None;
        }
        self.buckets[i * self.ny + j].iter().copied().find(|&t| {
            let [a, b, c] = mesh.tri_vertices(t);
            let tol = -1e-12 * mesh.geom[t].area;
            signed_area(a, b, p) >= tol && signed_area(b, c, p) >= tol && signed_area(c, a, p) >= tol
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    #[test]
    fn locates_centroids() {
        let mesh = build_mesh(Domain::Disk { radius: 1.0 }, 0.2).unwrap();
        let loc = Locator::new(&mesh);
        for t in 0..mesh.n_triangles() {
            assert_eq!(loc.locate(&mesh, mesh.centroid(t)), Some(t));
        }
        assert_eq!(loc.locate(&mesh, Vec2::new(2.0, 0.0)), None);
    }
}
