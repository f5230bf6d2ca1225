use super::DiscreteSolution;
use crate::geom::{Mat2, Vec2};
use crate::linsolve::{solve_dense, sym_eigenvalues};
use crate::mesh::Mesh;
use rayon::prelude::*;
use serde::Serialize;

/// Per-vertex Hessians; `None` marks a degenerate patch.
#[derive(Clone, Debug)]
pub struct RecoveredHessians {
    pub hessians: Vec<Option<Mat2>>,
    pub skipped: usize,
}

impl RecoveredHessians {
    /// Mean of the vertex Hessians of a triangle, if all three exist.
    pub fn on_triangle(&self, mesh: &Mesh, t: usize) -> Option<Mat2> {
        let [a, b, c] = mesh.triangles[t];
        Some((self.hessians[a]? + self.hessians[b]? + self.hessians[c]?) * (1.0 / 3.0))
    }
}

/// Smallest accepted eigenvalue ratio of the patch normal equations.
const MIN_CONDITION: f64 = 1e-8;

/// Fits `∇u(x) ≈ g₀ + H(x − x_v)` on the vertex patch through the edge relations
/// `u_b − u_a = ⟨∇u(m_e), x_b − x_a⟩`, which hold exactly for quadratics.
pub fn recover_hessians(mesh: &Mesh, u: &[f64]) -> RecoveredHessians {
    let vt = mesh.vertex_triangles();
    let hessians: Vec<Option<Mat2>> = (0..mesh.n_vertices())
        .into_par_iter()
        .map(|v| {
            let x0 = mesh.vertices[v];
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for &t in &vt[v] {
                let tri = mesh.triangles[t];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    edges.push((a.min(b), a.max(b)));
                }
            }
            edges.sort_unstable();
            edges.dedup();
            let scale = edges.iter().map(|&(a, b)| (mesh.vertices[b] - mesh.vertices[a]).norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                return None;
            }
            let mut ata = [0.0; 25];
            let mut atb = [0.0; 5];
            for &(a, b) in &edges {
                let e = (mesh.vertices[b] - mesh.vertices[a]) * (1.0 / scale);
                let w = ((mesh.vertices[a] + mesh.vertices[b]) * 0.5 - x0) * (1.0 / scale);
                let row = [e.x, e.y, e.x * w.x, e.x * w.y + e.y * w.x, e.y * w.y];
                let rhs = (u[b] - u[a]) / scale;
                for i in 0..5 {
                    atb[i] += row[i] * rhs;
                    for j in 0..5 {
                        ata[i * 5 + j] += row[i] * row[j];
                    }
                }
            }
            let eig = sym_eigenvalues(5, &ata)?;
            if edges.len() < 5 || eig[0] <= MIN_CONDITION * eig[4] {
                return None;
            }
            let sol = solve_dense(5, &ata, &atb)?;
            Some(Mat2 { a: sol[2] / scale, b: sol[3] / scale, c: sol[3] / scale, d: sol[4] / scale })
        })
        .collect();
    let skipped = hessians.iter().filter(|h| h.is_none()).count();
    RecoveredHessians { hessians, skipped }
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianCheck {
    pub max_det: f64,
    pub argmax: Option<Vec2>,
    pub checked: usize,
    pub skipped: usize,
}

/// Largest recovered `det D²u` over vertices at least two edges away from the boundary.
pub fn hessian_determinant_check(sol: &DiscreteSolution) -> HessianCheck {
    let mesh = &sol.mesh;
    let rec = recover_hessians(mesh, &sol.u);
    let hops = mesh.boundary_hops();
    let mut out = HessianCheck { max_det: f64::NEG_INFINITY, argmax: None, checked: 0, skipped: 0 };
    for v in 0..mesh.n_vertices() {
        if hops[v] < 2 {
            continue;
        }
        match rec.hessians[v] {
            Some(h) => {
                out.checked += 1;
                if h.det() > out.max_det {
                    out.max_det = h.det();
                    out.argmax = Some(mesh.vertices[v]);
                }
            }
            None => out.skipped += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};
    use crate::solve::Diagnostics;
    use std::sync::Arc;

    #[test]
    fn exact_on_quadratics() {
        let mesh = build_mesh(Domain::Disk { radius: 1.0 }, 0.15).unwrap();
        let u = mesh.interpolate(|x| 1.5 * x.x * x.x - 0.4 * x.x * x.y + 0.3 * x.y * x.y + x.x);
        let rec = recover_hessians(&mesh, &u);
        for (v, h) in rec.hessians.iter().enumerate() {
            assert!(h.is_some() || mesh.is_boundary[v]);
        }
        for h in rec.hessians.iter().flatten() {
            assert!((h.a - 3.0).abs() < 1e-9 && (h.b + 0.4).abs() < 1e-9 && (h.d - 0.6).abs() < 1e-9, "{h:?}");
        }
    }

    #[test]
    fn saddle_determinant() {
        let mesh = Arc::new(build_mesh(Domain::Disk { radius: 1.0 }, 0.1).unwrap());
        let u = mesh.interpolate(|x| x.x * x.x - x.y * x.y);
        let sol = DiscreteSolution::from_values(mesh, u, Diagnostics::default());
        let c = hessian_determinant_check(&sol);
        assert!(c.checked > 0);
        assert!((c.max_det + 4.0).abs() < 1e-8, "{c:?}");
    }

    #[test]
    fn linear_has_zero_determinant() {
        let mesh = Arc::new(build_mesh(Domain::Disk { radius: 1.0 }, 0.2).unwrap());
        let u = mesh.interpolate(|x| 2.0 * x.x - x.y);
        let sol = DiscreteSolution::from_values(mesh, u, Diagnostics::default());
        assert!(hessian_determinant_check(&sol).max_det.abs() < 1e-10);
    }
}
