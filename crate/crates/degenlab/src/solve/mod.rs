//! P1 finite elements for `div G(∇u) = 0` with Dirichlet data, damped Newton
//! with a Picard fallback, ε-sequences, energies and Hessian recovery.

mod hessian;

pub use hessian::{hessian_determinant_check, recover_hessians, HessianCheck, RecoveredHessians};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geom::Vec2;
use crate::io::{write_csv, write_json};
use crate::linsolve::Factorized;
use crate::mesh::Mesh;
use crate::regularize::mollify;
use crate::stats::{mann_kendall, MannKendall};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Dirichlet data as a closed-form family.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryData {
    /// `⟨p, x⟩ + c`
    Linear {
        p: [f64; 2],
        #[serde(default)]
        c: f64,
    },
    /// `x₁² − x₂²`
    Saddle,
    /// `|x|^exponent`
    RadialPower { exponent: f64 },
    /// `⟨p, x⟩ + eps·sin(freq·θ)`
    FlatPerturbed {
        p: [f64; 2],
        eps: f64,
        #[serde(default = "default_freq")]
        freq: f64,
    },
    #[serde(skip)]
    Custom(Arc<dyn Fn(Vec2) -> f64 + Send + Sync>),
}

fn default_freq() -> f64 {
    3.0
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryData::Linear { p, c } => write!(f, "Linear {{ p: {p:?}, c: {c} }}"),
            BoundaryData::Saddle => write!(f, "Saddle"),
            BoundaryData::RadialPower { exponent } => write!(f, "RadialPower {{ exponent: {exponent} }}"),
            BoundaryData::FlatPerturbed { p, eps, freq } => {
                write!(f, "FlatPerturbed {{ p: {p:?}, eps: {eps}, freq: {freq} }}")
            }
            BoundaryData::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl BoundaryData {
    pub fn linear(p: Vec2) -> Self {
        BoundaryData::Linear { p: [p.x, p.y], c: 0.0 }
    }

    pub fn custom(f: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryData::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        match self {
            BoundaryData::Linear { p, c } => p[0] * x.x + p[1] * x.y + c,
            BoundaryData::Saddle => x.x * x.x - x.y * x.y,
            BoundaryData::RadialPower { exponent } => x.norm().powf(*exponent),
            BoundaryData::FlatPerturbed { p, eps, freq } => p[0] * x.x + p[1] * x.y + eps * (freq * x.angle()).sin(),
            BoundaryData::Custom(f) => f(x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            BoundaryData::Linear { p, c } => p.iter().all(|v| v.is_finite()) && c.is_finite(),
            BoundaryData::RadialPower { exponent } => exponent.is_finite() && *exponent >= 0.0,
            BoundaryData::FlatPerturbed { p, eps, freq } => {
                p.iter().all(|v| v.is_finite()) && eps.is_finite() && *eps >= 0.0 && freq.is_finite()
            }
            BoundaryData::Saddle | BoundaryData::Custom(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid boundary data {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOpts {
    /// Max-norm of the assembled residual at convergence.
    pub tol: f64,
    pub max_newton: usize,
    pub max_picard: usize,
    pub armijo_c: f64,
    pub max_halvings: usize,
    /// Newton steps whose accepted length falls below this switch to Picard.
    pub min_step: f64,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts { tol: 1e-10, max_newton: 50, max_picard: 2000, armijo_c: 1e-4, max_halvings: 30, min_step: 1e-6 }
    }
}

impl SolveOpts {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.armijo_c > 0.0 && self.armijo_c < 0.5 && self.min_step > 0.0) {
            return Err(Error::InvalidParameter("solver options out of range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub newton_iterations: usize,
    pub picard_iterations: usize,
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    /// Accepted step length of every iteration (Newton or Picard).
    pub step_lengths: Vec<f64>,
    pub stall: Option<String>,
}

#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub mesh: Arc<Mesh>,
    pub u: Vec<f64>,
    pub grads: Vec<Vec2>,
    pub diagnostics: Diagnostics,
    /// Largest cell-gradient norm.
    pub lipschitz: f64,
}

impl DiscreteSolution {
    pub fn from_values(mesh: Arc<Mesh>, u: Vec<f64>, diagnostics: Diagnostics) -> Self {
        let grads = mesh.cell_gradients(&u);
        let lipschitz = grads.iter().map(|g| g.norm()).fold(0.0, f64::max);
        DiscreteSolution { mesh, u, grads, diagnostics, lipschitz }
    }

    /// Largest gradient norm over cells whose centroid lies in `B_r`.
    pub fn interior_lipschitz(&self, r: f64) -> f64 {
        (0..self.mesh.n_triangles())
            .filter(|&t| self.mesh.centroid(t).norm() <= r)
            .map(|t| self.grads[t].norm())
            .fold(0.0, f64::max)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.mesh.write(dir)?;
        write_csv(&dir.join("u.csv"), Some(&["u"]), self.u.iter().map(|&v| [v]))?;
        write_csv(&dir.join("grad.csv"), Some(&["gx", "gy"]), self.grads.iter().map(|g| [g.x, g.y]))?;
        write_json(&dir.join("diagnostics.json"), &self.diagnostics)
    }
}

struct Dofs {
    /// Interior index of each vertex.
    index: Vec<Option<usize>>,
    n: usize,
}

impl Dofs {
    fn new(mesh: &Mesh) -> Self {
        let mut n = 0;
        let index = mesh
            .is_boundary
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    n += 1;
                    Some(n - 1)
                }
            })
            .collect();
        Dofs { index, n }
    }
}

/// Assembled residual `Σ_T |T|⟨G(∇u_h|_T), ∇φ_v|_T⟩` at every vertex (boundary entries included).
pub fn residual_all(field: &Field, mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    let local: Vec<[f64; 3]> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let g = &mesh.geom[t];
            let flux = field.eval(mesh.cell_gradient(u, t));
            [0, 1, 2].map(|a| g.area * flux.dot(g.grads[a]))
        })
        .collect();
    let mut r = vec![0.0; mesh.n_vertices()];
    for (t, loc) in local.iter().enumerate() {
        for (a, &v) in mesh.triangles[t].iter().enumerate() {
            r[v] += loc[a];
        }
    }
    r
}

/// Residual restricted to interior vertices, in vertex order.
pub fn residual(field: &Field, mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    residual_all(field, mesh, u).into_iter().zip(&mesh.is_boundary).filter(|(_, &b)| !b).map(|(r, _)| r).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn interior_residual(field: &Field, mesh: &Mesh, dofs: &Dofs, u: &[f64]) -> Vec<f64> {
    let all = residual_all(field, mesh, u);
    let mut r = vec![0.0; dofs.n];
    for (v, i) in dofs.index.iter().enumerate() {
        if let Some(i) = i {
            r[*i] = all[v];
        }
    }
    r
}

/// Jacobian triplets over interior unknowns; `None` for the field means the Laplacian.
fn jacobian_triplets(field: Option<&Field>, mesh: &Mesh, dofs: &Dofs, u: &[f64]) -> Vec<(usize, usize, f64)> {
    let symmetrize = field.is_some_and(|f| f.is_gradient());
    let local: Vec<[[f64; 3]; 3]> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let g = &mesh.geom[t];
            let j = match field {
                Some(f) => {
                    let grad = mesh.cell_gradient(u, t);
                    let step = (1e-3 * grad.norm()).max(1e-6);
                    let m = f.jacobian_matrix(grad, step);
                    if symmetrize {
                        m.sym()
                    } else {
                        m
                    }
                }
                None => crate::geom::Mat2::scalar(1.0),
            };
            let mut k = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    k[a][b] = g.area * g.grads[a].dot(j.mul_vec(g.grads[b]));
                }
            }
            k
        })
        .collect();
    let mut trips = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, k) in local.iter().enumerate() {
        let tri = mesh.triangles[t];
        for a in 0..3 {
            let Some(i) = dofs.index[tri[a]] else { continue };
            for b in 0..3 {
                if let Some(j) = dofs.index[tri[b]] {
                    trips.push((i, j, k[a][b]));
                }
            }
        }
    }
    trips
}

fn boundary_values(mesh: &Mesh, data: &BoundaryData) -> Vec<f64> {
    mesh.vertices.iter().zip(&mesh.is_boundary).map(|(&x, &b)| if b { data.eval(x) } else { 0.0 }).collect()
}

fn scatter(u: &mut [f64], dofs: &Dofs, x: &[f64], alpha: f64) {
    for (v, i) in dofs.index.iter().enumerate() {
        if let Some(i) = i {
            u[v] += alpha * x[*i];
        }
    }
}

/// Discrete harmonic extension of the boundary values.
pub fn harmonic_extension(mesh: &Mesh, data: &BoundaryData) -> Result<Vec<f64>> {
    let dofs = Dofs::new(mesh);
    let mut u = boundary_values(mesh, data);
    let lap = Factorized::new(dofs.n, &jacobian_triplets(None, mesh, &dofs, &u))?;
    let r = laplace_residual(mesh, &dofs, &u);
    let x = lap.solve(&r)?;
    scatter(&mut u, &dofs, &x, -1.0);
    Ok(u)
}

fn laplace_residual(mesh: &Mesh, dofs: &Dofs, u: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; dofs.n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = &mesh.geom[t];
        let grad = mesh.cell_gradient(u, t);
        for a in 0..3 {
            if let Some(i) = dofs.index[tri[a]] {
                r[i] += g.area * grad.dot(g.grads[a]);
            }
        }
    }
    r
}

/// Solves `div G(∇u) = 0` with the given Dirichlet data, starting from the
/// discrete harmonic extension. Non-convergence is reported in the diagnostics.
pub fn solve(field: &Field, mesh: Arc<Mesh>, data: &BoundaryData, opts: &SolveOpts) -> Result<DiscreteSolution> {
    data.validate()?;
    opts.validate()?;
    let u0 = harmonic_extension(&mesh, data)?;
    solve_from(field, mesh, u0, opts)
}

/// Same as [`solve`] with an explicit initial iterate carrying the boundary values.
pub fn solve_from(field: &Field, mesh: Arc<Mesh>, mut u: Vec<f64>, opts: &SolveOpts) -> Result<DiscreteSolution> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::InvalidParameter("initial iterate has the wrong length".into()));
    }
    let dofs = Dofs::new(&mesh);
    let mut diag = Diagnostics::default();
    let mut r = interior_residual(field, &mesh, &dofs, &u);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite residual at the initial iterate".into()));
    }
    diag.residual_history.push(max_abs(&r));
    let mut laplacian: Option<Factorized> = None;

    while max_abs(&r) > opts.tol {
        if diag.newton_iterations >= opts.max_newton || diag.picard_iterations >= opts.max_picard {
            diag.stall.get_or_insert_with(|| "iteration budget exhausted".into());
            break;
        }
        match newton_step(field, &mesh, &dofs, &u, &r, opts) {
            Some((alpha, x, r_new)) if alpha >= opts.min_step => {
                scatter(&mut u, &dofs, &x, alpha);
                r = r_new;
                diag.newton_iterations += 1;
                diag.step_lengths.push(alpha);
            }
            _ => {
                if laplacian.is_none() {
                    laplacian = Some(Factorized::new(dofs.n, &jacobian_triplets(None, &mesh, &dofs, &u))?);
                }
                let lap = laplacian.as_ref().unwrap();
                match picard_step(field, &mesh, &dofs, lap, &u, &r, opts)? {
                    Some((alpha, x, r_new)) => {
                        scatter(&mut u, &dofs, &x, alpha);
                        r = r_new;
                        diag.picard_iterations += 1;
                        diag.step_lengths.push(alpha);
                    }
                    None => {
                        diag.stall = Some("no descent step from Newton or Picard".into());
                        break;
                    }
                }
            }
        }
        diag.residual_history.push(max_abs(&r));
    }
    diag.residual_norm = max_abs(&r);
    diag.converged = diag.residual_norm <= opts.tol;
    if diag.converged {
        diag.stall = None;
    }
    Ok(DiscreteSolution::from_values(mesh, u, diag))
}

type Step = (f64, Vec<f64>, Vec<f64>);

fn newton_step(field: &Field, mesh: &Mesh, dofs: &Dofs, u: &[f64], r: &[f64], opts: &SolveOpts) -> Option<Step> {
    let trips = jacobian_triplets(Some(field), mesh, dofs, u);
    let neg: Vec<f64> = r.iter().map(|v| -v).collect();
    let dx = Factorized::new(dofs.n, &trips).ok()?.solve(&neg).ok()?;
    let phi0 = 0.5 * norm2(r);
    let mut alpha = 1.0;
    let mut trial = u.to_vec();
    for _ in 0..=opts.max_halvings {
        trial.copy_from_slice(u);
        scatter(&mut trial, dofs, &dx, alpha);
        let r_new = interior_residual(field, mesh, dofs, &trial);
        // the Newton direction satisfies ∇φ·d = −2φ
        if r_new.iter().all(|v| v.is_finite()) && 0.5 * norm2(&r_new) <= (1.0 - 2.0 * opts.armijo_c * alpha) * phi0 {
            return Some((alpha, dx, r_new));
        }
        alpha *= 0.5;
    }
    None
}

/// Preconditioned Richardson step `−L⁻¹R` with backtracking on `½ Rᵀ L⁻¹ R`.
fn picard_step(
    field: &Field,
    mesh: &Mesh,
    dofs: &Dofs,
    lap: &Factorized,
    u: &[f64],
    r: &[f64],
    opts: &SolveOpts,
) -> Result<Option<Step>> {
    let z = lap.solve(r)?;
    let psi0 = 0.5 * r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
    let dx: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut alpha = 1.0;
    let mut trial = u.to_vec();
    for _ in 0..=opts.max_halvings {
        trial.copy_from_slice(u);
        scatter(&mut trial, dofs, &dx, alpha);
        let r_new = interior_residual(field, mesh, dofs, &trial);
        if r_new.iter().all(|v| v.is_finite()) {
            let z_new = lap.solve(&r_new)?;
            let psi = 0.5 * r_new.iter().zip(&z_new).map(|(a, b)| a * b).sum::<f64>();
            if psi < psi0 {
                return Ok(Some((alpha, dx, r_new)));
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// `Σ_T |T|·F(∇u_h|_T)` for the potential of a gradient field.
pub fn energy(field: &Field, sol: &DiscreteSolution) -> Result<f64> {
    if !field.is_gradient() || !field.has_potential() {
        return Err(Error::Precondition(format!("field {} has no declared potential", field.name())));
    }
    energy_with(|xi| field.potential(xi).unwrap_or(f64::NAN), &sol.mesh, &sol.u)
}

pub fn energy_with(f: impl Fn(Vec2) -> f64, mesh: &Mesh, u: &[f64]) -> Result<f64> {
    let e: f64 = (0..mesh.n_triangles()).map(|t| mesh.geom[t].area * f(mesh.cell_gradient(u, t))).sum();
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Precondition("potential is not finite on the solution".into()))
    }
}

/// Radius of the interior ball on which sequence statistics are taken.
pub const INTERIOR_RADIUS: f64 = 0.75;

#[derive(Clone, Debug, Serialize)]
pub struct SequenceReport {
    pub eps: Vec<f64>,
    /// `max |∇u_ε|` over cells centred in `B_{3/4}`.
    pub interior_lipschitz: Vec<f64>,
    /// `‖u_{ε_i} − u_{ε_{i+1}}‖_{W^{1,2}(B_{3/4})}`.
    pub w12_diffs: Vec<f64>,
    /// Nodal max-norm differences of consecutive solutions.
    pub max_diffs: Vec<f64>,
    pub lipschitz_trend: MannKendall,
    pub converged: Vec<bool>,
}

/// `W^{1,2}` norm of `a − b` over cells centred in `B_r`, with the value taken at centroids.
pub fn w12_difference(mesh: &Mesh, a: &[f64], b: &[f64], r: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.centroid(t).norm() > r {
            continue;
        }
        let tri = mesh.triangles[t];
        let mean = (d[tri[0]] + d[tri[1]] + d[tri[2]]) / 3.0;
        s += mesh.geom[t].area * (mean * mean + mesh.cell_gradient(&d, t).norm2());
    }
    s.sqrt()
}

/// Solves with `G_ε` for every `ε` of a strictly decreasing list. The field is
/// expected to be modified at infinity already.
pub fn solve_sequence(
    field: &Field,
    eps_list: &[f64],
    mesh: Arc<Mesh>,
    data: &BoundaryData,
    opts: &SolveOpts,
) -> Result<(Vec<DiscreteSolution>, SequenceReport)> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("ε list must be nonempty and strictly decreasing".into()));
    }
    let sols: Vec<DiscreteSolution> = eps_list
        .par_iter()
        .map(|&eps| {
            let (g, _) = mollify(field, eps)?;
            solve(&g, mesh.clone(), data, opts)
        })
        .collect::<Result<_>>()?;
    let interior_lipschitz: Vec<f64> = sols.iter().map(|s| s.interior_lipschitz(INTERIOR_RADIUS)).collect();
    let w12_diffs = sols.windows(2).map(|w| w12_difference(&mesh, &w[0].u, &w[1].u, INTERIOR_RADIUS)).collect();
    let max_diffs = sols
        .windows(2)
        .map(|w| w[0].u.iter().zip(&w[1].u).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
        .collect();
    let report = SequenceReport {
        eps: eps_list.to_vec(),
        lipschitz_trend: mann_kendall(&interior_lipschitz, 0.05),
        interior_lipschitz,
        w12_diffs,
        max_diffs,
        converged: sols.iter().map(|s| s.diagnostics.converged).collect(),
    };
    Ok((sols, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_builtin, BuiltinSpec};
    use crate::mesh::{build_mesh, Domain};

    fn disk(h: f64) -> Arc<Mesh> {
        Arc::new(build_mesh(Domain::Disk { radius: 1.0 }, h).unwrap())
    }

    #[test]
    fn linear_data_has_zero_residual() {
        let mesh = disk(0.2);
        for spec in [BuiltinSpec::Identity, BuiltinSpec::PLaplacian { p: 4.0 }, BuiltinSpec::KinkCircle] {
            let f = make_builtin(&spec).unwrap();
            let u = mesh.interpolate(|x| 0.7 * x.x - 1.1 * x.y);
            assert!(max_abs(&residual(&f, &mesh, &u)) < 1e-13);
        }
    }

    #[test]
    fn harmonic_residual_shrinks_with_h() {
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let r: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| {
                let m = disk(h);
                max_abs(&residual(&id, &m, &m.interpolate(|x| x.x * x.x - x.y * x.y)))
            })
            .collect();
        assert!(r[1] < r[0] && r[2] < r[1], "{r:?}");
    }

    #[test]
    fn identity_solution_is_harmonic_extension() {
        let mesh = disk(0.1);
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let s = solve(&id, mesh.clone(), &BoundaryData::Saddle, &SolveOpts::default()).unwrap();
        assert!(s.diagnostics.converged);
        assert!(s.diagnostics.newton_iterations <= 1);
        let err = mesh.vertices.iter().zip(&s.u).map(|(x, u)| (x.x * x.x - x.y * x.y - u).abs()).fold(0.0, f64::max);
        assert!(err < 0.01, "{err}");
    }

    #[test]
    fn plaplacian_converges_on_annulus() {
        let mesh = Arc::new(build_mesh(Domain::Annulus { r_in: 0.5, r_out: 1.0 }, 0.1).unwrap());
        let f = make_builtin(&BuiltinSpec::PLaplacian { p: 4.0 }).unwrap();
        let s = solve(&f, mesh, &BoundaryData::RadialPower { exponent: 2.0 / 3.0 }, &SolveOpts::default()).unwrap();
        assert!(s.diagnostics.converged, "{:?}", s.diagnostics);
        assert!(s.diagnostics.residual_norm <= 1e-10);
    }

    #[test]
    fn picard_fallback_handles_degenerate_start() {
        // zero data on a tilted boundary: u ≡ 0 start gives a zero Jacobian for p = 4
        let mesh = disk(0.2);
        let f = make_builtin(&BuiltinSpec::PLaplacian { p: 4.0 }).unwrap();
        let mut u0 = vec![0.0; mesh.n_vertices()];
        for &b in &mesh.boundary_vertices {
            u0[b] = mesh.vertices[b].x;
        }
        let opts = SolveOpts { tol: 1e-9, ..SolveOpts::default() };
        let s = solve_from(&f, mesh.clone(), u0, &opts).unwrap();
        assert!(s.diagnostics.converged, "{:?}", s.diagnostics);
        assert!(s.diagnostics.picard_iterations >= 1);
    }

    #[test]
    fn energy_of_linear_function() {
        let mesh = disk(0.05);
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let p = Vec2::new(0.6, -0.8);
        let s = solve(&id, mesh, &BoundaryData::linear(p), &SolveOpts::default()).unwrap();
        let e = energy(&id, &s).unwrap();
        assert!((e - std::f64::consts::PI * p.norm2() / 2.0).abs() < 1e-2);
    }

    #[test]
    fn energy_needs_a_potential() {
        let mesh = disk(0.3);
        let f = Field::custom("rot", crate::geom::Rect::centered(4.0), |x| x + x.rot90() * 0.5).unwrap();
        let s = DiscreteSolution::from_values(mesh.clone(), vec![0.0; mesh.n_vertices()], Diagnostics::default());
        assert!(energy(&f, &s).is_err());
    }

    #[test]
    fn identity_sequence_is_constant() {
        let mesh = disk(0.1);
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        let (_, rep) = solve_sequence(&id, &[0.2, 0.1, 0.05], mesh, &BoundaryData::Saddle, &SolveOpts::default()).unwrap();
        assert!(rep.w12_diffs.iter().all(|&d| d <= 1e-8), "{rep:?}");
    }

    #[test]
    fn sequence_rejects_unsorted_eps() {
        let mesh = disk(0.3);
        let id = make_builtin(&BuiltinSpec::Identity).unwrap();
        assert!(solve_sequence(&id, &[0.1, 0.2], mesh, &BoundaryData::Saddle, &SolveOpts::default()).is_err());
    }
}
