//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use degenlab::analysis::{component_bound, connected_components, sv_suite};
use degenlab::barrier::{barrier_constants, barrier_k, barrier_matrix, margin_scan, square_nodes, subsolution_check};
use degenlab::field::sampling::sample_points;
use degenlab::field::{
    classify_grid, dual_field, duality_residuals, grid_image_duality, hausdorff, make_builtin, BuiltinSpec, ClassLabel,
    DegeneracyGrid, DualOpts, Field, GridSpec, RadialPiece,
};
use degenlab::mesh::{build_mesh, Domain};
use degenlab::regularize::{modify_at_infinity, modulus_comparison, mollify, verify_regularization, VerifyOpts};
use degenlab::solve::{residual, solve, BoundaryData, SolveOpts};
use degenlab::{Rect, Vec2};
use degenlab_cli::{run_scenario, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

/// `k(λ)` evaluated to 50 digits.
const K_REFERENCE: [f64; 4] = [
    1102.5488170907281133906863062431816724497622756666,
    331.16862443496911456090317148872902366604067027519,
    131.86651818838306216933997971706478882809631692446,
    51.479921568325905514643942877597069515748923135227,
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Most negative eigenvalue magnitude via the characteristic polynomial, written
/// independently of the library.
fn neg_eig(a: f64, b: f64, d: f64) -> f64 {
    let t = a + d;
    let det = a * d - b * b;
    let disc = (t * t - 4.0 * det).sqrt();
    let lo = if t > 0.0 { 2.0 * det / (t + disc) } else { (t - disc) / 2.0 };
    (-lo).max(0.0)
}

fn builtins() -> Vec<BuiltinSpec> {
    vec![
        BuiltinSpec::Identity,
        BuiltinSpec::IdentityScaled { c: 2.5 },
        BuiltinSpec::PLaplacian { p: 4.0 },
        BuiltinSpec::KinkCircle,
        BuiltinSpec::QuarticQuartroot,
        BuiltinSpec::RadialGradient {
            pieces: vec![RadialPiece { r_lo: 0.0, r_hi: None, a: 0.0, b: 1.0, r0: 0.0, e: 2.0 }],
        },
    ]
}

/// Grid spec used for a builtin: the kink circle needs the short Λ ladder.
fn grid_spec(spec: &BuiltinSpec, half: f64, h: f64) -> GridSpec {
    let s = GridSpec::new(Rect::centered(half), h);
    match spec {
        BuiltinSpec::KinkCircle => {
            let lambda = s.lambda_ladder.clone();
            s.with_ladders(lambda, vec![1.0, 2.0, 4.0])
        }
        _ => s,
    }
}

fn classify(spec: &BuiltinSpec, half: f64, h: f64) -> Result<(Field, DegeneracyGrid), String> {
    let f = make_builtin(spec).map_err(|e| e.to_string())?;
    let g = classify_grid(&f, &grid_spec(spec, half, h)).map_err(|e| e.to_string())?;
    Ok((f, g))
}

fn c1_barrier_constants() -> Outcome {
    let t0 = Instant::now();
    let id = make_builtin(&BuiltinSpec::Identity).map_err(|e| e.to_string())?;
    let mut worst_k: f64 = 0.0;
    let mut worst_eps: f64 = 0.0;
    let mut min_bound = f64::INFINITY;
    for (&l, &k_ref) in LAMBDAS.iter().zip(&K_REFERENCE) {
        let p = barrier_constants(l, 1.0, 1.0).map_err(|e| e.to_string())?;
        worst_k = worst_k.max(rel(p.k, k_ref)).max(rel(barrier_k(l), k_ref));
        worst_eps = worst_eps.max(p.eps_rel_diff);
        for x in square_nodes(64) {
            let a = barrier_matrix(p.k, x.x);
            let neg = neg_eig(a.a, a.b, a.d);
            let bound = l * 40.0 * p.k / neg - neg / l;
            min_bound = min_bound.min(bound);
        }
        let r = subsolution_check(&id, &p, 64, None).map_err(|e| e.to_string())?;
        ensure!(r.bound_positive, "library bound not positive for λ = {l}");
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure!(worst_k <= 1e-12, "k relative error {worst_k:e}");
    ensure!(worst_eps <= 1e-12, "ε forms differ by {worst_eps:e}");
    ensure!(min_bound > 0.0, "bound reaches {min_bound}");
    ensure!(secs < 1.0, "took {secs:.2} s");
    Ok(format!("k rel err {worst_k:.1e}, ε rel diff {worst_eps:.1e}, min bound {min_bound:.3}, {secs:.2} s"))
}

fn c2_margin() -> Outcome {
    let t0 = Instant::now();
    let mut lines = Vec::new();
    for &l in &LAMBDAS {
        let p = barrier_constants(l, 1.0, 1.0).map_err(|e| e.to_string())?;
        let m = margin_scan(&p, 10_000);
        let limit = l * (40.0 * p.k).sqrt();
        ensure!(m.max_neg <= limit, "λ = {l}: max |A⁻| = {} exceeds {limit}", m.max_neg);
        lines.push(format!("λ={l}: max {:.4} ≤ {:.3}, displayed-form gap {:.3}", m.max_neg, limit, m.displayed_discrepancy));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.2} s");
    Ok(lines.join("; "))
}

fn rates(errs: &[(f64, f64)]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect()
}

fn c3_convergence() -> Outcome {
    let t0 = Instant::now();
    let opts = SolveOpts::default();
    let run = |spec: BuiltinSpec, domain: Domain, data: BoundaryData, exact: fn(Vec2) -> f64| -> Result<Vec<f64>, String> {
        let f = make_builtin(&spec).map_err(|e| e.to_string())?;
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let mesh = Arc::new(build_mesh(domain, h).map_err(|e| e.to_string())?);
            let s = solve(&f, mesh.clone(), &data, &opts).map_err(|e| e.to_string())?;
            if !s.diagnostics.converged {
                return Err(format!("{} did not converge at h = {h}", f.name()));
            }
            let e = mesh.vertices.iter().zip(&s.u).map(|(&x, &u)| (u - exact(x)).abs()).fold(0.0, f64::max);
            errs.push((mesh.h, e));
        }
        Ok(rates(&errs))
    };
    let id = run(BuiltinSpec::Identity, Domain::Disk { radius: 1.0 }, BoundaryData::Saddle, |x| x.x * x.x - x.y * x.y)?;
    let pl = run(
        BuiltinSpec::PLaplacian { p: 4.0 },
        Domain::Annulus { r_in: 0.5, r_out: 1.0 },
        BoundaryData::RadialPower { exponent: 2.0 / 3.0 },
        |x| x.norm().powf(2.0 / 3.0),
    )?;
    let secs = t0.elapsed().as_secs_f64();
    ensure!(id.iter().all(|&q| (1.7..=2.3).contains(&q)), "identity rates {id:?}");
    ensure!(pl.iter().all(|&q| q >= 1.5), "p-Laplacian rates {pl:?}");
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("identity rates {id:.2?}, p-Laplacian rates {pl:.2?}, {secs:.1} s"))
}

fn c4_linear_exactness() -> Outcome {
    let mesh = Arc::new(build_mesh(Domain::Disk { radius: 1.0 }, 0.1).map_err(|e| e.to_string())?);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_res: f64 = 0.0;
    let mut worst_err: f64 = 0.0;
    let mut max_its = 0;
    for spec in builtins() {
        let f = make_builtin(&spec).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let p = Vec2::polar(2.0 * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
            let s = solve(&f, mesh.clone(), &BoundaryData::linear(p), &SolveOpts::default()).map_err(|e| e.to_string())?;
            let r = residual(&f, &mesh, &s.u).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let e = mesh.vertices.iter().zip(&s.u).map(|(&x, &u)| (u - p.dot(x)).abs()).fold(0.0, f64::max);
            worst_res = worst_res.max(r);
            worst_err = worst_err.max(e);
            max_its = max_its.max(s.diagnostics.newton_iterations);
            ensure!(s.diagnostics.converged, "{} did not converge for p = {p:?}", f.name());
        }
    }
    ensure!(worst_res <= 1e-10, "residual {worst_res:e}");
    ensure!(worst_err <= 1e-10, "nodal deviation {worst_err:e}");
    ensure!(max_its <= 2, "{max_its} Newton iterations");
    Ok(format!("max residual {worst_res:.1e}, max |u_h − p·x| {worst_err:.1e}, ≤ {max_its} Newton iterations"))
}

fn c5_duality() -> Outcome {
    let mut out = Vec::new();
    let cases = [
        (BuiltinSpec::IdentityScaled { c: 2.5 }, 0.0),
        (BuiltinSpec::PLaplacian { p: 4.0 }, 0.1),
        (BuiltinSpec::QuarticQuartroot, 0.0),
    ];
    for (spec, min_norm) in cases {
        let f = make_builtin(&spec).map_err(|e| e.to_string())?;
        let d = dual_field(&f, &DualOpts::default()).map_err(|e| e.to_string())?;
        let pts: Vec<Vec2> =
            sample_points(&Rect::centered(2.0), 400, 5).into_iter().filter(|p| p.norm() >= min_norm).take(100).collect();
        ensure!(pts.len() == 100, "not enough sample points");
        let worst = duality_residuals(&f, &d, &pts).into_iter().fold(0.0, f64::max);
        ensure!(worst <= 1e-8, "{}: residual {worst:e}", f.name());
        out.push(format!("{} {worst:.1e}", f.name()));
    }
    let h = 0.02;
    let (q, grid) = classify(&BuiltinSpec::QuarticQuartroot, 2.5, h)?;
    let dual = dual_field(&q, &DualOpts { working_box: Some(Rect::centered(1.0)), ..Default::default() }).map_err(|e| e.to_string())?;
    let dual_grid = classify_grid(&dual, &GridSpec::new(Rect::centered(0.6), h)).map_err(|e| e.to_string())?;
    let gd = grid_image_duality(&q, &grid, &dual_grid);
    ensure!(gd.image_nodes > 0 && gd.dual_nodes > 0, "empty sets: {gd:?}");
    ensure!(gd.hausdorff <= 3.0 * h, "grid-image Hausdorff {} > {}", gd.hausdorff, 3.0 * h);
    out.push(format!("grid-image Hausdorff {:.4} ≤ {:.2}", gd.hausdorff, 3.0 * h));
    Ok(out.join(", "))
}

fn c6_geometry() -> Outcome {
    let h = 0.02;
    let (_, quartic) = classify(&BuiltinSpec::QuarticQuartroot, 2.5, h)?;
    let hq = hausdorff(&quartic.class_nodes(ClassLabel::DAndS), &[Vec2::ZERO]);
    ensure!(hq <= 2.0 * h, "quartic 𝒟̂∩𝒮̂ Hausdorff to the origin {hq}");
    let (_, kink) = classify(&BuiltinSpec::KinkCircle, 2.5, h)?;
    let circle: Vec<Vec2> = (0..8000).map(|k| Vec2::polar(1.0, 2.0 * PI * k as f64 / 8000.0)).collect();
    let hk = hausdorff(&kink.class_nodes(ClassLabel::DAndS), &circle);
    ensure!(hk <= 2.0 * h, "kink 𝒟̂∩𝒮̂ Hausdorff to the circle {hk}");
    for spec in builtins() {
        let (f, g) = classify(&spec, 2.5, 0.05)?;
        let ei = g.empty_interior_check(5.0);
        ensure!(ei.passes(), "{}: {ei:?}", f.name());
    }
    Ok(format!("quartic {hq:.4}, kink {hk:.4} (limit {:.2}); empty interiors on {} builtins", 2.0 * h, builtins().len()))
}

fn c7_dichotomy() -> Outcome {
    let rep = sv_suite(100, 7, 1.0).map_err(|e| e.to_string())?;
    ensure!(rep.reports.len() == 100, "ran {} cases", rep.reports.len());
    for (i, r) in rep.reports.iter().enumerate() {
        ensure!(r.hypothesis_met, "case {i}: mass hypothesis not met");
        let threshold = r.m * r.m * r.nu / (512.0 * PI * PI);
        ensure!((r.energy_threshold - threshold).abs() <= 1e-15 * threshold, "case {i}: threshold {}", r.energy_threshold);
        let energy = r.energy >= 0.95 * threshold;
        let circle = r.best_circle_min >= 0.625 * r.m;
        ensure!(energy || circle, "case {i}: neither branch ({r:?})");
    }
    ensure!(rep.violations == 0, "{} violations", rep.violations);
    Ok(format!("100 cases, energy branch {}, circle branch {}, 0 violations", rep.energy_branch, rep.circle_branch))
}

fn c8_components() -> Outcome {
    let m = 1.0;
    let mut kink_k = None;
    let mut worst = 0.0_f64;
    for spec in builtins() {
        let h = if spec == BuiltinSpec::KinkCircle { 0.02 } else { 0.05 };
        let (f, g) = classify(&spec, 2.5, h)?;
        for r in [0.05, 0.1, 0.2] {
            let c = connected_components(&g, r, m).map_err(|e| e.to_string())?;
            let bound = 4.0 * (2.0 * m + r / 2.0).powi(2) / (r * r);
            ensure!((component_bound(m, r) - bound).abs() <= 1e-9 * bound, "bound formula mismatch at r = {r}");
            ensure!((c.count as f64) <= bound, "{} r = {r}: K = {} > {bound}", f.name(), c.count);
            worst = worst.max(c.count as f64 / bound);
            if spec == BuiltinSpec::KinkCircle && r == 0.1 {
                kink_k = Some(c.count);
            }
        }
    }
    ensure!(kink_k == Some(2), "kink circle at r = 0.1 gives K = {kink_k:?}");
    Ok(format!("largest K/bound {worst:.2e}, kink circle K = 2"))
}

fn c9_regularization() -> Outcome {
    let m = 1.5;
    let kink = make_builtin(&BuiltinSpec::KinkCircle).map_err(|e| e.to_string())?;
    let (g, rep) = modify_at_infinity(&kink, m, 1.0).map_err(|e| e.to_string())?;
    ensure!(rep.all_pass(), "modification checks failed: {rep:?}");
    let spec = grid_spec(&BuiltinSpec::KinkCircle, 3.0, 0.05);
    let grid = classify_grid(&g, &spec).map_err(|e| e.to_string())?;
    let ts = [0.1, 0.5, 1.0];
    let pairs = sample_pairs_for_modulus();
    let probe: Vec<Vec2> = (0..60)
        .flat_map(|i| (0..120).map(move |j| Vec2::polar(m * (i as f64 + 0.5) / 60.0, 2.0 * PI * j as f64 / 120.0)))
        .collect();
    let mut sup = Vec::new();
    let mut worst_gap = f64::INFINITY;
    for eps in [0.2, 0.1, 0.05] {
        let (ge, _) = mollify(&g, eps).map_err(|e| e.to_string())?;
        for (t, we, w) in modulus_comparison(&g, &ge, eps, &pairs, &ts) {
            ensure!(we >= w - 1e-8, "ε = {eps}, t = {t}: ω̂_ε = {we} < ω̂ = {w}");
            worst_gap = worst_gap.min(we - w);
        }
        let grid_eps = classify_grid(&ge, &spec).map_err(|e| e.to_string())?;
        let near_circle = move |p: Vec2| (p.norm() - 1.0).abs() <= 2.0 * eps;
        let opts = VerifyOpts { eps, m, ts: ts.to_vec(), n_pairs: 2000, seed: 9 };
        let v = verify_regularization(&g, &ge, &grid, &grid_eps, &opts, Some(&near_circle)).map_err(|e| e.to_string())?;
        for name in ["transfer-lower", "transfer-upper"] {
            let c = v.check(name).ok_or("missing transfer check")?;
            ensure!(c.pass, "ε = {eps}: {name} fails at {:?} (gap {:e})", c.worst_point, c.worst_value);
        }
        sup.push(probe.iter().map(|&p| (ge.eval(p) - g.eval(p)).norm()).fold(0.0, f64::max));
    }
    ensure!(sup.windows(2).all(|w| w[1] < w[0]), "max |G_ε − G| not decreasing: {sup:?}");
    Ok(format!("min ω̂ gap {worst_gap:.2e}, transfer holds off the 2ε band, max |G_ε − G| {sup:.3?}"))
}

fn sample_pairs_for_modulus() -> Vec<(Vec2, Vec2)> {
    degenlab::field::sampling::sample_pairs(&Rect::centered(3.0), 4000, 13)
}

fn bundled_scenarios() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("scenario directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

fn c10_kink_experiment() -> Outcome {
    let t0 = Instant::now();
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/kink_circle.toml");
    let c = ScenarioConfig::load(&file).map_err(|e| e.to_string())?;
    ensure!(c.mesh.h == 0.02, "scenario mesh h is {}", c.mesh.h);
    ensure!(matches!(c.boundary, BoundaryData::Linear { p: [1.3, 0.0], .. }), "boundary data {:?}", c.boundary);
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rep = run_scenario(&c, out.path()).map_err(|e| e.to_string())?;
    ensure!(rep.errors.is_empty(), "stage errors: {:?}", rep.errors);
    let osc = rep.check("profile-oscillation").ok_or("no profile check")?;
    ensure!(osc.pass, "profile oscillation: {}", osc.detail);
    let trend = rep.check("lipschitz-no-increasing-trend").ok_or("no trend check")?;
    ensure!(trend.pass, "Lipschitz trend: {}", trend.detail);
    let n = (0..9).filter(|k| rep.run_dir.join(format!("profiles/center_{k}.csv")).exists()).count();
    ensure!(n == 9, "{n} profile files");
    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 600.0, "took {secs:.0} s");
    Ok(format!(
        "{} flagged centers, max oscillation {}, trend {}, {secs:.1} s",
        osc.detail["flagged_centers"], osc.detail["max_oscillation"], trend.detail["trend"]
    ))
}

fn csv_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c11_reproducibility() -> Outcome {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let scenarios = bundled_scenarios();
    ensure!(scenarios.len() >= 2, "found {} bundled scenarios", scenarios.len());
    for dir in &runs {
        for s in &scenarios {
            let c = ScenarioConfig::load(s).map_err(|e| e.to_string())?;
            run_scenario(&c, dir.path()).map_err(|e| e.to_string())?;
        }
    }
    let a = csv_files(runs[0].path());
    let b = csv_files(runs[1].path());
    ensure!(!a.is_empty(), "no CSV artifacts");
    ensure!(a.keys().eq(b.keys()), "artifact sets differ");
    let differing: Vec<_> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k.clone()).collect();
    ensure!(differing.is_empty(), "differing files: {differing:?}");
    Ok(format!("{} CSV files byte-identical across two runs of {} scenarios", a.len(), scenarios.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("barrier constants", c1_barrier_constants),
        ("|A⁻| margin", c2_margin),
        ("solver convergence", c3_convergence),
        ("exactness of linear solutions", c4_linear_exactness),
        ("duality suite", c5_duality),
        ("degeneracy geometry", c6_geometry),
        ("dichotomy", c7_dichotomy),
        ("connected-component bound", c8_components),
        ("regularization post-conditions", c9_regularization),
        ("kink-circle consistency experiment", c10_kink_experiment),
        ("reproducibility", c11_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS  {name} [{secs:.1} s]: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.1} s]: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
