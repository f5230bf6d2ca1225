//! Scenario pipeline: classification, regularization, ε-sequence solve, analyses.

use crate::config::{ProfilesConfig, ScenarioConfig};
use degenlab::analysis::{
    connected_components, distance_profile, gradient_histogram, lebesgue_profile, sv_suite, GradientField, Region,
};
use degenlab::barrier::{barrier_constants, margin_scan, subsolution_check};
use degenlab::field::sampling::{rng, uniform_point};
use degenlab::field::{classify_grid, make_builtin_on, ClassLabel, DegeneracyGrid, Field, DEFAULT_WORKING_BOX};
use degenlab::io::{write_csv, write_json};
use degenlab::mesh::{build_mesh, Mesh};
use degenlab::regularize::{modify_at_infinity, mollify};
use degenlab::solve::{hessian_determinant_check, solve, solve_sequence, DiscreteSolution};
use degenlab::stats::Trend;
use degenlab::{Disk, Rect, Vec2};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Measurement radius, in grid cells, of the empty-interior checks.
pub const EMPTY_INTERIOR_CELLS: f64 = 5.0;
/// Points of the barrier margin scan.
pub const MARGIN_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Artifact {
    pub request: String,
    /// Relative to the run directory.
    pub path: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorRecord {
    pub request: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub run_dir: PathBuf,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<CheckRecord>,
    pub errors: Vec<ErrorRecord>,
    pub pass: bool,
}

impl RunReport {
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

pub(crate) struct Runner {
    pub dir: PathBuf,
    pub report: RunReport,
}

type StageResult<T> = degenlab::Result<T>;

impl Runner {
    pub(crate) fn new(config: &ScenarioConfig, dir: PathBuf) -> Self {
        let report = RunReport {
            config: config.clone(),
            run_dir: dir.clone(),
            stages: Vec::new(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            errors: Vec::new(),
            pass: false,
        };
        Runner { dir, report }
    }

    pub(crate) fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> StageResult<T>) -> Option<T> {
        let t0 = Instant::now();
        let out = f(self);
        let status = if out.is_ok() { StageStatus::Ok } else { StageStatus::Failed };
        if let Err(e) = &out {
            self.error(name, e.to_string());
        }
        self.report.stages.push(StageRecord { name: name.into(), status, seconds: t0.elapsed().as_secs_f64() });
        out.ok()
    }

    pub(crate) fn skip(&mut self, name: &str, because: &str) {
        self.error(name, format!("skipped: {because} failed"));
        self.report.stages.push(StageRecord { name: name.into(), status: StageStatus::Skipped, seconds: 0.0 });
    }

    pub(crate) fn error(&mut self, request: &str, message: String) {
        self.report.errors.push(ErrorRecord { request: request.into(), message });
    }

    /// Registers an artifact and returns its absolute path.
    pub(crate) fn artifact(&mut self, request: &str, rel: impl Into<PathBuf>) -> PathBuf {
        let rel = rel.into();
        let path = self.dir.join(&rel);
        self.report.artifacts.push(Artifact { request: request.into(), path: rel });
        path
    }

    pub(crate) fn check(&mut self, name: impl Into<String>, pass: bool, detail: serde_json::Value) {
        self.report.checks.push(CheckRecord { name: name.into(), pass, detail });
    }

    pub(crate) fn finish(mut self) -> degenlab::Result<RunReport> {
        self.report.pass = self.report.errors.is_empty() && self.report.checks.iter().all(|c| c.pass);
        write_json(&self.dir.join("report.json"), &self.report)?;
        Ok(self.report)
    }
}

/// Builds the scenario field on a working box large enough for the grid and the scale `M`.
pub fn build_field(config: &ScenarioConfig) -> degenlab::Result<Field> {
    let half = DEFAULT_WORKING_BOX.max(config.grid.half_width + 1.0).max(4.0 * config.m);
    make_builtin_on(&config.field, Rect::centered(half))
}

pub(crate) fn classify_stage(r: &mut Runner, config: &ScenarioConfig, field: &Field) -> Option<DegeneracyGrid> {
    r.stage("classify", |r| {
        let grid = classify_grid(field, &config.grid.spec())?;
        let dir = r.artifact("classify", "grid");
        grid.write(&dir)?;
        let ei = grid.empty_interior_check(EMPTY_INTERIOR_CELLS);
        let count = |c: ClassLabel| grid.class_mask(c).iter().filter(|&&b| b).count();
        let summary = json!({
            "nodes": grid.len(),
            "d_empty": grid.is_class_empty(ClassLabel::D),
            "s_empty": grid.is_class_empty(ClassLabel::S),
            "d_and_s_empty": grid.is_class_empty(ClassLabel::DAndS),
            "d_nodes": count(ClassLabel::D),
            "s_nodes": count(ClassLabel::S),
            "d_and_s_nodes": count(ClassLabel::DAndS),
            "empty_interior": &ei,
        });
        let path = r.artifact("classify", "grid/summary.json");
        write_json(&path, &summary)?;
        r.check("empty-interior", ei.passes(), serde_json::to_value(&ei)?);
        Ok(grid)
    })
}

fn components_stage(r: &mut Runner, config: &ScenarioConfig, grid: &DegeneracyGrid, r_list: &[f64]) {
    r.stage("components", |r| {
        let mut all = Vec::new();
        for &rad in r_list {
            let c = connected_components(grid, rad, config.m)?;
            r.check(format!("component-bound-r{rad}"), c.within_bound, json!({"count": c.count, "bound": c.bound}));
            all.push(c);
        }
        let path = r.artifact("components", "components.json");
        write_json(&path, &all)
    });
}

/// Modification at infinity and the mollified family; returns the modified field.
fn regularize_stage(r: &mut Runner, config: &ScenarioConfig, field: &Field) -> Option<Field> {
    r.stage("regularize", |r| {
        let (gm, rep) = modify_at_infinity(field, config.m, config.regularize.c)?;
        let path = r.artifact("regularize", "regularize/modify.json");
        rep.write(&path)?;
        r.check("modify-at-infinity", rep.all_pass(), serde_json::to_value(&rep.checks)?);
        for (i, &eps) in config.regularize.eps_list.iter().enumerate() {
            let (_, rep) = mollify(&gm, eps)?;
            let path = r.artifact("regularize", format!("regularize/mollify_{i}.json"));
            rep.write(&path)?;
            r.check(format!("mollify-eps{eps}"), rep.all_pass(), serde_json::to_value(&rep.checks)?);
        }
        Ok(gm)
    })
}

/// Returns the final solution and the field it solves.
fn solve_stage(r: &mut Runner, config: &ScenarioConfig, field: &Field, modified: Option<&Field>) -> Option<(Arc<DiscreteSolution>, Field)> {
    r.stage("solve", |r| {
        let mesh = Arc::new(build_mesh(config.mesh.domain, config.mesh.h)?);
        let eps = &config.regularize.eps_list;
        let (sol, final_field) = match modified {
            Some(gm) if !eps.is_empty() => {
                let (sols, rep) = solve_sequence(gm, eps, mesh.clone(), &config.boundary, &config.solver)?;
                for (i, s) in sols.iter().enumerate() {
                    let dir = r.artifact("solve", format!("solutions/eps_{i}"));
                    s.write(&dir)?;
                }
                let path = r.artifact("solve", "sequence.json");
                write_json(&path, &rep)?;
                let path = r.artifact("solve", "sequence.csv");
                let n = rep.eps.len();
                write_csv(
                    &path,
                    Some(&["eps", "interior_lipschitz", "w12_diff_to_next", "max_diff_to_next", "converged"]),
                    (0..n).map(|i| {
                        [
                            rep.eps[i],
                            rep.interior_lipschitz[i],
                            rep.w12_diffs.get(i).copied().unwrap_or(f64::NAN),
                            rep.max_diffs.get(i).copied().unwrap_or(f64::NAN),
                            rep.converged[i] as u8 as f64,
                        ]
                    }),
                )?;
                r.check("solver-converged", rep.converged.iter().all(|&c| c), json!({"converged": rep.converged}));
                r.check(
                    "lipschitz-no-increasing-trend",
                    rep.lipschitz_trend.trend != Trend::Increasing,
                    serde_json::to_value(rep.lipschitz_trend)?,
                );
                let (g_last, _) = mollify(gm, *eps.last().unwrap())?;
                (sols.into_iter().last().unwrap(), g_last)
            }
            _ => {
                let s = solve(field, mesh.clone(), &config.boundary, &config.solver)?;
                let dir = r.artifact("solve", "solutions/direct");
                s.write(&dir)?;
                r.check("solver-converged", s.diagnostics.converged, serde_json::to_value(&s.diagnostics)?);
                (s, field.clone())
            }
        };
        if field.is_gradient() {
            let hc = hessian_determinant_check(&sol);
            let path = r.artifact("solve", "hessian_check.json");
            write_json(&path, &hc)?;
        }
        Ok((Arc::new(sol), final_field))
    })
}

fn convergence_stage(r: &mut Runner, config: &ScenarioConfig, field: &Field) {
    let Some(cc) = &config.analysis.convergence else { return };
    r.stage("convergence", |r| {
        let mut rows = Vec::new();
        for &h in &cc.h_list {
            let mesh = Arc::new(build_mesh(config.mesh.domain, h)?);
            let s = solve(field, mesh.clone(), &config.boundary, &config.solver)?;
            let err = max_nodal_error(&mesh, &s.u, |x| config.boundary.eval(x));
            rows.push([mesh.h, err, s.diagnostics.newton_iterations as f64]);
        }
        let rates: Vec<f64> = rows.windows(2).map(|w| (w[0][1] / w[1][1]).ln() / (w[0][0] / w[1][0]).ln()).collect();
        let path = r.artifact("convergence", "convergence.csv");
        write_csv(&path, Some(&["h", "max_error", "newton_iterations"]), rows.iter().copied())?;
        let pass = rates.iter().all(|&q| q >= cc.rate_min && q <= cc.rate_max);
        r.check("convergence-rate", pass, json!({"rates": rates, "min": cc.rate_min, "max": cc.rate_max}));
        Ok(())
    });
}

pub fn max_nodal_error(mesh: &Mesh, u: &[f64], exact: impl Fn(Vec2) -> f64) -> f64 {
    mesh.vertices.iter().zip(u).map(|(&x, &v)| (v - exact(x)).abs()).fold(0.0, f64::max)
}

/// Seeded centers, uniform in `B_radius`.
pub fn sample_centers(n: usize, radius: f64, seed: u64) -> Vec<Vec2> {
    let mut g = rng(seed);
    let square = Rect::centered(radius);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = uniform_point(&mut g, &square);
        if p.norm() < radius {
            out.push(p);
        }
    }
    out
}

fn profiles_stage(
    r: &mut Runner,
    config: &ScenarioConfig,
    pc: &ProfilesConfig,
    gf: &GradientField,
    grid: &DegeneracyGrid,
    solved: &Field,
) -> Option<Vec<Vec2>> {
    r.stage("profiles", |r| {
        let centers = sample_centers(pc.n_centers, pc.center_radius, config.seed);
        let dual = pc.duality.then(|| {
            let g = solved.clone();
            gf.mapped(move |p| g.eval(p).rot90())
        });
        let mut rows = Vec::new();
        let mut worst = 0.0_f64;
        let mut disagreements = Vec::new();
        for (k, &x0) in centers.iter().enumerate() {
            let lp = lebesgue_profile(gf, x0, &pc.delta_list, None)?;
            let dp = distance_profile(gf, grid, x0, &pc.delta_list, ClassLabel::DAndS)?;
            let path = r.artifact("profiles", format!("profiles/center_{k}.csv"));
            write_csv(
                &path,
                Some(&["delta", "mean_deviation", "dist_ds"]),
                lp.profile.iter().zip(&dp).map(|(&(d, m), &(_, ds))| [d, m, ds]),
            )?;
            let n = dp.len();
            // an empty bad set gives an infinite but constant profile
            let osc = if n < 2 || dp[n - 1].1.is_infinite() { 0.0 } else { (dp[n - 1].1 - dp[n - 2].1).abs() };
            if lp.flagged {
                worst = worst.max(osc);
            }
            let dual_flag = match &dual {
                Some(d) => {
                    let f = lebesgue_profile(d, x0, &pc.delta_list, None)?.flagged;
                    if f != lp.flagged {
                        disagreements.push(k);
                    }
                    f as u8 as f64
                }
                None => f64::NAN,
            };
            rows.push([k as f64, x0.x, x0.y, lp.p.x, lp.p.y, lp.flagged as u8 as f64, osc, dual_flag]);
        }
        let path = r.artifact("profiles", "profiles/centers.csv");
        write_csv(&path, Some(&["center", "x", "y", "px", "py", "flagged", "oscillation", "dual_flagged"]), rows.iter().copied())?;
        let flagged = rows.iter().filter(|row| row[5] == 1.0).count();
        r.check(
            "profile-oscillation",
            worst <= pc.max_oscillation,
            json!({"flagged_centers": flagged, "max_oscillation": worst, "limit": pc.max_oscillation}),
        );
        if dual.is_some() {
            r.check("lebesgue-duality", disagreements.is_empty(), json!({ "disagreeing_centers": disagreements }));
        }
        Ok(centers)
    })
}

fn histogram_stage(r: &mut Runner, config: &ScenarioConfig, gf: &GradientField, centers: &[Vec2]) {
    let (Some(hc), Some(pc)) = (&config.analysis.histograms, &config.analysis.profiles) else { return };
    let delta = *pc.delta_list.last().unwrap();
    r.stage("histograms", |r| {
        let mut warnings = Vec::new();
        for (k, &x0) in centers.iter().enumerate() {
            let h = gradient_histogram(gf, &Region::Ball(Disk::new(x0, delta)), Rect::centered(hc.half_width), hc.bins)?;
            let path = r.artifact("histograms", format!("histograms/center_{k}.csv"));
            h.write_csv(&path)?;
            if h.warning {
                warnings.push(k);
            }
        }
        let path = r.artifact("histograms", "histograms/summary.json");
        write_json(&path, &json!({ "delta": delta, "overflow_warnings": warnings }))
    });
}

fn dichotomy_stage(r: &mut Runner, config: &ScenarioConfig) {
    let Some(dc) = &config.analysis.dichotomy else { return };
    r.stage("dichotomy", |r| {
        let rep = sv_suite(dc.cases, config.seed, 1.0)?;
        let path = r.artifact("dichotomy", "dichotomy.csv");
        write_csv(
            &path,
            Some(&["case", "nu", "energy", "energy_threshold", "energy_branch", "circle_branch", "best_circle_min"]),
            rep.reports.iter().enumerate().map(|(i, s)| {
                [
                    i as f64,
                    s.nu,
                    s.energy,
                    s.energy_threshold,
                    s.energy_branch as u8 as f64,
                    s.circle_branch as u8 as f64,
                    s.best_circle_min,
                ]
            }),
        )?;
        r.check(
            "dichotomy",
            rep.violations == 0,
            json!({"cases": rep.cases, "violations": rep.violations, "energy_branch": rep.energy_branch, "circle_branch": rep.circle_branch}),
        );
        Ok(())
    });
}

fn barrier_stage(r: &mut Runner, config: &ScenarioConfig, field: &Field, grid: Option<&DegeneracyGrid>) {
    for (i, run) in config.analysis.barrier.iter().enumerate() {
        let name = format!("barrier_{i}");
        if run.check_grid && grid.is_none() {
            r.skip(&name, "classify");
            continue;
        }
        r.stage(&name, |r| {
            let p = barrier_constants(run.lambda, run.rho, config.m)?;
            let sub = subsolution_check(field, &p, run.n, if run.check_grid { grid } else { None })?;
            let margin = margin_scan(&p, MARGIN_POINTS);
            let path = r.artifact(&name, format!("barrier/run_{i}_scan.csv"));
            sub.write_scan(&path)?;
            let path = r.artifact(&name, format!("barrier/run_{i}.json"));
            write_json(&path, &json!({ "params": &p, "subsolution": &sub, "margin": &margin }))?;
            r.check(
                format!("barrier-subsolution-{i}"),
                sub.bound_positive && sub.trace_positive,
                json!({"min_bound": sub.min_bound, "min_trace_scaled": sub.min_trace_scaled}),
            );
            r.check(format!("barrier-margin-{i}"), margin.holds, serde_json::to_value(margin)?);
            Ok(())
        });
    }
}

/// Runs every stage. Failures are recorded in the report; stages depending on a
/// failed one are skipped with an explicit entry.
pub fn run_scenario(config: &ScenarioConfig, out_root: &Path) -> degenlab::Result<RunReport> {
    let dir = out_root.join(&config.name);
    let mut r = Runner::new(config, dir);
    let a = &config.analysis;

    let Some(field) = r.stage("field", |_| build_field(config)) else {
        for s in ["classify", "regularize", "solve", "analysis"] {
            r.skip(s, "field");
        }
        return r.finish();
    };
    let grid = classify_stage(&mut r, config, &field);
    match (&grid, &a.components) {
        (Some(g), Some(cc)) => components_stage(&mut r, config, g, &cc.r_list),
        (None, Some(_)) => r.skip("components", "classify"),
        _ => {}
    }

    let modified = if config.regularize.eps_list.is_empty() {
        None
    } else {
        match regularize_stage(&mut r, config, &field) {
            Some(gm) => Some(gm),
            None => {
                r.skip("solve", "regularize");
                None
            }
        }
    };
    let solved = if config.regularize.eps_list.is_empty() || modified.is_some() {
        solve_stage(&mut r, config, &field, modified.as_ref())
    } else {
        None
    };
    convergence_stage(&mut r, config, &field);

    if let Some(pc) = &a.profiles {
        match (&solved, &grid) {
            (Some((sol, g_solved)), Some(grid)) => {
                let gf = r.stage("gradient-field", |_| GradientField::from_solution(sol.clone()));
                let centers = gf.as_ref().and_then(|gf| profiles_stage(&mut r, config, pc, gf, grid, g_solved));
                match (&gf, &centers) {
                    (Some(gf), Some(c)) => histogram_stage(&mut r, config, gf, c),
                    _ if a.histograms.is_some() => r.skip("histograms", "profiles"),
                    _ => {}
                }
            }
            _ => {
                r.skip("profiles", if grid.is_none() { "classify" } else { "solve" });
                if a.histograms.is_some() {
                    r.skip("histograms", "profiles");
                }
            }
        }
    }
    dichotomy_stage(&mut r, config);
    barrier_stage(&mut r, config, &field, grid.as_ref());
    r.finish()
}
