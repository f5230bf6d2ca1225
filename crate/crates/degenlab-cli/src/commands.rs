//! Command-line front end. Exit codes: 0 success, 1 a check or stage failed, 2 usage or config error.

use crate::config::{default_output_root, ConfigError, ScenarioConfig};
use crate::scenario::{build_field, classify_stage, run_scenario, RunReport, Runner};
use clap::{Args, Parser, Subcommand};
use degenlab::analysis::sv_suite;
use degenlab::barrier::{barrier_constants, margin_scan, subsolution_check};
use degenlab::field::sampling::sample_points;
use degenlab::field::{dual_field, duality_residuals, BuiltinSpec, DualOpts};
use degenlab::io::{write_csv, write_json};
use degenlab::Rect;
use serde_json::json;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "degenlab", version, about = "Experiments for degenerate monotone elliptic equations in the plane")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; defaults to the config's `output_dir`, then $DEGENLAB_OUT, then ./degenlab-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Scenario file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Builtin field name: identity, identity-scaled, p-laplacian, kink-circle, quartic-quartroot.
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify gradient space into degenerate and singular sets.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h_grid: Option<f64>,
        #[arg(long)]
        half_width: Option<f64>,
    },
    /// Solve the Dirichlet problem (through the ε-sequence if the config lists one).
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h: Option<f64>,
    },
    /// Solve, then compute profiles and histograms at the configured centers.
    Blowup {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h: Option<f64>,
    },
    /// Residuals of G*(i·G(ξ)) = i·ξ at random points.
    Duality {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Points are drawn from [-r, r]² with |ξ| ≥ min_norm.
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.1)]
        min_norm: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Barrier constants and the subsolution scan.
    Barrier {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long = "M", alias = "m")]
        m: f64,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Energy-or-circle dichotomy on seeded random fields.
    Svcheck {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "M", alias = "m", default_value_t = 1.0)]
        m: f64,
    },
    /// Scenario files.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum ScenarioAction {
    /// Run every stage of a scenario file.
    Run { file: PathBuf },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] degenlab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(_) => EXIT_CHECK_FAILED,
        }
    }
}

fn parse_field(name: &str) -> Result<BuiltinSpec, CliError> {
    BuiltinSpec::from_name(name).ok_or_else(|| CliError::Usage(format!("unknown field {name:?}")))
}

fn base_config(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut c = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::quick("cli", BuiltinSpec::Identity),
    };
    if let Some(f) = &common.field {
        c.field = parse_field(f)?;
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    Ok(c)
}

fn finish(mut c: ScenarioConfig, name: &str) -> Result<ScenarioConfig, CliError> {
    c.name = format!("{}-{name}", c.name);
    c.validate()?;
    Ok(c)
}

fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v).map_err(degenlab::Error::from)?);
    Ok(())
}

fn report_outcome(rep: &RunReport) -> Result<i32, CliError> {
    for e in &rep.errors {
        eprintln!("error [{}]: {}", e.request, e.message);
    }
    for c in rep.failed_checks() {
        eprintln!("check failed: {}", c.name);
    }
    print_json(&json!({
        "run_dir": &rep.run_dir,
        "pass": rep.pass,
        "checks": rep.checks.iter().map(|c| json!({"name": c.name, "pass": c.pass})).collect::<Vec<_>>(),
        "errors": rep.errors.len(),
    }))?;
    Ok(if rep.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Executes a parsed command and returns the exit code.
pub fn execute(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Scenario { action: ScenarioAction::Run { file } } => {
            let c = ScenarioConfig::load(&file)?;
            let rep = run_scenario(&c, &c.output_root(out))?;
            report_outcome(&rep)
        }
        Command::Classify { common, h_grid, half_width } => {
            let mut c = base_config(&common)?;
            if let Some(h) = h_grid {
                c.grid.h = h;
            }
            if let Some(w) = half_width {
                c.grid.half_width = w;
            }
            let c = finish(c, "classify")?;
            let mut r = Runner::new(&c, c.output_root(out).join(&c.name));
            if let Some(field) = r.stage("field", |_| build_field(&c)) {
                if classify_stage(&mut r, &c, &field).is_some() {
                    let summary = std::fs::read_to_string(r.dir.join("grid/summary.json")).map_err(degenlab::Error::from)?;
                    println!("{summary}");
                }
            }
            let rep = r.finish()?;
            Ok(if rep.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Solve { common, h } => {
            let mut c = base_config(&common)?;
            if let Some(h) = h {
                c.mesh.h = h;
            }
            c.analysis = Default::default();
            let c = finish(c, "solve")?;
            report_outcome(&run_scenario(&c, &c.output_root(out))?)
        }
        Command::Blowup { common, h } => {
            let mut c = base_config(&common)?;
            if let Some(h) = h {
                c.mesh.h = h;
            }
            if c.analysis.profiles.is_none() {
                c.analysis.profiles = Some(crate::config::ProfilesConfig {
                    delta_list: vec![0.4, 0.2, 0.1, 0.05],
                    n_centers: 9,
                    center_radius: 0.5,
                    max_oscillation: 0.1,
                    duality: false,
                });
            }
            if c.analysis.histograms.is_none() {
                c.analysis.histograms = Some(crate::config::HistogramConfig { bins: 40, half_width: 2.0 * c.m });
            }
            c.analysis.barrier.clear();
            c.analysis.dichotomy = None;
            let c = finish(c, "blowup")?;
            report_outcome(&run_scenario(&c, &c.output_root(out))?)
        }
        Command::Duality { common, samples, radius, min_norm, tol } => {
            let c = finish(base_config(&common)?, "duality")?;
            if !(radius > 0.0 && min_norm >= 0.0 && min_norm < radius) || samples == 0 {
                return Err(CliError::Usage("need samples ≥ 1 and 0 ≤ min_norm < radius".into()));
            }
            duality(&c, samples, radius, min_norm, tol, &c.output_root(out))
        }
        Command::Barrier { lambda, rho, m, n } => barrier(lambda, rho, m, n, &default_output_root(out)),
        Command::Svcheck { cases, seed, m } => {
            if cases == 0 || !(m > 0.0) {
                return Err(CliError::Usage("need cases ≥ 1 and M > 0".into()));
            }
            let rep = sv_suite(cases, seed, m)?;
            let path = default_output_root(out).join("svcheck").join("svcheck.json");
            write_json(&path, &rep)?;
            print_json(&json!({
                "cases": rep.cases,
                "violations": rep.violations,
                "energy_branch": rep.energy_branch,
                "circle_branch": rep.circle_branch,
                "report": path,
            }))?;
            Ok(if rep.violations == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

fn duality(c: &ScenarioConfig, samples: usize, radius: f64, min_norm: f64, tol: f64, root: &Path) -> Result<i32, CliError> {
    let field = build_field(c)?;
    let dual = dual_field(&field, &DualOpts::default())?;
    let b = Rect::centered(radius);
    let mut pts = Vec::with_capacity(samples);
    let mut round = 0;
    while pts.len() < samples {
        pts.extend(sample_points(&b, samples, c.seed.wrapping_add(round)).into_iter().filter(|p| p.norm() >= min_norm));
        round += 1;
    }
    pts.truncate(samples);
    let res = duality_residuals(&field, &dual, &pts);
    let max = res.iter().copied().fold(0.0, f64::max);
    let dir = root.join(&c.name);
    write_csv(&dir.join("residuals.csv"), Some(&["x", "y", "residual"]), pts.iter().zip(&res).map(|(p, &r)| [p.x, p.y, r]))?;
    let pass = max <= tol;
    let summary = json!({ "field": field.name(), "samples": samples, "max_residual": max, "tol": tol, "pass": pass });
    write_json(&dir.join("duality.json"), &summary)?;
    print_json(&summary)?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn barrier(lambda: f64, rho: f64, m: f64, n: usize, root: &Path) -> Result<i32, CliError> {
    if n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    let p = barrier_constants(lambda, rho, m).map_err(|e| CliError::Usage(e.to_string()))?;
    let id = degenlab::field::make_builtin(&BuiltinSpec::Identity)?;
    let sub = subsolution_check(&id, &p, n, None)?;
    let margin = margin_scan(&p, crate::scenario::MARGIN_POINTS);
    let dir = root.join("barrier");
    let scan = dir.join(format!("scan_lambda{lambda}_rho{rho}_M{m}.csv"));
    sub.write_scan(&scan)?;
    print_json(&json!({
        "params": &p,
        "subsolution": { "min_bound": sub.min_bound, "bound_positive": sub.bound_positive, "trace_positive": sub.trace_positive },
        "margin": &margin,
        "scan": scan,
    }))?;
    Ok(if sub.bound_positive && sub.trace_positive && margin.holds { EXIT_OK } else { EXIT_CHECK_FAILED })
}
