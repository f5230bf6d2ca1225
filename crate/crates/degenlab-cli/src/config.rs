//! Scenario files: a versioned TOML schema where unknown keys are errors.

use degenlab::field::{BuiltinSpec, GridSpec};
use degenlab::mesh::Domain;
use degenlab::solve::{BoundaryData, SolveOpts};
use degenlab::Rect;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DEGENLAB_OUT";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    /// Working scale: the field is modified outside `B_{2M}` and the grid must cover `B̄_{2M}`.
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub field: BuiltinSpec,
    pub grid: GridConfig,
    pub mesh: MeshConfig,
    pub boundary: BoundaryData,
    #[serde(default)]
    pub solver: SolveOpts,
    #[serde(default)]
    pub regularize: RegularizeConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// The grid box is `[-half_width, half_width]²`.
    pub half_width: f64,
    pub h: f64,
    #[serde(default)]
    pub lambda_ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub big_lambda_ladder: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        let mut s = GridSpec::new(Rect::centered(self.half_width), self.h);
        if let Some(l) = &self.lambda_ladder {
            s.lambda_ladder = l.clone();
        }
        if let Some(l) = &self.big_lambda_ladder {
            s.big_lambda_ladder = l.clone();
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub domain: Domain,
    pub h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeConfig {
    /// Initial blend constant of the modification at infinity.
    pub c: f64,
    /// Strictly decreasing mollification radii; empty means solve with the field itself.
    pub eps_list: Vec<f64>,
}

impl Default for RegularizeConfig {
    fn default() -> Self {
        RegularizeConfig { c: 1.0, eps_list: Vec::new() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub profiles: Option<ProfilesConfig>,
    #[serde(default)]
    pub histograms: Option<HistogramConfig>,
    #[serde(default)]
    pub components: Option<ComponentsConfig>,
    #[serde(default)]
    pub dichotomy: Option<DichotomyConfig>,
    #[serde(default)]
    pub barrier: Vec<BarrierRun>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
}

/// Lebesgue and distance profiles at seeded interior centers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesConfig {
    pub delta_list: Vec<f64>,
    pub n_centers: usize,
    /// Centers are drawn uniformly from `B_{center_radius}`.
    pub center_radius: f64,
    /// Largest allowed change of the distance profile over the two smallest δ at flagged centers.
    #[serde(default = "default_oscillation")]
    pub max_oscillation: f64,
    /// Also compare Lebesgue flags of `∇u` and `i·G(∇u)`.
    #[serde(default)]
    pub duality: bool,
}

fn default_oscillation() -> f64 {
    0.1
}

/// Young-measure histograms over `B_δ` at each profile center, δ the smallest of the list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    pub bins: usize,
    pub half_width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentsConfig {
    pub r_list: Vec<f64>,
}

/// Random-field dichotomy suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyConfig {
    pub cases: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierRun {
    pub lambda: f64,
    pub rho: f64,
    #[serde(default = "default_scan")]
    pub n: usize,
    /// Require `B_{ρ/2}` to be elliptic on the classified grid.
    #[serde(default)]
    pub check_grid: bool,
}

fn default_scan() -> usize {
    64
}

/// Refinement study against the boundary data taken as exact solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub h_list: Vec<f64>,
    pub rate_min: f64,
    pub rate_max: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    /// A small disk scenario for `field` with linear data, used when no file is given.
    pub fn quick(name: &str, field: BuiltinSpec) -> Self {
        ScenarioConfig {
            version: SCHEMA_VERSION,
            name: name.into(),
            seed: 0,
            m: 1.0,
            output_dir: None,
            field,
            grid: GridConfig { half_width: 2.5, h: 0.05, lambda_ladder: None, big_lambda_ladder: None },
            mesh: MeshConfig { domain: Domain::Disk { radius: 1.0 }, h: 0.05 },
            boundary: BoundaryData::Linear { p: [0.5, 0.0], c: 0.0 },
            solver: SolveOpts::default(),
            regularize: RegularizeConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("unsupported version {}, expected {SCHEMA_VERSION}", self.version));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad(format!("name {:?} is not a plain directory name", self.name));
        }
        if !positive(self.m) {
            return bad(format!("M must be positive, got {}", self.m));
        }
        if !positive(self.grid.h) || !positive(self.grid.half_width) {
            return bad("grid h and half_width must be positive".into());
        }
        if self.grid.half_width < 2.0 * self.m {
            return bad(format!("grid box [-{w}, {w}]² does not contain the ball of radius 2M = {}", 2.0 * self.m, w = self.grid.half_width));
        }
        self.grid.spec().validate().or_else(|e| bad(e.to_string()))?;
        if !positive(self.mesh.h) {
            return bad(format!("mesh h must be positive, got {}", self.mesh.h));
        }
        self.mesh.domain.validate().or_else(|e| bad(e.to_string()))?;
        if self.mesh.h > self.mesh.domain.width() {
            return bad("mesh h exceeds the domain".into());
        }
        self.boundary.validate().or_else(|e| bad(e.to_string()))?;
        self.solver.validate().or_else(|e| bad(e.to_string()))?;
        let eps = &self.regularize.eps_list;
        if !positive(self.regularize.c) {
            return bad("regularize.c must be positive".into());
        }
        if eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) || !strictly_decreasing(eps) {
            return bad("eps_list must be strictly decreasing with values in (0, 1)".into());
        }
        let a = &self.analysis;
        let disk_radius = match self.mesh.domain {
            Domain::Disk { radius } => Some(radius),
            Domain::Annulus { .. } => None,
        };
        if let Some(p) = &a.profiles {
            let Some(r) = disk_radius else {
                return bad("profiles need a disk domain".into());
            };
            if p.delta_list.is_empty() || p.delta_list.iter().any(|&d| !positive(d)) || !strictly_decreasing(&p.delta_list) {
                return bad("delta_list must be nonempty, positive and strictly decreasing".into());
            }
            if p.n_centers == 0 || !positive(p.center_radius) || !positive(p.max_oscillation) {
                return bad("profiles need n_centers ≥ 1 and positive radii".into());
            }
            if p.center_radius + p.delta_list[0] >= r {
                return bad("center_radius + largest δ must stay inside the domain".into());
            }
        }
        if let Some(hc) = &a.histograms {
            if a.profiles.is_none() {
                return bad("histograms are taken at the profile centers and need [analysis.profiles]".into());
            }
            if hc.bins == 0 || !positive(hc.half_width) {
                return bad("histograms need bins ≥ 1 and a positive half_width".into());
            }
        }
        if let Some(c) = &a.components {
            if c.r_list.is_empty() || c.r_list.iter().any(|&r| !positive(r)) {
                return bad("components.r_list must hold positive radii".into());
            }
        }
        if let Some(d) = &a.dichotomy {
            if d.cases == 0 {
                return bad("dichotomy.cases must be positive".into());
            }
        }
        for b in &a.barrier {
            if !positive(b.lambda) || !positive(b.rho) || b.n < 2 {
                return bad("barrier runs need positive lambda, rho and n ≥ 2".into());
            }
        }
        if let Some(c) = &a.convergence {
            if c.h_list.len() < 2 || c.h_list.iter().any(|&h| !positive(h)) || !strictly_decreasing(&c.h_list) {
                return bad("convergence.h_list needs at least two strictly decreasing sizes".into());
            }
            if !(c.rate_min <= c.rate_max) {
                return bad("convergence rate_min exceeds rate_max".into());
            }
            if matches!(self.boundary, BoundaryData::FlatPerturbed { .. }) {
                return bad("convergence needs boundary data that is an exact solution".into());
            }
        }
        Ok(())
    }

    /// Explicit override, then the file's `output_dir`, then the environment, then `./degenlab-out`.
    pub fn output_root(&self, cli: Option<&Path>) -> PathBuf {
        match (cli, &self.output_dir) {
            (None, Some(d)) => d.clone(),
            _ => default_output_root(cli),
        }
    }
}

/// Explicit override, then the environment, then `./degenlab-out`.
pub fn default_output_root(cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("degenlab-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
name = "t"
seed = 3
M = 1.0
field = { kind = "identity" }
grid = { half_width = 2.5, h = 0.1 }
mesh = { domain = { kind = "disk", radius = 1.0 }, h = 0.1 }
boundary = { kind = "saddle" }
"#;

    #[test]
    fn minimal_file_parses() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.field, BuiltinSpec::Identity);
        assert!(c.regularize.eps_list.is_empty());
        assert_eq!(c.solver.tol, SolveOpts::default().tol);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let typo = MINIMAL.replace("seed = 3", "seed = 3\nsede = 4");
        assert!(matches!(ScenarioConfig::from_toml(&typo), Err(ConfigError::Parse(_))));
        let neg = MINIMAL.replace("h = 0.1 }\nboundary", "h = -0.1 }\nboundary");
        assert!(matches!(ScenarioConfig::from_toml(&neg), Err(ConfigError::Invalid(_))));
        let small_box = MINIMAL.replace("half_width = 2.5", "half_width = 1.5");
        assert!(matches!(ScenarioConfig::from_toml(&small_box), Err(ConfigError::Invalid(_))));
        let version = MINIMAL.replace("version = 1", "version = 2");
        assert!(matches!(ScenarioConfig::from_toml(&version), Err(ConfigError::Invalid(_))));
        let eps = format!("{MINIMAL}\n[regularize]\nc = 1.0\neps_list = [0.1, 0.2]\n");
        assert!(matches!(ScenarioConfig::from_toml(&eps), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn output_root_precedence() {
        let mut c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.output_root(Some(Path::new("a"))), PathBuf::from("a"));
        c.output_dir = Some("b".into());
        assert_eq!(c.output_root(None), PathBuf::from("b"));
    }
}
