//! Experiment configuration: a TOML file with top-level keys, optionally
//! overridden per subcommand in `[solve]`, `[convergence]`, `[tau_sweep]`,
//! `[condition]` and `[verify]` sections. Every key has a default.

use std::path::{Path, PathBuf};

use cutfem::assembly::{DEFAULT_BETA, DEFAULT_VOLUME_ORDER};
use cutfem::classification::{AgglomerationTarget, DEFAULT_GAMMA, DEFAULT_MAX_PATH_LENGTH};
use cutfem::geometry::{BoundingBox, LevelSet, Vec2};
use cutfem::linalg::{DEFAULT_EIGEN_TOL, EIGEN_SEED};
use cutfem::problem::ProblemData;
use cutfem::quadrature::QuadratureRule;
use cutfem::stabilization::{StabilizationFamily, StabilizationSpec, DEFAULT_TAU};
use cutfem::study::{
    SolverSettings, DEFAULT_LEVELS, DEFAULT_SOLVER_TOL, DEFAULT_SWEEP_TAUS, DEFAULT_SWEEP_TOL,
};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_N: usize = 32;
pub const DEFAULT_SEED: u64 = EIGEN_SEED;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_CONDITION_TAUS: [f64; 3] = [0.1, 10.0, 1e3];
pub const DEFAULT_VERIFY_LEVELS: [usize; 3] = [16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Convergence,
    TauSweep,
    Condition,
    Verify,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Solve,
        Command::Convergence,
        Command::TauSweep,
        Command::Condition,
        Command::Verify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Convergence => "convergence",
            Command::TauSweep => "tau-sweep",
            Command::Condition => "condition",
            Command::Verify => "verify",
        }
    }

    fn section(&self) -> &'static str {
        match self {
            Command::TauSweep => "tau_sweep",
            other => other.name(),
        }
    }
}

fn default_center() -> [f64; 2] {
    [0.0, 0.0]
}

fn default_radius() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometryConfig {
    Circle {
        #[serde(default = "default_center")]
        center: [f64; 2],
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Halfplane {
        normal: [f64; 2],
        offset: f64,
    },
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig::Circle {
            center: default_center(),
            radius: default_radius(),
        }
    }
}

impl GeometryConfig {
    pub fn describe(&self) -> String {
        match self {
            GeometryConfig::Circle { center, radius } => {
                format!(
                    "circle center=({} {}) radius={radius}",
                    center[0], center[1]
                )
            }
            GeometryConfig::Halfplane { normal, offset } => {
                format!(
                    "halfplane normal=({} {}) offset={offset}",
                    normal[0], normal[1]
                )
            }
        }
    }
}

/// Manufactured solution. `cosine` is `u = cos(pi |x - c|)` and `affine` is
/// `u = a + b x + c y`; in both cases `g = u` on the boundary.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    Cosine {
        #[serde(default)]
        center: Option<[f64; 2]>,
    },
    Affine {
        coefficients: [f64; 3],
    },
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Cosine { center: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    geometry: Option<GeometryConfig>,
    bbox: Option<[f64; 4]>,
    levels: Option<Vec<usize>>,
    n: Option<usize>,
    gamma: Option<f64>,
    beta: Option<f64>,
    tau: Option<Vec<f64>>,
    family: Option<String>,
    m: Option<u32>,
    quadrature_order: Option<usize>,
    max_path_length: Option<usize>,
    target: Option<String>,
    tol: Option<f64>,
    max_iterations: Option<usize>,
    eigen_tol: Option<f64>,
    problem: Option<ProblemConfig>,
    samples: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    dump_matrices: Option<bool>,
    verbose: Option<bool>,
}

macro_rules! overlay {
    ($top:expr, $section:expr, $($field:ident),*) => {
        Params { $($field: $section.$field.or($top.$field)),* }
    };
}

impl Params {
    fn overlay(self, section: Params) -> Params {
        overlay!(
            self,
            section,
            geometry,
            bbox,
            levels,
            n,
            gamma,
            beta,
            tau,
            family,
            m,
            quadrature_order,
            max_path_length,
            target,
            tol,
            max_iterations,
            eigen_tol,
            problem,
            samples,
            seed,
            output_dir,
            dump_matrices,
            verbose
        )
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub dump_matrices: bool,
    pub seed: Option<u64>,
    pub verbose: bool,
}

/// Fully resolved and validated settings for one subcommand.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub command: Command,
    pub geometry: GeometryConfig,
    pub level_set: LevelSet<f64>,
    pub bbox: BoundingBox<f64>,
    pub levels: Vec<usize>,
    /// Whether `levels` came from the configuration or the built-in ladder.
    pub levels_from_config: bool,
    pub n: usize,
    pub taus: Vec<f64>,
    pub settings: SolverSettings<f64>,
    pub max_path_length: usize,
    pub eigen_tol: f64,
    pub problem: ProblemConfig,
    pub samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dump_matrices: bool,
    pub verbose: bool,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(format!(
            "`{name}` must be positive and finite, got {v}"
        )))
    }
}

fn parse_params(text: &str) -> Result<(Params, Vec<(String, Params)>), CliError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_error(e.to_string()))?;
    let mut sections = Vec::new();
    for command in Command::ALL {
        let key = command.section();
        if let Some(value) = table.remove(key) {
            let params =
                Params::deserialize(value).map_err(|e| config_error(format!("[{key}]: {e}")))?;
            sections.push((key.to_string(), params));
        }
    }
    let top =
        Params::deserialize(toml::Value::Table(table)).map_err(|e| config_error(e.to_string()))?;
    Ok((top, sections))
}

impl Experiment {
    pub fn from_file(
        command: Command,
        path: Option<&Path>,
        overrides: &Overrides,
    ) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_error(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_str(command, &text, overrides)
    }

    pub fn from_str(command: Command, text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let (top, sections) = parse_params(text)?;
        let section = sections
            .into_iter()
            .find(|(k, _)| k == command.section())
            .map(|(_, p)| p)
            .unwrap_or_default();
        Self::resolve(command, top.overlay(section), overrides)
    }

    fn resolve(command: Command, p: Params, overrides: &Overrides) -> Result<Self, CliError> {
        let geometry = p.geometry.unwrap_or_default();
        let level_set = match geometry {
            GeometryConfig::Circle { center, radius } => {
                LevelSet::circle(Vec2::new(center[0], center[1]), positive("radius", radius)?)
            }
            GeometryConfig::Halfplane { normal, offset } => {
                if !offset.is_finite() {
                    return Err(config_error("`offset` must be finite"));
                }
                LevelSet::half_plane(Vec2::new(normal[0], normal[1]), offset)
            }
        }
        .map_err(|e| config_error(e.to_string()))?;

        let [x0, y0, x1, y1] = p.bbox.unwrap_or([-1.0, -1.0, 1.0, 1.0]);
        let bbox = BoundingBox::new(Vec2::new(x0, y0), Vec2::new(x1, y1))
            .map_err(|e| config_error(e.to_string()))?;

        let levels_from_config = p.levels.is_some();
        let levels = p.levels.unwrap_or_else(|| match command {
            Command::Verify => DEFAULT_VERIFY_LEVELS.to_vec(),
            _ => DEFAULT_LEVELS.to_vec(),
        });
        if levels.is_empty() || levels.contains(&0) {
            return Err(config_error(
                "`levels` must be a nonempty list of positive integers",
            ));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_error("`levels` must be strictly increasing"));
        }
        let needs_three = matches!(command, Command::Convergence | Command::Condition);
        if needs_three && levels.len() < 3 {
            return Err(config_error(format!(
                "`{}` needs at least 3 mesh levels",
                command.name()
            )));
        }
        let n = p.n.unwrap_or(DEFAULT_N);
        if n == 0 {
            return Err(config_error("`n` must be positive"));
        }

        let taus = p.tau.unwrap_or_else(|| match command {
            Command::TauSweep => DEFAULT_SWEEP_TAUS.to_vec(),
            Command::Condition => DEFAULT_CONDITION_TAUS.to_vec(),
            _ => vec![DEFAULT_TAU],
        });
        if taus.is_empty() {
            return Err(config_error("`tau` must be a nonempty list"));
        }
        for &t in &taus {
            positive("tau", t)?;
        }

        let family: StabilizationFamily = p
            .family
            .as_deref()
            .unwrap_or("nodal")
            .parse()
            .map_err(|e: cutfem::CutFemError| config_error(e.to_string()))?;
        if command == Command::TauSweep && family != StabilizationFamily::Nodal {
            return Err(config_error("`tau-sweep` requires the nodal family"));
        }
        let m = p.m.unwrap_or(1);
        let stabilization =
            StabilizationSpec::new(family, m, taus[0]).map_err(|e| config_error(e.to_string()))?;

        let volume_order = p.quadrature_order.unwrap_or(DEFAULT_VOLUME_ORDER);
        let reference = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        QuadratureRule::<f64>::triangle(reference, volume_order)
            .map_err(|e| config_error(e.to_string()))?;

        let target: AgglomerationTarget = p
            .target
            .as_deref()
            .unwrap_or("large")
            .parse()
            .map_err(|e: cutfem::CutFemError| config_error(e.to_string()))?;
        let default_tol = if command == Command::TauSweep {
            DEFAULT_SWEEP_TOL
        } else {
            DEFAULT_SOLVER_TOL
        };
        let settings = SolverSettings {
            gamma: positive("gamma", p.gamma.unwrap_or(DEFAULT_GAMMA))?,
            beta: positive("beta", p.beta.unwrap_or(DEFAULT_BETA))?,
            target,
            stabilization,
            tol: positive("tol", p.tol.unwrap_or(default_tol))?,
            max_iterations: p.max_iterations,
            volume_order,
        };
        if settings.gamma > 1.0 {
            return Err(config_error("`gamma` must not exceed 1"));
        }

        let problem = p.problem.unwrap_or_default();
        if let ProblemConfig::Affine { coefficients } = &problem {
            if coefficients.iter().any(|c| !c.is_finite()) {
                return Err(config_error("affine coefficients must be finite"));
            }
        }
        let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
        if samples == 0 {
            return Err(config_error("`samples` must be positive"));
        }

        Ok(Self {
            command,
            geometry,
            level_set,
            bbox,
            levels,
            levels_from_config,
            n,
            taus,
            settings,
            max_path_length: p.max_path_length.unwrap_or(DEFAULT_MAX_PATH_LENGTH),
            eigen_tol: positive("eigen_tol", p.eigen_tol.unwrap_or(DEFAULT_EIGEN_TOL))?,
            problem,
            samples,
            seed: overrides.seed.or(p.seed).unwrap_or(DEFAULT_SEED),
            output_dir: overrides
                .output_dir
                .clone()
                .or(p.output_dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            dump_matrices: overrides.dump_matrices || p.dump_matrices.unwrap_or(false),
            verbose: overrides.verbose || p.verbose.unwrap_or(false),
        })
    }

    pub fn settings_with_tau(&self, tau: f64) -> SolverSettings<f64> {
        self.settings.with_tau(tau)
    }

    pub fn problem_data(&self) -> ProblemData<f64> {
        match self.problem {
            ProblemConfig::Cosine { center } => {
                let c = center.unwrap_or(match self.geometry {
                    GeometryConfig::Circle { center, .. } => center,
                    GeometryConfig::Halfplane { .. } => [0.0, 0.0],
                });
                let mut data = ProblemData::cosine_radial(Vec2::new(c[0], c[1]));
                data.dirichlet = data
                    .exact
                    .clone()
                    .expect("cosine data has a reference solution");
                data
            }
            ProblemConfig::Affine {
                coefficients: [a, b, c],
            } => ProblemData::affine(a, b, c),
        }
    }

    fn problem_description(&self) -> String {
        match self.problem {
            ProblemConfig::Cosine { center: Some(c) } => {
                format!("cosine center=({} {})", c[0], c[1])
            }
            ProblemConfig::Cosine { center: None } => "cosine".into(),
            ProblemConfig::Affine {
                coefficients: [a, b, c],
            } => format!("affine coefficients=({a} {b} {c})"),
        }
    }

    fn join<T: ToString>(values: &[T]) -> String {
        values
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// `key,value` pairs describing the run, written next to every output.
    pub fn metadata(&self) -> Vec<(&'static str, String)> {
        let s = &self.settings;
        vec![
            ("command", self.command.name().to_string()),
            ("version", env!("CARGO_PKG_VERSION").to_string()),
            ("geometry", self.geometry.describe()),
            (
                "bbox",
                format!(
                    "{} {} {} {}",
                    self.bbox.min.x, self.bbox.min.y, self.bbox.max.x, self.bbox.max.y
                ),
            ),
            ("problem", self.problem_description()),
            ("levels", Self::join(&self.levels)),
            (
                "levels_source",
                if self.levels_from_config {
                    "config"
                } else {
                    "default ladder"
                }
                .to_string(),
            ),
            ("n", self.n.to_string()),
            ("family", s.stabilization.family.to_string()),
            ("m", s.stabilization.m.to_string()),
            ("tau", Self::join(&self.taus)),
            ("gamma", s.gamma.to_string()),
            ("beta", s.beta.to_string()),
            ("target", s.target.to_string()),
            ("quadrature_order", s.volume_order.to_string()),
            ("max_path_length", self.max_path_length.to_string()),
            ("tol", format!("{:e}", s.tol)),
            (
                "max_iterations",
                s.max_iterations
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "auto".into()),
            ),
            ("eigen_tol", format!("{:e}", self.eigen_tol)),
            ("samples", self.samples.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(command: Command, text: &str) -> Result<Experiment, CliError> {
        Experiment::from_str(command, text, &Overrides::default())
    }

    #[test]
    fn empty_file_gives_the_circle_defaults() {
        let e = resolve(Command::Convergence, "").unwrap();
        assert_eq!(e.geometry, GeometryConfig::default());
        assert_eq!(e.levels, DEFAULT_LEVELS.to_vec());
        assert!(!e.levels_from_config);
        assert_eq!(e.taus, vec![DEFAULT_TAU]);
        assert_eq!(e.settings.stabilization.family, StabilizationFamily::Nodal);
        assert_eq!(e.seed, DEFAULT_SEED);
    }

    #[test]
    fn sections_override_top_level_keys() {
        let text = "tau = [1.0]\nfamily = \"face\"\n[condition]\ntau = [2.0, 3.0]\n";
        let c = resolve(Command::Condition, text).unwrap();
        assert_eq!(c.taus, vec![2.0, 3.0]);
        assert_eq!(
            c.settings.stabilization.family,
            StabilizationFamily::FaceGradient
        );
        let s = resolve(Command::Solve, text).unwrap();
        assert_eq!(s.taus, vec![1.0]);
    }

    #[test]
    fn command_line_overrides_win() {
        let o = Overrides {
            output_dir: Some("elsewhere".into()),
            dump_matrices: true,
            seed: Some(7),
            verbose: false,
        };
        let e = Experiment::from_str(Command::Solve, "seed = 3\noutput_dir = \"x\"", &o).unwrap();
        assert_eq!(e.seed, 7);
        assert_eq!(e.output_dir, PathBuf::from("elsewhere"));
        assert!(e.dump_matrices);
    }

    #[test]
    fn halfplane_geometry_parses() {
        let e = resolve(
            Command::Solve,
            "[geometry]\nkind = \"halfplane\"\nnormal = [2.0, 0.0]\noffset = 0.5\n",
        )
        .unwrap();
        assert!(matches!(e.level_set, LevelSet::HalfPlane { .. }));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "levels = [16, 8, 32]",
            "levels = [8, 8, 16]",
            "levels = []",
            "tau = []",
            "tau = [-1.0]",
            "gamma = 0.0",
            "beta = -2.0",
            "family = \"unknown\"",
            "m = 3",
            "quadrature_order = 40",
            "unknown_key = 1",
            "[geometry]\nkind = \"circle\"\nradius = -1.0",
            "[geometry]\nkind = \"square\"",
            "[solve]\nbogus = true",
            "not toml at all [",
        ] {
            assert!(
                matches!(resolve(Command::Solve, text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn command_preconditions() {
        assert!(resolve(Command::Convergence, "levels = [8, 16]").is_err());
        assert!(resolve(Command::Condition, "levels = [8, 16]").is_err());
        assert!(resolve(Command::Solve, "levels = [8, 16]").is_ok());
        assert!(resolve(Command::TauSweep, "family = \"face\"").is_err());
        let sweep = resolve(Command::TauSweep, "").unwrap();
        assert_eq!(sweep.taus, DEFAULT_SWEEP_TAUS.to_vec());
        assert_eq!(sweep.settings.tol, DEFAULT_SWEEP_TOL);
    }

    #[test]
    fn cosine_data_matches_its_boundary_values() {
        let e = resolve(
            Command::Solve,
            "[geometry]\nkind = \"circle\"\nradius = 0.3\n",
        )
        .unwrap();
        let data = e.problem_data();
        let x = Vec2::new(0.3, 0.0);
        assert_eq!((data.dirichlet)(x), (data.exact.unwrap())(x));
    }
}
