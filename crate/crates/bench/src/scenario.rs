use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use flowplan::flowfield::load_grid;
use flowplan::metricspace::HeuristicKind;
use flowplan::planner::{EdgeMode, PlannerConfig};
use flowplan::propagate::Workspace;
use flowplan::{FlowError, FlowField, Rect, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown arm `{0}` (expected <heuristic>[/<edge-mode>])")]
    UnknownArm(String),
    #[error("unknown built-in scenario `{0}`")]
    UnknownBuiltin(String),
    #[error("flow: {0}")]
    Flow(#[from] FlowError),
}

const BUILTINS: [(&str, &str); 4] = [
    ("quad-vortex", include_str!("../scenarios/quad-vortex.toml")),
    (
        "uniform-channel",
        include_str!("../scenarios/uniform-channel.toml"),
    ),
    ("still-water", include_str!("../scenarios/still-water.toml")),
    (
        "upstream-corridor",
        include_str!("../scenarios/upstream-corridor.toml"),
    ),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

/// A heuristic paired with an edge mode, written `l2-lsb` or
/// `euclidean/analytic-step`. Adaptive-arc is the default mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Arm {
    pub heuristic: HeuristicKind,
    pub mode: EdgeMode,
}

impl Arm {
    pub fn new(heuristic: HeuristicKind, mode: EdgeMode) -> Self {
        Arm { heuristic, mode }
    }

    /// Filesystem-safe form.
    pub fn slug(&self) -> String {
        self.to_string().replace('/', "+")
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            EdgeMode::AdaptiveArc => write!(f, "{}", self.heuristic),
            mode => write!(f, "{}/{}", self.heuristic, mode),
        }
    }
}

impl FromStr for Arm {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (h, m) = s
            .split_once('/')
            .unwrap_or((s, EdgeMode::AdaptiveArc.name()));
        match (HeuristicKind::parse(h.trim()), EdgeMode::parse(m.trim())) {
            (Some(heuristic), Some(mode)) => Ok(Arm { heuristic, mode }),
            _ => Err(ScenarioError::UnknownArm(s.to_string())),
        }
    }
}

impl TryFrom<String> for Arm {
    type Error = ScenarioError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Arm> for String {
    fn from(a: Arm) -> String {
        a.to_string()
    }
}

/// One flow component; several components are superposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FlowSpec {
    Still,
    Uniform {
        velocity: [f64; 2],
    },
    SingleVortex {
        center: [f64; 2],
        circulation: f64,
        core_radius: f64,
    },
    QuadVortex {
        amplitude: f64,
        cell: f64,
        #[serde(default)]
        origin: [f64; 2],
    },
    ShearJet {
        axis_y: f64,
        width: f64,
        peak: f64,
    },
    /// Grid file; relative paths resolve against the scenario file.
    Grid {
        path: PathBuf,
    },
}

impl FlowSpec {
    fn build(&self, bounds: Rect, base: &Path) -> Result<FlowField, ScenarioError> {
        let v = |a: [f64; 2]| Vec2::new(a[0], a[1]);
        Ok(match self {
            FlowSpec::Still => FlowField::zero(bounds),
            FlowSpec::Uniform { velocity } => FlowField::uniform(v(*velocity), bounds),
            FlowSpec::SingleVortex {
                center,
                circulation,
                core_radius,
            } => {
                if *core_radius <= 0.0 {
                    return Err(ScenarioError::Invalid(
                        "core_radius must be positive".into(),
                    ));
                }
                FlowField::single_vortex(v(*center), *circulation, *core_radius, bounds)
            }
            FlowSpec::QuadVortex {
                amplitude,
                cell,
                origin,
            } => {
                if *cell <= 0.0 {
                    return Err(ScenarioError::Invalid("cell must be positive".into()));
                }
                FlowField::quad_vortex(*amplitude, *cell, v(*origin))
            }
            FlowSpec::ShearJet {
                axis_y,
                width,
                peak,
            } => {
                if *width <= 0.0 {
                    return Err(ScenarioError::Invalid("width must be positive".into()));
                }
                FlowField::shear_jet(*axis_y, *width, *peak, bounds)
            }
            FlowSpec::Grid { path } => {
                let path = base.join(path);
                let file = File::open(&path).map_err(|source| ScenarioError::Io {
                    path: path.clone(),
                    source,
                })?;
                FlowField::grid(load_grid(BufReader::new(file))?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    /// Axis-aligned boxes `[x0, y0, x1, y1]`.
    #[serde(default)]
    pub obstacles: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub v_max: f64,
    pub dx_max: f64,
}

fn one() -> f64 {
    1.0
}

fn seven() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSpec {
    pub arms: Vec<Arm>,
    #[serde(default = "seven")]
    pub n_line_samples: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    /// Defaults to 1% of the workspace diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_radius: Option<f64>,
}

fn default_budget() -> f64 {
    60.0
}

fn default_iterations() -> usize {
    5000
}

fn default_cadence() -> usize {
    100
}

fn default_resolution() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub seeds: Vec<u64>,
    #[serde(default = "default_budget")]
    pub budget_s: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_cadence")]
    pub metrics_every: usize,
    #[serde(default = "default_resolution")]
    pub dispersion_resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub workspace: WorkspaceSpec,
    pub flow: Vec<FlowSpec>,
    pub vehicle: VehicleSpec,
    pub planner: PlannerSpec,
    pub run: RunSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut sc = Self::parse(&text)?;
        sc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(sc)
    }

    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownBuiltin(name.to_string()))?;
        Self::parse(text)
    }

    /// A scenario file, or a built-in name when no such file exists.
    pub fn resolve(arg: &str) -> Result<Self, ScenarioError> {
        let path = Path::new(arg);
        if path.exists() || !builtin_names().any(|n| n == arg) {
            Self::load(path)
        } else {
            Self::builtin(arg)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn start(&self) -> Vec2 {
        Vec2::new(self.start[0], self.start[1])
    }

    pub fn goal(&self) -> Vec2 {
        Vec2::new(self.goal[0], self.goal[1])
    }

    pub fn bounds(&self) -> Rect {
        let w = &self.workspace;
        Rect::new(Vec2::new(w.min[0], w.min[1]), Vec2::new(w.max[0], w.max[1]))
    }

    pub fn workspace(&self) -> Workspace {
        let obstacles = self
            .workspace
            .obstacles
            .iter()
            .map(|o| Rect::new(Vec2::new(o[0], o[1]), Vec2::new(o[2], o[3])))
            .collect();
        Workspace::new(self.bounds()).with_obstacles(obstacles)
    }

    /// Superposition of all flow components, checked to cover the workspace.
    pub fn field(&self) -> Result<FlowField, ScenarioError> {
        let bounds = self.bounds();
        let mut parts = self
            .flow
            .iter()
            .map(|f| f.build(bounds, &self.base_dir))
            .collect::<Result<Vec<_>, _>>()?;
        let field = if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            FlowField::superpose(parts)?
        };
        if !field.bounds().contains_rect(&bounds) {
            return Err(ScenarioError::Invalid(format!(
                "flow bounds {:?} do not cover the workspace",
                field.bounds()
            )));
        }
        Ok(field)
    }

    pub fn goal_radius(&self) -> f64 {
        self.planner
            .goal_radius
            .unwrap_or_else(|| 0.01 * self.bounds().diagonal())
    }

    pub fn planner_config(&self, arm: Arm) -> PlannerConfig {
        let mut c = PlannerConfig::new(
            arm.heuristic,
            self.vehicle.v_max,
            self.vehicle.dx_max,
            self.goal_radius(),
        );
        c.edge_mode = arm.mode;
        c.alpha = self.planner.alpha;
        c.beta = self.planner.beta;
        c.n_line_samples = self.planner.n_line_samples;
        c.max_iterations = self.run.max_iterations;
        c.max_wall = Some(Duration::from_secs_f64(self.run.budget_s));
        c.metrics_every = self.run.metrics_every;
        c.dispersion_resolution = self.run.dispersion_resolution;
        c
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        let w = &self.workspace;
        if !(w.min[0] < w.max[0] && w.min[1] < w.max[1]) {
            return bad("workspace min must be below max".into());
        }
        if self.flow.is_empty() {
            return bad("at least one [[flow]] component is required".into());
        }
        if self.planner.arms.is_empty() {
            return bad("at least one arm is required".into());
        }
        if self.run.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(self.run.budget_s > 0.0 && self.run.budget_s.is_finite()) {
            return bad(format!(
                "budget_s must be positive, got {}",
                self.run.budget_s
            ));
        }
        for o in &w.obstacles {
            if !(o[0] < o[2] && o[1] < o[3]) {
                return bad(format!("degenerate obstacle {o:?}"));
            }
        }
        let ws = self.workspace();
        if !ws.is_free(self.start()) {
            return bad(format!(
                "start {} is outside the free workspace",
                self.start()
            ));
        }
        if !ws.bounds.contains(self.goal()) {
            return bad(format!("goal {} is outside the workspace", self.goal()));
        }
        if self.start == self.goal {
            return bad("start and goal coincide".into());
        }
        for arm in &self.planner.arms {
            self.planner_config(*arm)
                .validate()
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}
