//! Scenario files: schema, validation with field paths, and construction of
//! the solver inputs.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use moment_ensemble::ensemble::{lift, EnsembleGrid, ParameterInterval, UnicycleState};
use moment_ensemble::geometry::{
    member_node_bands, moment_polyhedron_bands, obstacle_disjunction, ObstacleSpec, Polyhedron, DEFAULT_BIG_M,
};
use moment_ensemble::legendre::signed_part_integrals;
use moment_ensemble::moments::MomentVector;
use moment_ensemble::ocp::{
    point_target, ControlBounds, GradientMethod, OcpSpec, RecedingOptions, SolverOptions, VerificationSpec, Weights,
};
use moment_ensemble::par::ExecMode;
use moment_ensemble::stl::{region_formula, RobustnessConfig, StlFormula};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Transform,
    Simulate,
    #[default]
    Solve,
    Verify,
    Receding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub model: ModelBlock,
    #[serde(default)]
    pub constraints: ConstraintsBlock,
    pub task: TaskBlock,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub interval: [f64; 2],
    pub order: usize,
    pub start: Pose,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

/// A planar region given either as an axis-aligned box (`lo`, `hi`) or as rows
/// with two-sided bounds (`rows`, `lower`, `upper`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Visit window; waypoints with a window form the default formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl WaypointEntry {
    fn region(&self) -> RegionEntry {
        RegionEntry {
            name: self.name.clone(),
            lo: self.lo,
            hi: self.hi,
            rows: self.rows.clone(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

/// Obstacle `{x : rows·x ≥ bounds}` or an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<f64>>,
    #[serde(default = "defaults::big_m")]
    pub big_m: f64,
    /// Planning inflation; verification always uses the true obstacle.
    #[serde(default)]
    pub inflate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsBlock {
    #[serde(default)]
    pub polyhedra: Vec<RegionEntry>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleEntry>,
    #[serde(default = "defaults::yes")]
    pub obstacles_active: bool,
    /// Bands are imposed at orders `0..=band_order`.
    #[serde(default)]
    pub band_order: usize,
    /// Keep-in polyhedra are shrunk by this distance before building bands.
    #[serde(default)]
    pub margin: f64,
    /// Parameter values at which reconstructed members are kept inside the polyhedra.
    #[serde(default)]
    pub member_nodes: Vec<f64>,
    #[serde(default = "defaults::stride")]
    pub sample_stride: usize,
}

impl Default for ConstraintsBlock {
    fn default() -> Self {
        Self {
            polyhedra: Vec::new(),
            obstacles: Vec::new(),
            obstacles_active: true,
            band_order: 0,
            margin: 0.0,
            member_nodes: Vec::new(),
            sample_stride: defaults::stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBlock {
    pub target: [f64; 2],
    pub horizon: f64,
    #[serde(default = "defaults::knots")]
    pub knots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(default)]
    pub waypoints: Vec<WaypointEntry>,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub bounds: ControlBounds,
    #[serde(default = "defaults::sharpness")]
    pub sharpness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Members in the verification grid (or quadrature nodes for `transform`).
    #[serde(default = "defaults::grid")]
    pub grid: usize,
    #[serde(default = "defaults::out")]
    pub out: String,
    #[serde(default = "defaults::tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<String>,
    #[serde(default = "defaults::restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub gradient: GradientMethod,
    #[serde(default)]
    pub exec: ExecMode,
    #[serde(default = "defaults::kkt_tol")]
    pub kkt_tol: f64,
    #[serde(default = "defaults::max_outer")]
    pub max_outer: usize,
    #[serde(default = "defaults::max_inner")]
    pub max_inner: usize,
    #[serde(default = "defaults::max_cycles")]
    pub max_cycles: usize,
    #[serde(default = "defaults::replan")]
    pub replan_every: usize,
    #[serde(default = "defaults::replan")]
    pub apply: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_beta: Option<f64>,
}

impl Default for RunBlock {
    fn default() -> Self {
        toml::from_str("").expect("all run fields have defaults")
    }
}

mod defaults {
    pub fn dt() -> f64 {
        0.01
    }
    pub fn big_m() -> f64 {
        super::DEFAULT_BIG_M
    }
    pub fn yes() -> bool {
        true
    }
    pub fn stride() -> usize {
        10
    }
    pub fn knots() -> usize {
        32
    }
    pub fn sharpness() -> f64 {
        10.0
    }
    pub fn grid() -> usize {
        50
    }
    pub fn out() -> String {
        "out".into()
    }
    pub fn tolerance() -> f64 {
        0.05
    }
    pub fn restarts() -> usize {
        3
    }
    pub fn kkt_tol() -> f64 {
        1e-4
    }
    pub fn max_outer() -> usize {
        30
    }
    pub fn max_inner() -> usize {
        3000
    }
    pub fn max_cycles() -> usize {
        8
    }
    pub fn replan() -> usize {
        10
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("{}", format_schema(.0))]
    Schema(Vec<SchemaError>),
}

fn format_schema(errs: &[SchemaError]) -> String {
    let lines: Vec<String> = errs.iter().map(|e| format!("  {e}")).collect();
    format!("{} schema error(s):\n{}", errs.len(), lines.join("\n"))
}

/// A named region after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedRegion {
    pub name: String,
    pub poly: Polyhedron,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedObstacle {
    pub name: String,
    pub spec: ObstacleSpec,
    pub inflate: f64,
}

/// Validated scenario with its geometry built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    /// Directory relative paths in the file resolve against.
    pub base_dir: PathBuf,
    pub interval: ParameterInterval,
    pub start: UnicycleState,
    pub steps: usize,
    pub keep_in: Vec<NamedRegion>,
    pub obstacles: Vec<NamedObstacle>,
    pub waypoints: Vec<NamedRegion>,
    pub formula: Option<StlFormula>,
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario_str(&text, &base)
}

pub fn parse_scenario_str(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    Scenario::from_file(file, base_dir)
}

struct Check {
    errs: Vec<SchemaError>,
}

impl Check {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errs.push(SchemaError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.fail(path, format!("must be finite and positive, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.fail(path, format!("must be finite and non-negative, got {v}"));
        }
    }
}

fn region(entry: &RegionEntry, path: &str, check: &mut Check) -> Option<Polyhedron> {
    let boxed = entry.lo.is_some() || entry.hi.is_some();
    let rowed = entry.rows.is_some() || entry.lower.is_some() || entry.upper.is_some();
    let built = match (boxed, rowed) {
        (true, true) => {
            check.fail(path, "give either lo/hi or rows/lower/upper, not both");
            return None;
        }
        (false, false) => {
            check.fail(path, "missing geometry: give lo/hi or rows/lower/upper");
            return None;
        }
        (true, false) => match (entry.lo, entry.hi) {
            (Some(lo), Some(hi)) => Polyhedron::from_box(lo, hi),
            _ => {
                check.fail(path, "a box needs both lo and hi");
                return None;
            }
        },
        (false, true) => match (&entry.rows, &entry.lower, &entry.upper) {
            (Some(r), Some(l), Some(u)) => Polyhedron::new(r.clone(), l.clone(), u.clone()),
            _ => {
                check.fail(path, "rows, lower and upper must all be given");
                return None;
            }
        },
    };
    match built {
        Ok(p) => Some(p),
        Err(e) => {
            check.fail(path, e.to_string());
            None
        }
    }
}

fn obstacle(entry: &ObstacleEntry, path: &str, check: &mut Check) -> Option<ObstacleSpec> {
    let boxed = entry.lo.is_some() || entry.hi.is_some();
    let rowed = entry.rows.is_some() || entry.bounds.is_some();
    if !(entry.big_m.is_finite() && entry.big_m > 0.0) {
        check.fail(format!("{path}.big_m"), format!("must be finite and positive, got {}", entry.big_m));
        return None;
    }
    check.non_negative(&format!("{path}.inflate"), entry.inflate);
    let built = match (boxed, rowed) {
        (true, true) => {
            check.fail(path, "give either lo/hi or rows/bounds, not both");
            return None;
        }
        (false, false) => {
            check.fail(path, "missing geometry: give lo/hi or rows/bounds");
            return None;
        }
        (true, false) => match (entry.lo, entry.hi) {
            (Some(lo), Some(hi)) => ObstacleSpec::from_box(lo, hi, entry.big_m),
            _ => {
                check.fail(path, "a box needs both lo and hi");
                return None;
            }
        },
        (false, true) => match (&entry.rows, &entry.bounds) {
            (Some(r), Some(b)) => ObstacleSpec::new(r.clone(), b.clone(), entry.big_m),
            _ => {
                check.fail(path, "rows and bounds must both be given");
                return None;
            }
        },
    };
    match built {
        Ok(o) => Some(o),
        Err(e) => {
            check.fail(path, e.to_string());
            None
        }
    }
}

fn unique_names<'a>(names: impl Iterator<Item = (String, &'a str)>, check: &mut Check) {
    let mut seen = HashSet::new();
    for (path, name) in names {
        if name.is_empty() {
            check.fail(format!("{path}.name"), "must not be empty");
        } else if !seen.insert(name.to_string()) {
            check.fail(format!("{path}.name"), format!("duplicate region name '{name}'"));
        }
    }
}

impl Scenario {
    pub fn from_file(file: ScenarioFile, base_dir: &Path) -> Result<Self, ScenarioError> {
        let mut check = Check { errs: Vec::new() };
        let m = &file.model;
        let interval = match ParameterInterval::new(m.interval[0], m.interval[1]) {
            Ok(i) => Some(i),
            Err(e) => {
                check.fail("model.interval", e.to_string());
                None
            }
        };
        if m.order > 40 {
            check.fail("model.order", format!("must be at most 40, got {}", m.order));
        }
        check.positive("model.dt", m.dt);
        let s = m.start;
        if ![s.x, s.y, s.theta].iter().all(|v| v.is_finite()) {
            check.fail("model.start", "pose must be finite");
        }

        let t = &file.task;
        check.positive("task.horizon", t.horizon);
        let mut steps = 0;
        if t.horizon.is_finite() && t.horizon > 0.0 && m.dt.is_finite() && m.dt > 0.0 {
            let ratio = t.horizon / m.dt;
            let rounded = ratio.round();
            if (ratio - rounded).abs() > 1e-6 * ratio.max(1.0) || rounded < 1.0 {
                check.fail(
                    "task.horizon",
                    format!("task.horizon ({}) is not a whole number of model.dt ({}) steps", t.horizon, m.dt),
                );
            } else {
                steps = rounded as usize;
                if t.knots == 0 {
                    check.fail("task.knots", "must be positive");
                } else if steps % t.knots != 0 {
                    check.fail(
                        "task.knots",
                        format!(
                            "task.knots ({}) must divide the {steps} integration steps of task.horizon ({}) / model.dt ({})",
                            t.knots, t.horizon, m.dt
                        ),
                    );
                }
            }
        }
        check.positive("task.sharpness", t.sharpness);
        check.positive("task.bounds.v_max", t.bounds.v_max);
        check.positive("task.bounds.omega_max", t.bounds.omega_max);
        check.non_negative("task.weights.rho", t.weights.rho);
        check.non_negative("task.weights.terminal", t.weights.terminal);
        check.non_negative("task.weights.control", t.weights.control);
        if !t.target.iter().all(|v| v.is_finite()) {
            check.fail("task.target", "must be finite");
        }

        let c = &file.constraints;
        if c.band_order > m.order {
            check.fail(
                "constraints.band_order",
                format!("band order {} exceeds model.order {}", c.band_order, m.order),
            );
        }
        check.non_negative("constraints.margin", c.margin);
        if c.sample_stride == 0 {
            check.fail("constraints.sample_stride", "must be positive");
        }
        if let Some(iv) = interval {
            for (i, b) in c.member_nodes.iter().enumerate() {
                if !iv.contains(*b) {
                    check.fail(
                        format!("constraints.member_nodes[{i}]"),
                        format!("{b} lies outside model.interval [{}, {}]", iv.lo(), iv.hi()),
                    );
                }
            }
        }
        if !c.member_nodes.is_empty() && c.polyhedra.is_empty() {
            check.fail("constraints.member_nodes", "member nodes need at least one polyhedron");
        }

        unique_names(
            c.polyhedra
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("constraints.polyhedra[{i}]"), p.name.as_str()))
                .chain(
                    t.waypoints
                        .iter()
                        .enumerate()
                        .map(|(i, w)| (format!("task.waypoints[{i}]"), w.name.as_str())),
                )
                .chain(
                    c.obstacles
                        .iter()
                        .enumerate()
                        .map(|(i, o)| (format!("constraints.obstacles[{i}]"), o.name.as_str())),
                ),
            &mut check,
        );

        let mut keep_in = Vec::new();
        for (i, p) in c.polyhedra.iter().enumerate() {
            let path = format!("constraints.polyhedra[{i}]");
            if let Some(poly) = region(p, &path, &mut check) {
                if c.margin > 0.0 {
                    if let Err(e) = poly.shrunk(c.margin) {
                        check.fail(path.clone(), format!("cannot shrink by constraints.margin: {e}"));
                    }
                }
                keep_in.push(NamedRegion {
                    name: p.name.clone(),
                    poly,
                });
            }
        }
        let mut obstacles = Vec::new();
        for (i, o) in c.obstacles.iter().enumerate() {
            let path = format!("constraints.obstacles[{i}]");
            if let Some(spec) = obstacle(o, &path, &mut check) {
                obstacles.push(NamedObstacle {
                    name: o.name.clone(),
                    spec,
                    inflate: o.inflate,
                });
            }
        }
        let mut waypoints = Vec::new();
        for (i, w) in t.waypoints.iter().enumerate() {
            let path = format!("task.waypoints[{i}]");
            if let Some(win) = w.window {
                if !(win[0].is_finite() && win[1].is_finite() && 0.0 <= win[0] && win[0] <= win[1] && win[1] <= t.horizon) {
                    check.fail(
                        format!("{path}.window"),
                        format!("window [{}, {}] must satisfy 0 <= a <= b <= task.horizon ({})", win[0], win[1], t.horizon),
                    );
                }
            }
            if let Some(poly) = region(&w.region(), &path, &mut check) {
                waypoints.push(NamedRegion {
                    name: w.name.clone(),
                    poly,
                });
            }
        }

        let mut formula = None;
        if check.errs.is_empty() {
            formula = build_formula(&file, &keep_in, &waypoints, &mut check);
            if let Some(f) = &formula {
                if let Err(e) = f.validate(t.horizon) {
                    check.fail("task.formula", e.to_string());
                }
            }
        }
        if !obstacles.is_empty() && c.obstacles_active && formula.is_none() && check.errs.is_empty() {
            check.fail(
                "task.formula",
                "obstacle problems are solved as visit-avoid problems and need a formula or a waypoint with a window",
            );
        }

        let r = &file.run;
        if r.grid == 0 {
            check.fail("run.grid", "must be positive");
        }
        check.non_negative("run.tolerance", r.tolerance);
        check.positive("run.kkt_tol", r.kkt_tol);
        if r.max_outer == 0 || r.max_inner == 0 || r.max_cycles == 0 {
            check.fail("run", "max_outer, max_inner and max_cycles must be positive");
        }
        if r.apply == 0 || r.apply > r.replan_every || r.replan_every > t.knots.max(1) {
            check.fail(
                "run.apply",
                format!(
                    "need 0 < run.apply ({}) <= run.replan_every ({}) <= task.knots ({})",
                    r.apply, r.replan_every, t.knots
                ),
            );
        }
        if let (Some(b), Some(iv)) = (r.plant_beta, interval) {
            if !(b.is_finite() && b > 0.0) {
                check.fail("run.plant_beta", format!("must be finite and positive, got {b}"));
            } else if !iv.contains(b) {
                check.fail(
                    "run.plant_beta",
                    format!("{b} lies outside model.interval [{}, {}]", iv.lo(), iv.hi()),
                );
            }
        }

        if !check.errs.is_empty() {
            return Err(ScenarioError::Schema(check.errs));
        }
        Ok(Scenario {
            interval: interval.expect("validated"),
            start: UnicycleState::new(s.x, s.y, s.theta),
            steps,
            keep_in,
            obstacles,
            waypoints,
            formula,
            base_dir: base_dir.to_path_buf(),
            file,
        })
    }

    pub fn order(&self) -> usize {
        self.file.model.order
    }

    pub fn dt(&self) -> f64 {
        self.file.model.dt
    }

    pub fn knots(&self) -> usize {
        self.file.task.knots
    }

    /// Obstacles that take part in planning (none when disabled).
    pub fn planning_obstacles(&self) -> &[NamedObstacle] {
        if self.file.constraints.obstacles_active {
            &self.obstacles
        } else {
            &[]
        }
    }

    pub fn ocp_spec(&self) -> moment_ensemble::Result<OcpSpec> {
        let n = self.order();
        let table = signed_part_integrals(n);
        let c = &self.file.constraints;
        let t = &self.file.task;
        let orders: Vec<usize> = (0..=c.band_order).collect();
        let mut bands = Vec::new();
        let mut nodes = Vec::new();
        for r in &self.keep_in {
            let plan = if c.margin > 0.0 { r.poly.shrunk(c.margin)? } else { r.poly.clone() };
            bands.extend(moment_polyhedron_bands(&plan, &table, &orders)?);
            nodes.extend(member_node_bands(&plan, self.interval, n, &c.member_nodes)?);
        }
        let obstacles = self
            .planning_obstacles()
            .iter()
            .map(|o| {
                let planned = if o.inflate > 0.0 { o.spec.inflated(o.inflate)? } else { o.spec.clone() };
                Ok(obstacle_disjunction(&planned, &table))
            })
            .collect::<moment_ensemble::Result<Vec<_>>>()?;
        Ok(OcpSpec {
            initial: MomentVector::point_mass(n, self.interval, &lift(&self.start)),
            target: point_target(t.target, n),
            dt: self.dt(),
            steps: self.steps,
            knots: t.knots,
            bounds: t.bounds,
            bands,
            nodes,
            obstacles,
            formula: self.formula.clone(),
            robustness: RobustnessConfig::new(t.sharpness)?,
            weights: t.weights,
            sample_stride: c.sample_stride,
        })
    }

    pub fn solver_options(&self) -> SolverOptions {
        let r = &self.file.run;
        SolverOptions {
            kkt_tol: r.kkt_tol,
            max_outer: r.max_outer,
            max_inner: r.max_inner,
            gradient: r.gradient,
            exec: r.exec,
            restarts: r.restarts,
            seed: r.seed,
            max_cycles: r.max_cycles,
            ..SolverOptions::default()
        }
    }

    pub fn receding_options(&self) -> RecedingOptions {
        RecedingOptions {
            replan_every: self.file.run.replan_every,
            apply: self.file.run.apply,
            solver: self.solver_options(),
        }
    }

    /// Ground-truth check against the true (uninflated, unshrunk) geometry.
    pub fn verification_spec(&self) -> VerificationSpec {
        VerificationSpec {
            start: self.start,
            interval: self.interval,
            members: self.file.run.grid,
            keep_in: self.keep_in.iter().map(|r| r.poly.clone()).collect(),
            obstacles: self.obstacles.iter().map(|o| o.spec.clone()).collect(),
            goal: self.file.task.target,
            formula: self.formula.clone(),
            order: self.order(),
            tolerance: self.file.run.tolerance,
            exec: self.file.run.exec,
        }
    }

    /// Plant for receding runs: one member at `plant_beta`, or the verification grid.
    pub fn plant(&self) -> moment_ensemble::Result<EnsembleGrid> {
        match self.file.run.plant_beta {
            Some(b) => EnsembleGrid::single(self.interval, b),
            None => EnsembleGrid::uniform(self.interval, self.file.run.grid),
        }
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolved configuration, sufficient to reproduce a run.
    pub fn echo(&self) -> String {
        toml::to_string(&self.file).expect("scenario serializes")
    }
}

fn build_formula(
    file: &ScenarioFile,
    keep_in: &[NamedRegion],
    waypoints: &[NamedRegion],
    check: &mut Check,
) -> Option<StlFormula> {
    let table = signed_part_integrals(0);
    let lookup = |name: &str| -> Result<StlFormula, String> {
        let poly = waypoints
            .iter()
            .chain(keep_in)
            .find(|r| r.name == name)
            .map(|r| &r.poly)
            .ok_or_else(|| format!("inside({name}) does not name a waypoint or polyhedron"))?;
        region_formula(poly, &table, 0).map_err(|e| e.to_string())
    };
    match &file.task.formula {
        Some(src) => match formula::parse(src) {
            Ok(expr) => match expr.to_stl(&lookup) {
                Ok(f) => Some(f),
                Err(e) => {
                    check.fail("task.formula", e);
                    None
                }
            },
            Err(e) => {
                check.fail("task.formula", e.to_string());
                None
            }
        },
        None => {
            let windowed: Vec<StlFormula> = file
                .task
                .waypoints
                .iter()
                .filter_map(|w| w.window.map(|win| (w, win)))
                .filter_map(|(w, win)| lookup(&w.name).ok().map(|r| StlFormula::eventually(win, r)))
                .collect();
            if windowed.is_empty() {
                None
            } else {
                Some(StlFormula::and(windowed))
            }
        }
    }
}
