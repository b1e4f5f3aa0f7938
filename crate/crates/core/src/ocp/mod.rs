//! Optimal control in moment space.
//!
//! Single shooting over piecewise-constant controls. Continuous problems are
//! solved by an augmented-Lagrangian loop around a projected
//! Barzilai–Borwein gradient method; obstacle binaries are handled by
//! alternation with an exhaustive oracle for small instances.

mod binaries;
mod init;
mod receding;
mod shooting;
mod solver;
mod verify;

pub use binaries::{assign_binaries, exhaustive_visit_avoid, solve_visit_avoid, ExhaustiveLimits};
pub use init::{arc_initialization, perturbed, restart_point};
pub use receding::{open_loop_run, receding_horizon_run, RecedingOptions, RecedingRun, ReplanRecord};
pub use shooting::{
    evaluate, expand_controls, fd_gradient, objective, shoot, Evaluation, GradientMethod, Multipliers,
};
pub use solver::{solve_continuous, solve_exploration, OuterRecord};
pub use verify::{verify_controls, VerificationSpec, VerificationSummary};

use serde::{Deserialize, Serialize};

use crate::ensemble::{Control, ControlSequence, UnicycleState};
use crate::error::{Error, Result};
use crate::geometry::{DisjunctiveMomentConstraint, MemberNodeConstraint, MomentBandConstraint};
use crate::moments::{MomentTrajectory, MomentVector};
use crate::par::ExecMode;
use crate::stl::{RobustnessConfig, StlFormula};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlBounds {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self {
            v_max: 2.0,
            omega_max: 2.0,
        }
    }
}

impl ControlBounds {
    pub fn project(&self, u: Control) -> Control {
        Control::new(
            u.v.clamp(-self.v_max, self.v_max),
            u.omega.clamp(-self.omega_max, self.omega_max),
        )
    }
}

/// Objective weights `(w_ρ, w_T, w_u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub rho: f64,
    pub terminal: f64,
    pub control: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            rho: 1.0,
            terminal: 1.0,
            control: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    pub initial: MomentVector,
    /// Target position moments `m̃_F`, one 2-vector per order.
    pub target: Vec<[f64; 2]>,
    /// Integration step (s).
    pub dt: f64,
    pub steps: usize,
    pub knots: usize,
    pub bounds: ControlBounds,
    pub bands: Vec<MomentBandConstraint>,
    /// Keep-in rows on members reconstructed at fixed parameter values.
    pub nodes: Vec<MemberNodeConstraint>,
    pub obstacles: Vec<DisjunctiveMomentConstraint>,
    pub formula: Option<StlFormula>,
    pub robustness: RobustnessConfig,
    pub weights: Weights,
    /// Constraints are enforced every `sample_stride` integration steps.
    pub sample_stride: usize,
}

impl OcpSpec {
    /// Checks dimensions; call before solving.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Problem(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return fail(format!("integration step must be positive, got {}", self.dt));
        }
        if self.steps == 0 || self.knots == 0 {
            return fail("steps and knots must be positive".into());
        }
        if !self.steps.is_multiple_of(self.knots) {
            return fail(format!(
                "knots ({}) must divide the number of integration steps ({})",
                self.knots, self.steps
            ));
        }
        if self.sample_stride == 0 {
            return fail("sample stride must be positive".into());
        }
        if !(self.bounds.v_max > 0.0 && self.bounds.omega_max > 0.0) {
            return fail("control bounds must be positive".into());
        }
        let w = self.weights;
        if [w.rho, w.terminal, w.control].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return fail("weights must be finite and non-negative".into());
        }
        let n = self.initial.order();
        if let Some(b) = self.bands.iter().find(|b| b.order > n) {
            return fail(format!("band order {} exceeds truncation order {n}", b.order));
        }
        if let Some(c) = self.nodes.iter().find(|c| c.weights.len() != n + 1) {
            return fail(format!(
                "node constraint at {} carries {} weights for truncation order {n}",
                c.beta,
                c.weights.len()
            ));
        }
        if let Some(f) = &self.formula {
            f.validate(self.horizon())
                .map_err(|e| Error::Problem(format!("formula: {e}")))?;
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps_per_knot(&self) -> usize {
        self.steps / self.knots
    }

    pub fn knot_dt(&self) -> f64 {
        self.steps_per_knot() as f64 * self.dt
    }

    /// Integration steps at which constraints are enforced.
    pub fn sample_steps(&self) -> Vec<usize> {
        let mut s: Vec<usize> = (self.sample_stride..=self.steps).step_by(self.sample_stride).collect();
        if s.last() != Some(&self.steps) {
            s.push(self.steps);
        }
        s
    }

    /// Mean start pose recovered from the order-0 initial block.
    pub fn start_pose(&self) -> UnicycleState {
        let b = self.initial.block(0);
        let r2 = std::f64::consts::SQRT_2;
        UnicycleState::new(b[0] / r2, b[1] / r2, b[3].atan2(b[2]))
    }

    /// Goal position recovered from the order-0 target block.
    pub fn goal(&self) -> [f64; 2] {
        let r2 = std::f64::consts::SQRT_2;
        let t = self.target.first().copied().unwrap_or([0.0, 0.0]);
        [t[0] / r2, t[1] / r2]
    }
}

/// Position moments of a point mass at `goal`.
pub fn point_target(goal: [f64; 2], order: usize) -> Vec<[f64; 2]> {
    let r2 = std::f64::consts::SQRT_2;
    let mut t = vec![[0.0, 0.0]; order + 1];
    t[0] = [r2 * goal[0], r2 * goal[1]];
    t
}

/// Controls per knot plus, per constraint sample, the selected facet of each obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub controls: Vec<Control>,
    pub binaries: Vec<Vec<usize>>,
}

impl DecisionVector {
    pub fn new(controls: Vec<Control>) -> Self {
        Self {
            controls,
            binaries: Vec::new(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.controls.iter().flat_map(|u| [u.v, u.omega]).collect()
    }

    pub fn set_flat(&mut self, x: &[f64]) {
        for (u, p) in self.controls.iter_mut().zip(x.chunks_exact(2)) {
            *u = Control::new(p[0], p[1]);
        }
    }

    /// One-hot binaries `z[sample][obstacle][facet]`.
    pub fn one_hot(&self, spec: &OcpSpec) -> Vec<Vec<Vec<u8>>> {
        self.binaries
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&spec.obstacles)
                    .map(|(&i, d)| (0..d.facets.len()).map(|f| u8::from(f == i)).collect())
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub kkt_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    pub gradient: GradientMethod,
    pub exec: ExecMode,
    pub restarts: usize,
    pub seed: u64,
    pub max_cycles: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-4,
            max_outer: 30,
            max_inner: 3000,
            initial_penalty: 10.0,
            max_penalty: 1e8,
            gradient: GradientMethod::Adjoint,
            exec: ExecMode::default(),
            restarts: 3,
            seed: 0,
            max_cycles: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Objective to maximize, with smooth robustness.
    pub objective: f64,
    /// Exact robustness on the solved moment trajectory.
    pub robustness_exact: Option<f64>,
    pub robustness_smooth: Option<f64>,
    pub terminal_moment_error: f64,
    pub terminal_mean: [f64; 2],
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub history: Vec<OuterRecord>,
    pub decision: DecisionVector,
    pub knot_dt: f64,
    pub restarts_used: usize,
    pub cycles: usize,
    #[serde(skip)]
    pub trajectory: MomentTrajectory,
    pub verification: Option<VerificationSummary>,
    pub wall_time_s: f64,
}

impl SolveReport {
    /// Knot controls as a sequence on the knot grid.
    pub fn knot_controls(&self) -> ControlSequence {
        ControlSequence::new(self.knot_dt, self.decision.controls.clone()).expect("report controls are valid")
    }
}
