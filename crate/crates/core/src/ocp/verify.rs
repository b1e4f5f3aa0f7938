//! Ground-truth check of a control sequence on a fresh member grid.

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    lift, rollout_ensemble, ControlSequence, EnsembleGrid, MemberTrajectory, ParameterInterval, RolloutOptions,
    UnicycleState,
};
use crate::error::Result;
use crate::geometry::{ObstacleSpec, Polyhedron};
use crate::moments::MomentVector;
use crate::par::{self, ExecMode};
use crate::stl::{robustness_exact, StlFormula, TimedMomentSignal};

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationSpec {
    pub start: UnicycleState,
    pub interval: ParameterInterval,
    pub members: usize,
    pub keep_in: Vec<Polyhedron>,
    pub obstacles: Vec<ObstacleSpec>,
    pub goal: [f64; 2],
    pub formula: Option<StlFormula>,
    /// Moment order used when scoring a single member against the formula.
    pub order: usize,
    pub tolerance: f64,
    pub exec: ExecMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub members: usize,
    /// Largest distance outside any keep-in polyhedron over members and steps.
    pub max_keep_in_violation: f64,
    /// Largest penetration depth into any obstacle over members and steps.
    pub max_obstacle_penetration: f64,
    /// Smallest exact robustness of a single member, scored as a point mass.
    pub min_member_robustness: Option<f64>,
    pub terminal_mean: [f64; 2],
    pub terminal_mean_error: [f64; 2],
    pub tolerance: f64,
    pub passed: bool,
}

/// Rolls `controls` (integration-step grid) out on a uniform grid and measures
/// the true constraint violations.
pub fn verify_controls(
    spec: &VerificationSpec,
    controls: &ControlSequence,
) -> Result<(VerificationSummary, Vec<MemberTrajectory>)> {
    let grid = EnsembleGrid::uniform(spec.interval, spec.members)?;
    let z0 = lift(&spec.start);
    let trajs = rollout_ensemble(&grid, &z0, controls, RolloutOptions::default(), spec.exec)?;

    let mut keep = 0.0f64;
    let mut pen = 0.0f64;
    for tr in &trajs {
        for z in &tr.states {
            let p = z.position();
            for poly in &spec.keep_in {
                keep = keep.max(poly.distance_violation(p));
            }
            for obs in &spec.obstacles {
                pen = pen.max(obs.penetration(p));
            }
        }
    }

    let min_rob = match &spec.formula {
        Some(f) => {
            let vals = par::try_map_indexed(spec.exec, trajs.len(), |i| {
                let states: Vec<MomentVector> = trajs[i]
                    .states
                    .iter()
                    .map(|z| MomentVector::point_mass(spec.order, spec.interval, z))
                    .collect();
                robustness_exact(f, &TimedMomentSignal::new(controls.dt(), &states)?, 0)
            })?;
            Some(vals.into_iter().fold(f64::INFINITY, f64::min))
        }
        None => None,
    };

    let wsum: f64 = grid.weights().iter().sum();
    let mut mean = [0.0; 2];
    for (tr, w) in trajs.iter().zip(grid.weights()) {
        let p = tr.final_state().position();
        mean[0] += w * p[0] / wsum;
        mean[1] += w * p[1] / wsum;
    }
    let err = [(mean[0] - spec.goal[0]).abs(), (mean[1] - spec.goal[1]).abs()];
    let summary = VerificationSummary {
        members: spec.members,
        max_keep_in_violation: keep,
        max_obstacle_penetration: pen,
        min_member_robustness: min_rob,
        terminal_mean: mean,
        terminal_mean_error: err,
        tolerance: spec.tolerance,
        passed: keep <= spec.tolerance && pen <= spec.tolerance,
    };
    Ok((summary, trajs))
}
