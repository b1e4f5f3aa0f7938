//! Shrinking-horizon replanning against a simulated plant.

use serde::{Deserialize, Serialize};

use super::binaries::solve_visit_avoid_from;
use super::shooting::expand_controls;
use super::solver::solve_with_restarts;
use super::{DecisionVector, OcpSpec, SolveReport, SolverOptions};
use crate::ensemble::{
    lift, rollout_ensemble, rollout_member, unlift, Control, ControlSequence, EnsembleGrid, LiftedState, MemberTrajectory,
    RolloutOptions, UnicycleState,
};
use crate::error::{Error, Result};
use crate::moments::MomentVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecedingOptions {
    /// Knots between replans.
    pub replan_every: usize,
    /// Knots of each plan sent to the plant; the rest of the cycle holds zero control.
    pub apply: usize,
    pub solver: SolverOptions,
}

impl Default for RecedingOptions {
    fn default() -> Self {
        Self {
            replan_every: 10,
            apply: 10,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplanRecord {
    pub cycle: usize,
    pub start_knot: usize,
    pub knots: usize,
    pub measured: UnicycleState,
    pub converged: bool,
    pub objective: f64,
    pub robustness_exact: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RecedingRun {
    pub plant: Vec<MemberTrajectory>,
    /// Controls actually applied, integration-step grid.
    pub applied: ControlSequence,
    pub records: Vec<ReplanRecord>,
    /// The first plan, for open-loop comparison.
    pub first_plan: SolveReport,
}

fn solve(spec: &OcpSpec, opts: &SolverOptions, warm: Option<DecisionVector>) -> Result<SolveReport> {
    if spec.formula.is_some() {
        solve_visit_avoid_from(spec, opts, warm)
    } else if spec.obstacles.is_empty() {
        solve_with_restarts(spec, opts, warm)
    } else {
        Err(Error::Problem("obstacles without a formula are not supported".into()))
    }
}

fn measure(grid: &EnsembleGrid, states: &[LiftedState]) -> Result<UnicycleState> {
    let wsum: f64 = grid.weights().iter().sum();
    let mut acc = [0.0; 4];
    for (z, w) in states.iter().zip(grid.weights()) {
        for (a, v) in acc.iter_mut().zip(z.to_array()) {
            *a += w * v / wsum;
        }
    }
    let r = acc[2].hypot(acc[3]);
    if r < 1e-9 {
        return Err(Error::InvalidState("plant headings cancel out".into()));
    }
    unlift(&LiftedState::new(acc[0], acc[1], acc[2] / r, acc[3] / r))
}

/// Replans every `replan_every` knots from the measured plant state, re-seeding
/// the moments as a point mass and shrinking the horizon.
pub fn receding_horizon_run(spec: &OcpSpec, plant: &EnsembleGrid, opts: &RecedingOptions) -> Result<RecedingRun> {
    spec.validate()?;
    if opts.apply == 0 || opts.apply > opts.replan_every || opts.replan_every > spec.knots {
        return Err(Error::Problem(format!(
            "need 0 < apply ({}) <= replan_every ({}) <= knots ({})",
            opts.apply, opts.replan_every, spec.knots
        )));
    }
    let spk = spec.steps_per_knot();
    let start = spec.start_pose();
    let mut states = vec![lift(&start); plant.len()];
    let mut paths: Vec<Vec<LiftedState>> = states.iter().map(|z| vec![*z]).collect();
    let mut applied: Vec<Control> = Vec::with_capacity(spec.steps);
    let mut records = Vec::new();
    let mut first_plan = None;
    let mut warm: Option<DecisionVector> = None;
    let mut k0 = 0;
    let mut cycle = 0;
    while k0 < spec.knots {
        let measured = if cycle == 0 { start } else { measure(plant, &states)? };
        let knots = spec.knots - k0;
        let mut sub = spec.clone();
        sub.initial = MomentVector::point_mass(spec.initial.order(), spec.initial.interval(), &lift(&measured));
        sub.knots = knots;
        sub.steps = knots * spk;
        sub.formula = spec.formula.as_ref().map(|f| f.shifted(k0 as f64 * spec.knot_dt()));
        let report = solve(&sub, &opts.solver, warm.take()).map_err(|e| Error::Cycle {
            cycle,
            source: Box::new(e),
        })?;
        if !report.converged {
            return Err(Error::Cycle {
                cycle,
                source: Box::new(Error::NotConverged {
                    kkt_residual: report.kkt_residual,
                    max_violation: report.max_violation,
                }),
            });
        }
        records.push(ReplanRecord {
            cycle,
            start_knot: k0,
            knots,
            measured,
            converged: report.converged,
            objective: report.objective,
            robustness_exact: report.robustness_exact,
        });

        let cycle_knots = opts.replan_every.min(knots);
        let mut plan: Vec<Control> = report.decision.controls[..opts.apply.min(knots)].to_vec();
        plan.resize(cycle_knots, Control::default());
        let plan_seq = ControlSequence::new(spec.dt, plan.iter().flat_map(|u| std::iter::repeat_n(*u, spk)).collect())?;
        for (i, z) in states.iter_mut().enumerate() {
            let tr = rollout_member(z, plant.samples()[i], &plan_seq, RolloutOptions::default())?;
            paths[i].extend_from_slice(&tr.states[1..]);
            *z = tr.final_state();
        }
        applied.extend_from_slice(plan_seq.pairs());

        if report.decision.controls.len() > cycle_knots {
            warm = Some(DecisionVector::new(report.decision.controls[cycle_knots..].to_vec()));
        }
        if first_plan.is_none() {
            first_plan = Some(report);
        }
        k0 += cycle_knots;
        cycle += 1;
    }
    let plant_trajs = paths
        .into_iter()
        .zip(plant.samples())
        .map(|(states, &beta)| MemberTrajectory { beta, dt: spec.dt, states })
        .collect();
    Ok(RecedingRun {
        plant: plant_trajs,
        applied: ControlSequence::new(spec.dt, applied)?,
        records,
        first_plan: first_plan.expect("at least one cycle"),
    })
}

/// Broadcasts the knot controls of a plan to the plant without feedback.
pub fn open_loop_run(spec: &OcpSpec, plan: &[Control], plant: &EnsembleGrid) -> Result<Vec<MemberTrajectory>> {
    let seq = expand_controls(spec, plan)?;
    rollout_ensemble(plant, &lift(&spec.start_pose()), &seq, RolloutOptions::default(), crate::par::ExecMode::Sequential)
}
