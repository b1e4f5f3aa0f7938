//! Obstacle binaries: max-slack assignment, alternation and the exhaustive oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::shooting::shoot;
use super::solver::{build_report, solve_fixed, solve_with_restarts, ContinuousResult};
use super::{init, DecisionVector, OcpSpec, SolveReport, SolverOptions};
use crate::error::{Error, Result};
use crate::moments::MomentTrajectory;
use crate::par;

/// Per constraint sample and obstacle, the facet with the largest slack at the
/// current mean position; ties go to the lowest index.
pub fn assign_binaries(spec: &OcpSpec, traj: &MomentTrajectory) -> Vec<Vec<usize>> {
    spec.sample_steps()
        .iter()
        .map(|&s| {
            let m = &traj.states[s];
            spec.obstacles
                .iter()
                .map(|obs| {
                    let mut best = 0;
                    let mut best_slack = f64::NEG_INFINITY;
                    for i in 0..obs.facets.len() {
                        let slack = obs.active_slack(i, m);
                        if slack > best_slack {
                            best = i;
                            best_slack = slack;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

fn alternate(spec: &OcpSpec, mut d: DecisionVector, opts: &SolverOptions) -> Result<(ContinuousResult, usize, bool)> {
    d.binaries = assign_binaries(spec, &shoot(spec, &d)?);
    let mut cycles = 0;
    loop {
        cycles += 1;
        let res = solve_fixed(spec, d, opts)?;
        let next = assign_binaries(spec, &res.eval.trajectory);
        let stable = next == res.decision.binaries;
        if stable || cycles >= opts.max_cycles {
            return Ok((res, cycles, stable));
        }
        d = res.decision.clone();
        d.binaries = next;
    }
}

/// Visit-avoid problem: alternate continuous solves with binary re-assignment
/// until the binaries are stable, with seeded restarts on failure.
pub fn solve_visit_avoid(spec: &OcpSpec, opts: &SolverOptions) -> Result<SolveReport> {
    solve_visit_avoid_from(spec, opts, None)
}

pub(crate) fn solve_visit_avoid_from(
    spec: &OcpSpec,
    opts: &SolverOptions,
    warm: Option<DecisionVector>,
) -> Result<SolveReport> {
    if spec.formula.is_none() {
        return Err(Error::Problem("visit-avoid problems need a formula".into()));
    }
    if spec.obstacles.is_empty() {
        return solve_with_restarts(spec, opts, warm);
    }
    let start = Instant::now();
    spec.validate()?;
    let base = warm.unwrap_or_else(|| init::arc_initialization(spec));
    let attempts = par::run_until(
        opts.exec,
        opts.restarts + 1,
        |r| {
            let (mut res, cycles, stable) = alternate(spec, init::restart_point(&base, spec, opts, r), opts)?;
            res.converged &= stable;
            Ok((res, cycles))
        },
        |(res, _)| res.converged,
    )?;
    let used = attempts.len() - 1;
    let mut best: Option<(ContinuousResult, usize)> = None;
    for (res, cycles) in attempts {
        if best.as_ref().is_none_or(|(b, _)| res.better_than(b)) {
            best = Some((res, cycles));
        }
    }
    let (res, cycles) = best.expect("at least one attempt");
    build_report(spec, res, used, cycles, start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveLimits {
    pub max_obstacles: usize,
    pub max_segments: usize,
    pub max_combinations: usize,
}

impl Default for ExhaustiveLimits {
    fn default() -> Self {
        Self {
            max_obstacles: 2,
            max_segments: 8,
            max_combinations: 4096,
        }
    }
}

/// Oracle: the horizon is cut into `segments` equal pieces and every
/// segment-wise facet choice is solved with binaries fixed. Returns the best
/// feasible solution by objective.
pub fn exhaustive_visit_avoid(
    spec: &OcpSpec,
    segments: usize,
    limits: ExhaustiveLimits,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    spec.validate()?;
    if spec.obstacles.is_empty() || spec.obstacles.len() > limits.max_obstacles {
        return Err(Error::Problem(format!(
            "exhaustive search needs 1 to {} obstacles, got {}",
            limits.max_obstacles,
            spec.obstacles.len()
        )));
    }
    if segments == 0 || segments > limits.max_segments {
        return Err(Error::Problem(format!(
            "exhaustive search needs 1 to {} segments, got {segments}",
            limits.max_segments
        )));
    }
    let per_segment: usize = spec.obstacles.iter().map(|o| o.facets.len()).product();
    let total = (0..segments).try_fold(1usize, |acc, _| acc.checked_mul(per_segment));
    let total = match total {
        Some(t) if t <= limits.max_combinations => t,
        _ => {
            return Err(Error::Problem(format!(
                "exhaustive search over {per_segment}^{segments} combinations exceeds the cap of {}",
                limits.max_combinations
            )))
        }
    };
    let samples = spec.sample_steps().len();
    let base = init::arc_initialization(spec);
    let single = SolverOptions { restarts: 0, ..*opts };
    let results = par::try_map_indexed(opts.exec, total, |combo| {
        let mut code = combo;
        let choices: Vec<Vec<usize>> = (0..segments)
            .map(|_| {
                spec.obstacles
                    .iter()
                    .map(|o| {
                        let f = code % o.facets.len();
                        code /= o.facets.len();
                        f
                    })
                    .collect()
            })
            .collect();
        let mut d = base.clone();
        d.binaries = (0..samples).map(|i| choices[i * segments / samples].clone()).collect();
        solve_fixed(spec, d, &single)
    })?;
    let mut best: Option<ContinuousResult> = None;
    for res in results {
        if best.as_ref().is_none_or(|b| res.better_than(b)) {
            best = Some(res);
        }
    }
    build_report(spec, best.expect("at least one combination"), 0, total, start)
}
