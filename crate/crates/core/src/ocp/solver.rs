//! Augmented-Lagrangian outer loop around a projected limited-memory quasi-Newton inner solver.

use std::time::Instant;

use serde::Serialize;

use super::shooting::{constraint_count, evaluate, merit_gradient, Evaluation, Multipliers};
use super::{init, ControlBounds, DecisionVector, OcpSpec, SolveReport, SolverOptions};
use crate::ensemble::Control;
use crate::error::{Error, Result};
use crate::par;
use crate::stl::{robustness_exact, TimedMomentSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterRecord {
    pub iteration: usize,
    pub accepted: bool,
    pub penalty: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub objective: f64,
    pub inner_iterations: usize,
}

/// Result of one continuous solve with binaries held fixed.
#[derive(Debug, Clone)]
pub(crate) struct ContinuousResult {
    pub decision: DecisionVector,
    pub eval: Evaluation,
    pub converged: bool,
    pub kkt: f64,
    pub history: Vec<OuterRecord>,
}

impl ContinuousResult {
    /// Ordering key: converged first, then smaller violation, then larger objective.
    pub fn better_than(&self, other: &ContinuousResult) -> bool {
        if self.converged != other.converged {
            return self.converged;
        }
        let (a, b) = (self.eval.max_violation(), other.eval.max_violation());
        if (a - b).abs() > 1e-9 {
            return a < b;
        }
        self.eval.objective > other.eval.objective
    }
}

fn project(x: &mut [f64], bounds: &ControlBounds) {
    for p in x.chunks_exact_mut(2) {
        let u = bounds.project(Control::new(p[0], p[1]));
        p[0] = u.v;
        p[1] = u.omega;
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &ControlBounds) -> f64 {
    let mut y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    project(&mut y, bounds);
    y.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct InnerResult {
    eval: Evaluation,
    pg: f64,
    iterations: usize,
}

const MEMORY: usize = 10;

/// Variables held at a bound with the gradient pushing outward.
fn bound_mask(x: &[f64], g: &[f64], bounds: &ControlBounds) -> Vec<bool> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            let b = if i % 2 == 0 { bounds.v_max } else { bounds.omega_max };
            (xi >= b - 1e-12 && gi < 0.0) || (xi <= -b + 1e-12 && gi > 0.0)
        })
        .collect()
}

/// Two-loop recursion restricted to the free variables.
fn lbfgs_direction(g: &[f64], fixed: &[bool], pairs: &[(Vec<f64>, Vec<f64>)], gamma: f64) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(fixed).map(|(x, &f)| if f { 0.0 } else { *x }).collect() };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 1e-16 {
            alphas.push(None);
            continue;
        }
        let a = dot(&s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(&y) {
            *qi -= a * yi;
        }
        alphas.push(Some((a, sy)));
    }
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let Some((a, sy)) = a else { continue };
        let (s, y) = (mask(s), mask(y));
        let b = dot(&y, &q) / sy;
        for (qi, si) in q.iter_mut().zip(&s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

fn inner(spec: &OcpSpec, d: &mut DecisionVector, mult: &Multipliers, opts: &SolverOptions) -> Result<InnerResult> {
    let bounds = spec.bounds;
    let mut x = d.flat();
    let (mut e, mut g) = merit_gradient(spec, d, Some(mult), opts.gradient, opts.exec)?;
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut gamma = 1.0 / gmax.max(1.0);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut pg = projected_gradient_norm(&x, &g, &bounds);
    let mut it = 0;
    while it < opts.max_inner && pg > opts.kkt_tol {
        it += 1;
        let fixed = bound_mask(&x, &g, &bounds);
        let mut dir = lbfgs_direction(&g, &fixed, &pairs, gamma);
        if dot(&g, &dir) >= 0.0 {
            pairs.clear();
            dir = g.iter().map(|v| -gamma * v).collect();
        }
        let mut accepted = None;
        let mut a = 1.0;
        for _ in 0..50 {
            let mut xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + a * di).collect();
            project(&mut xt, &bounds);
            let step: Vec<f64> = xt.iter().zip(&x).map(|(p, q)| p - q).collect();
            let slope = dot(&g, &step);
            if slope >= 0.0 {
                a *= 0.5;
                continue;
            }
            let mut dt = d.clone();
            dt.set_flat(&xt);
            let (et, gt) = match merit_gradient(spec, &dt, Some(mult), opts.gradient, opts.exec) {
                Ok(v) => v,
                Err(Error::Diverged { .. }) => {
                    a *= 0.5;
                    continue;
                }
                Err(err) => return Err(err),
            };
            if et.merit <= e.merit + 1e-4 * slope {
                accepted = Some((xt, dt, et, gt));
                break;
            }
            a *= 0.5;
        }
        let Some((xt, dt, et, gt)) = accepted else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(p, q)| p - q).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(p, q)| p - q).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 {
            gamma = (sy / dot(&y, &y)).clamp(1e-10, 1e6);
            pairs.push((s, y));
            if pairs.len() > MEMORY {
                pairs.remove(0);
            }
        }
        let stalled = (e.merit - et.merit).abs() <= 1e-15 * (1.0 + e.merit.abs());
        x = xt;
        *d = dt;
        e = et;
        g = gt;
        pg = projected_gradient_norm(&x, &g, &bounds);
        if stalled {
            break;
        }
    }
    Ok(InnerResult {
        eval: e,
        pg,
        iterations: it,
    })
}

/// Continuous solve with the binaries in `d0` held fixed.
pub(crate) fn solve_fixed(spec: &OcpSpec, d0: DecisionVector, opts: &SolverOptions) -> Result<ContinuousResult> {
    spec.validate()?;
    let mut d = d0;
    let mut x = d.flat();
    project(&mut x, &spec.bounds);
    d.set_flat(&x);

    let count = constraint_count(spec);
    let mut mult = Multipliers::new(count, opts.initial_penalty);
    let mut viol_prev = evaluate(spec, &d, None, false)?.max_violation();
    let mut history = Vec::new();
    let mut converged = false;
    let mut kkt = f64::INFINITY;

    for outer in 0..opts.max_outer {
        let mut trial = d.clone();
        let res = inner(spec, &mut trial, &mult, opts)?;
        let viol = res.eval.max_violation();
        if viol > viol_prev && viol > opts.kkt_tol {
            history.push(OuterRecord {
                iteration: outer,
                accepted: false,
                penalty: mult.penalty,
                max_violation: viol,
                kkt_residual: f64::NAN,
                objective: res.eval.objective,
                inner_iterations: res.iterations,
            });
            if mult.penalty >= opts.max_penalty {
                break;
            }
            mult.penalty = (mult.penalty * 10.0).min(opts.max_penalty);
            continue;
        }
        d = trial;
        mult.update(&res.eval.constraints);
        let comp = mult
            .lambda
            .iter()
            .zip(&res.eval.constraints)
            .map(|(l, g)| l.min(g.max(0.0)))
            .fold(0.0, f64::max);
        kkt = res.pg.max(viol).max(comp);
        history.push(OuterRecord {
            iteration: outer,
            accepted: true,
            penalty: mult.penalty,
            max_violation: viol,
            kkt_residual: kkt,
            objective: res.eval.objective,
            inner_iterations: res.iterations,
        });
        if kkt <= opts.kkt_tol {
            converged = true;
            break;
        }
        if viol > 0.25 * viol_prev && viol > opts.kkt_tol {
            mult.penalty = (mult.penalty * 10.0).min(opts.max_penalty);
        }
        viol_prev = viol;
    }
    let eval = evaluate(spec, &d, None, false)?;
    Ok(ContinuousResult {
        decision: d,
        eval,
        converged,
        kkt,
        history,
    })
}

/// Continuous solve from `d0`, returned as a report.
pub fn solve_continuous(spec: &OcpSpec, d0: DecisionVector, opts: &SolverOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let res = solve_fixed(spec, d0, opts)?;
    build_report(spec, res, 0, 1, start)
}

/// Box/polyhedron exploration: no obstacles, seeded restarts on non-convergence.
pub fn solve_exploration(spec: &OcpSpec, opts: &SolverOptions) -> Result<SolveReport> {
    if !spec.obstacles.is_empty() {
        return Err(Error::Problem("exploration problems take no obstacles; use the visit-avoid solver".into()));
    }
    solve_with_restarts(spec, opts, None)
}

pub(crate) fn solve_with_restarts(
    spec: &OcpSpec,
    opts: &SolverOptions,
    warm: Option<DecisionVector>,
) -> Result<SolveReport> {
    let start = Instant::now();
    spec.validate()?;
    let base = warm.unwrap_or_else(|| init::arc_initialization(spec));
    let attempts = par::run_until(
        opts.exec,
        opts.restarts + 1,
        |r| solve_fixed(spec, init::restart_point(&base, spec, opts, r), opts),
        |res| res.converged,
    )?;
    let used = attempts.len() - 1;
    let mut best: Option<ContinuousResult> = None;
    for res in attempts {
        if best.as_ref().is_none_or(|b| res.better_than(b)) {
            best = Some(res);
        }
    }
    build_report(spec, best.expect("at least one attempt"), used, 1, start)
}

pub(crate) fn build_report(
    spec: &OcpSpec,
    res: ContinuousResult,
    restarts_used: usize,
    cycles: usize,
    start: Instant,
) -> Result<SolveReport> {
    let traj = res.eval.trajectory;
    let robustness_exact = match &spec.formula {
        Some(f) => Some(robustness_exact(f, &TimedMomentSignal::new(spec.dt, &traj.states)?, 0)?),
        None => None,
    };
    let last = traj.final_state();
    Ok(SolveReport {
        converged: res.converged,
        objective: res.eval.objective,
        robustness_exact,
        robustness_smooth: res.eval.robustness_smooth,
        terminal_moment_error: res.eval.terminal_error.sqrt(),
        terminal_mean: last.mean_position(),
        max_violation: res.eval.constraints.iter().fold(0.0, |m, g| m.max(-g)),
        kkt_residual: res.kkt,
        history: res.history,
        decision: res.decision,
        knot_dt: spec.knot_dt(),
        restarts_used,
        cycles,
        trajectory: traj,
        verification: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
