//! Forward shooting, objective, constraint values and gradients.

use serde::{Deserialize, Serialize};

use super::{DecisionVector, OcpSpec};
use crate::ensemble::{Control, ControlSequence};
use crate::error::{Error, Result};
use crate::moments::{integrate_moments, Block, MomentDynamics, MomentTrajectory, Rk4Work};
use crate::par::{self, ExecMode};
use crate::stl::{robustness_smooth_with_gradient, TimedMomentSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Discrete adjoint through the RK4 stages.
    #[default]
    Adjoint,
    /// Central differences, one pair of shots per decision variable.
    FiniteDifference,
}

/// Augmented-Lagrangian state: one multiplier per inequality `g_j ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub penalty: f64,
}

impl Multipliers {
    pub fn new(count: usize, penalty: f64) -> Self {
        Self {
            lambda: vec![0.0; count],
            penalty,
        }
    }

    /// `λ ← max(0, λ − ρ g)`
    pub fn update(&mut self, g: &[f64]) {
        for (l, gj) in self.lambda.iter_mut().zip(g) {
            *l = (*l - self.penalty * gj).max(0.0);
        }
    }

    fn term(&self, j: usize, g: f64) -> (f64, f64) {
        let (l, r) = (self.lambda[j], self.penalty);
        if l - r * g > 0.0 {
            (-l * g + 0.5 * r * g * g, -(l - r * g))
        } else {
            (-l * l / (2.0 * r), 0.0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `w_ρ ρ̃ − w_T ‖m̃(T) − m̃_F‖² − w_u Σ knot_dt (v² + ω²)`
    pub objective: f64,
    pub robustness_smooth: Option<f64>,
    pub terminal_error: f64,
    pub control_energy: f64,
    /// Inequalities `g_j ≥ 0` in sample-major order.
    pub constraints: Vec<f64>,
    /// Minimized quantity: `−objective` plus augmented-Lagrangian terms.
    pub merit: f64,
    pub gradient: Option<Vec<f64>>,
    pub trajectory: MomentTrajectory,
}

impl Evaluation {
    pub fn max_violation(&self) -> f64 {
        self.constraints.iter().fold(0.0, |m, g| m.max(-g))
    }
}

/// Repeats each knot control over its integration steps.
pub fn expand_controls(spec: &OcpSpec, controls: &[Control]) -> Result<ControlSequence> {
    if controls.len() != spec.knots {
        return Err(Error::Problem(format!(
            "decision has {} knots, problem has {}",
            controls.len(),
            spec.knots
        )));
    }
    let spk = spec.steps_per_knot();
    ControlSequence::new(
        spec.dt,
        controls.iter().flat_map(|u| std::iter::repeat_n(*u, spk)).collect(),
    )
}

pub fn shoot(spec: &OcpSpec, d: &DecisionVector) -> Result<MomentTrajectory> {
    integrate_moments(&spec.initial, &expand_controls(spec, &d.controls)?)
}

/// Number of inequality constraints for the spec's sampling.
pub(crate) fn constraint_count(spec: &OcpSpec) -> usize {
    spec.sample_steps().len() * (2 * spec.bands.len() + 2 * spec.nodes.len() + spec.obstacles.len())
}

fn check_binaries(spec: &OcpSpec, d: &DecisionVector) -> Result<()> {
    if spec.obstacles.is_empty() {
        return Ok(());
    }
    let samples = spec.sample_steps().len();
    if d.binaries.len() != samples {
        return Err(Error::Problem(format!(
            "binaries cover {} samples, problem has {samples}",
            d.binaries.len()
        )));
    }
    for row in &d.binaries {
        if row.len() != spec.obstacles.len() {
            return Err(Error::Problem("binary row length differs from obstacle count".into()));
        }
        for (&i, obs) in row.iter().zip(&spec.obstacles) {
            if i >= obs.facets.len() {
                return Err(Error::Problem(format!("facet index {i} out of range")));
            }
        }
    }
    Ok(())
}

/// Objective, constraints and (optionally) the adjoint gradient of the merit.
pub fn evaluate(
    spec: &OcpSpec,
    d: &DecisionVector,
    mult: Option<&Multipliers>,
    want_gradient: bool,
) -> Result<Evaluation> {
    check_binaries(spec, d)?;
    let traj = shoot(spec, d)?;
    let n_blocks = spec.initial.order() + 1;
    let mut seed: Vec<Vec<Block>> = if want_gradient {
        vec![vec![[0.0; 4]; n_blocks]; spec.steps + 1]
    } else {
        Vec::new()
    };

    let w = spec.weights;
    let mut objective = 0.0;

    let mut robustness = None;
    if let Some(f) = &spec.formula {
        let sig = TimedMomentSignal::new(spec.dt, &traj.states)?;
        let (rho, grad) = robustness_smooth_with_gradient(f, &sig, 0, &spec.robustness)?;
        robustness = Some(rho);
        objective += w.rho * rho;
        if want_gradient {
            for e in grad {
                let b = &mut seed[e.step][e.order];
                for (x, c) in b.iter_mut().zip(e.coeffs) {
                    *x -= w.rho * c;
                }
            }
        }
    }

    let last = traj.final_state();
    let terminal_error = last.position_error_sq(&spec.target);
    objective -= w.terminal * terminal_error;
    if want_gradient {
        for (k, b) in last.blocks().iter().enumerate() {
            let t = spec.target.get(k).copied().unwrap_or([0.0, 0.0]);
            seed[spec.steps][k][0] += 2.0 * w.terminal * (b[0] - t[0]);
            seed[spec.steps][k][1] += 2.0 * w.terminal * (b[1] - t[1]);
        }
    }

    let knot_dt = spec.knot_dt();
    let control_energy: f64 = d.controls.iter().map(|u| knot_dt * (u.v * u.v + u.omega * u.omega)).sum();
    objective -= w.control * control_energy;

    let mut merit = -objective;
    let mut constraints = Vec::with_capacity(constraint_count(spec));
    for (si, &s) in spec.sample_steps().iter().enumerate() {
        let m = &traj.states[s];
        let mut push = |g: f64, orders: &[(usize, f64)], row: [f64; 2], seed: &mut Vec<Vec<Block>>| {
            let j = constraints.len();
            constraints.push(g);
            if let Some(mu) = mult {
                let (val, dg) = mu.term(j, g);
                merit += val;
                if want_gradient && dg != 0.0 {
                    for &(k, w) in orders {
                        seed[s][k][0] += dg * w * row[0];
                        seed[s][k][1] += dg * w * row[1];
                    }
                }
            }
        };
        for b in &spec.bands {
            let y = b.value(m);
            push(y - b.lo, &[(b.order, 1.0)], b.row, &mut seed);
            push(b.hi - y, &[(b.order, -1.0)], b.row, &mut seed);
        }
        for c in &spec.nodes {
            let y = c.value(m);
            let plus: Vec<(usize, f64)> = c.weights.iter().copied().enumerate().collect();
            let minus: Vec<(usize, f64)> = plus.iter().map(|&(k, w)| (k, -w)).collect();
            push(y - c.lo, &plus, c.row, &mut seed);
            push(c.hi - y, &minus, c.row, &mut seed);
        }
        for (oi, obs) in spec.obstacles.iter().enumerate() {
            let i = d.binaries[si][oi];
            push(obs.active_slack(i, m), &[(0, -1.0)], obs.facets[i].row, &mut seed);
        }
    }

    let gradient = if want_gradient {
        Some(adjoint(spec, d, &traj, &seed, w.control * 2.0 * knot_dt))
    } else {
        None
    };

    Ok(Evaluation {
        objective,
        robustness_smooth: robustness,
        terminal_error,
        control_energy,
        constraints,
        merit,
        gradient,
        trajectory: traj,
    })
}

fn adjoint(spec: &OcpSpec, d: &DecisionVector, traj: &MomentTrajectory, seed: &[Vec<Block>], energy_scale: f64) -> Vec<f64> {
    let dynamics = MomentDynamics::new(spec.initial.order(), spec.initial.interval());
    let spk = spec.steps_per_knot();
    let mut grad: Vec<f64> = d.controls.iter().flat_map(|u| [energy_scale * u.v, energy_scale * u.omega]).collect();
    let mut lam = seed[spec.steps].clone();
    let mut lam_in = lam.clone();
    let mut work = Rk4Work::default();
    for n in (0..spec.steps).rev() {
        let knot = n / spk;
        let (dv, dw) = dynamics.rk4_vjp(
            traj.states[n].blocks(),
            d.controls[knot],
            spec.dt,
            &lam,
            &mut lam_in,
            &mut work,
        );
        grad[2 * knot] += dv;
        grad[2 * knot + 1] += dw;
        for (l, (li, s)) in lam.iter_mut().zip(lam_in.iter().zip(&seed[n])) {
            for j in 0..4 {
                l[j] = li[j] + s[j];
            }
        }
    }
    grad
}

/// Objective to maximize.
pub fn objective(spec: &OcpSpec, d: &DecisionVector) -> Result<f64> {
    evaluate(spec, d, None, false).map(|e| e.objective)
}

/// Central-difference gradient of the merit, components fanned out over `exec`.
pub fn fd_gradient(
    spec: &OcpSpec,
    d: &DecisionVector,
    mult: Option<&Multipliers>,
    h: f64,
    exec: ExecMode,
) -> Result<Vec<f64>> {
    let x = d.flat();
    par::try_map_indexed(exec, x.len(), |i| {
        let step = h * (1.0 + x[i].abs());
        let mut dp = d.clone();
        let mut xp = x.clone();
        xp[i] += step;
        dp.set_flat(&xp);
        let fp = evaluate(spec, &dp, mult, false)?.merit;
        xp[i] = x[i] - step;
        dp.set_flat(&xp);
        let fm = evaluate(spec, &dp, mult, false)?.merit;
        Ok((fp - fm) / (2.0 * step))
    })
}

/// Merit gradient by the configured method.
pub(crate) fn merit_gradient(
    spec: &OcpSpec,
    d: &DecisionVector,
    mult: Option<&Multipliers>,
    method: GradientMethod,
    exec: ExecMode,
) -> Result<(Evaluation, Vec<f64>)> {
    match method {
        GradientMethod::Adjoint => {
            let mut e = evaluate(spec, d, mult, true)?;
            let g = e.gradient.take().expect("gradient requested");
            Ok((e, g))
        }
        GradientMethod::FiniteDifference => {
            let e = evaluate(spec, d, mult, false)?;
            let g = fd_gradient(spec, d, mult, 1e-6, exec)?;
            Ok((e, g))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{lift, ParameterInterval, UnicycleState};
    use crate::moments::MomentVector;
    use crate::ocp::{point_target, ControlBounds, Weights};
    use crate::stl::RobustnessConfig;
    use approx::assert_abs_diff_eq;

    fn spec(steps: usize, knots: usize) -> OcpSpec {
        let interval = ParameterInterval::new(0.9, 1.1).unwrap();
        OcpSpec {
            initial: MomentVector::point_mass(3, interval, &lift(&UnicycleState::new(0.0, 0.0, 0.3))),
            target: point_target([1.0, 1.0], 3),
            dt: 0.01,
            steps,
            knots,
            bounds: ControlBounds::default(),
            bands: Vec::new(),
            nodes: Vec::new(),
            obstacles: Vec::new(),
            formula: None,
            robustness: RobustnessConfig::default(),
            weights: Weights::default(),
            sample_stride: 10,
        }
    }

    #[test]
    fn zero_controls_are_constant() {
        let s = spec(100, 10);
        let d = DecisionVector::new(vec![Control::default(); 10]);
        let tr = shoot(&s, &d).unwrap();
        assert!(tr.states.iter().all(|m| *m == s.initial));
    }

    #[test]
    fn time_rescaling() {
        let s = spec(200, 20);
        let controls: Vec<Control> = (0..20).map(|i| Control::new(0.5 + 0.02 * i as f64, 0.3 - 0.04 * i as f64)).collect();
        let a = shoot(&s, &DecisionVector::new(controls.clone())).unwrap();
        let mut h = spec(200, 20);
        h.dt = 0.005;
        let doubled: Vec<Control> = controls.iter().map(|u| Control::new(2.0 * u.v, 2.0 * u.omega)).collect();
        let b = shoot(&h, &DecisionVector::new(doubled)).unwrap();
        assert!(a.final_state().sup_distance(b.final_state()) < 1e-9);
    }

    #[test]
    fn objective_examples() {
        let mut s = spec(100, 10);
        s.target = point_target([0.0, 0.0], 3);
        let zero = DecisionVector::new(vec![Control::default(); 10]);
        assert_eq!(objective(&s, &zero).unwrap(), 0.0);

        // hand sum with unit weights on a spin in place
        s.weights = Weights { rho: 1.0, terminal: 1.0, control: 1.0 };
        s.target = point_target([1.0, 0.0], 3);
        let d = DecisionVector::new(vec![Control::new(0.0, 1.0); 10]);
        let expected = -2.0 - 10.0 * 0.1 * 1.0;
        assert_abs_diff_eq!(objective(&s, &d).unwrap(), expected, epsilon = 1e-12);
        let mut more = d.clone();
        more.controls[3].omega = 1.5;
        assert!(objective(&s, &more).unwrap() < objective(&s, &d).unwrap());
    }

    #[test]
    fn mismatched_decision_is_rejected() {
        let s = spec(100, 10);
        assert!(shoot(&s, &DecisionVector::new(vec![Control::default(); 9])).is_err());
    }
}
