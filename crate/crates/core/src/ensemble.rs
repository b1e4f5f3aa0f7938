//! Parameterized unicycle ensemble.
//!
//! Each member obeys
//!
//! ```text
//! ṗx = β v sin θ,   ṗy = β v cos θ,   θ̇ = β ω
//! ```
//!
//! (heading `θ = 0` points along `+y`). In lifted coordinates
//! `z = (px, py, cos θ, sin θ)` this is bilinear, `ż = β (v B₁ + ω B₂) z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre;
use crate::par::{self, ExecMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnicycleState {
    pub px: f64,
    pub py: f64,
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(px: f64, py: f64, theta: f64) -> Self {
        Self { px, py, theta }
    }
}

/// `(px, py, cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LiftedState {
    pub px: f64,
    pub py: f64,
    pub c: f64,
    pub s: f64,
}

impl LiftedState {
    pub fn new(px: f64, py: f64, c: f64, s: f64) -> Self {
        Self { px, py, c, s }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.px, self.py, self.c, self.s]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `|c² + s² - 1|`
    pub fn unit_defect(&self) -> f64 {
        (self.c * self.c + self.s * self.s - 1.0).abs()
    }
}

pub fn lift(x: &UnicycleState) -> LiftedState {
    LiftedState::new(x.px, x.py, x.theta.cos(), x.theta.sin())
}

/// Inverse of [`lift`]; `θ = atan2(s, c)`.
pub fn unlift(z: &LiftedState) -> Result<UnicycleState> {
    if !z.is_finite() {
        return Err(Error::InvalidState("non-finite lifted state".into()));
    }
    let norm = (z.c * z.c + z.s * z.s).sqrt();
    if norm < 1e-9 {
        return Err(Error::InvalidState(format!(
            "heading components ({}, {}) are degenerate",
            z.c, z.s
        )));
    }
    if (norm * norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidState(format!(
            "heading components are off the unit circle (|c|²+|s|² = {})",
            norm * norm
        )));
    }
    Ok(UnicycleState::new(z.px, z.py, z.s.atan2(z.c)))
}

/// Traction interval `[lo, hi]`; `β = τ + σ μ` maps it onto `μ ∈ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    lo: f64,
    hi: f64,
}

impl ParameterInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("parameter interval [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    /// `[-1, 1]`
    pub fn symmetric() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// σ = (hi − lo) / 2
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// τ = (hi + lo) / 2
    pub fn center(&self) -> f64 {
        0.5 * (self.hi + self.lo)
    }

    pub fn to_unit(&self, beta: f64) -> f64 {
        (beta - self.center()) / self.half_width()
    }

    pub fn from_unit(&self, mu: f64) -> f64 {
        self.center() + self.half_width() * mu
    }

    pub fn contains(&self, beta: f64) -> bool {
        let slack = 1e-12 * self.width();
        beta >= self.lo - slack && beta <= self.hi + slack
    }
}

/// Discretization of the continuum ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleGrid {
    interval: ParameterInterval,
    samples: Vec<f64>,
    weights: Vec<f64>,
}

impl EnsembleGrid {
    /// `n` equally spaced samples with trapezoid weights.
    pub fn uniform(interval: ParameterInterval, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("uniform grid needs at least 2 samples".into()));
        }
        let h = interval.width() / (n - 1) as f64;
        let samples = (0..n)
            .map(|i| if i == n - 1 { interval.hi } else { interval.lo + h * i as f64 })
            .collect();
        let weights = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .collect();
        Ok(Self { interval, samples, weights })
    }

    /// Gauss–Legendre nodes mapped onto the interval.
    pub fn gauss_legendre(interval: ParameterInterval, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain("Gauss-Legendre grid needs at least 1 node".into()));
        }
        let (x, w) = legendre::gauss_legendre(n);
        let sigma = interval.half_width();
        Ok(Self {
            interval,
            samples: x.iter().map(|&mu| interval.from_unit(mu)).collect(),
            weights: w.iter().map(|&w| w * sigma).collect(),
        })
    }

    /// A single member carrying the whole interval weight.
    pub fn single(interval: ParameterInterval, beta: f64) -> Result<Self> {
        if !interval.contains(beta) {
            return Err(Error::Domain(format!("beta = {beta} is outside the interval")));
        }
        Ok(Self {
            interval,
            samples: vec![beta],
            weights: vec![interval.width()],
        })
    }

    pub fn interval(&self) -> ParameterInterval {
        self.interval
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

impl Control {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Piecewise-constant controls, one pair per integration step of length `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    dt: f64,
    pairs: Vec<Control>,
}

impl ControlSequence {
    pub fn new(dt: f64, pairs: Vec<Control>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("time step {dt} must be positive")));
        }
        if let Some(i) = pairs.iter().position(|p| !(p.v.is_finite() && p.omega.is_finite())) {
            return Err(Error::Domain(format!("control step {i} is not finite")));
        }
        Ok(Self { dt, pairs })
    }

    /// `steps` copies of one control.
    pub fn constant(dt: f64, steps: usize, control: Control) -> Result<Self> {
        Self::new(dt, vec![control; steps])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn pairs(&self) -> &[Control] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.pairs.len() as f64
    }

    /// The first `steps` pairs.
    pub fn prefix(&self, steps: usize) -> Self {
        Self {
            dt: self.dt,
            pairs: self.pairs[..steps.min(self.pairs.len())].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberTrajectory {
    pub beta: f64,
    pub dt: f64,
    pub states: Vec<LiftedState>,
}

impl MemberTrajectory {
    pub fn final_state(&self) -> LiftedState {
        *self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutOptions {
    /// Rescale `(c, s)` to unit norm after every step.
    pub renormalize: bool,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self { renormalize: true }
    }
}

/// `β (v B₁ + ω B₂) z`, returned as a state derivative.
pub fn member_rhs(z: &LiftedState, beta_raw: f64, v: f64, omega: f64) -> LiftedState {
    LiftedState {
        px: beta_raw * v * z.s,
        py: beta_raw * v * z.c,
        c: -beta_raw * omega * z.s,
        s: beta_raw * omega * z.c,
    }
}

fn axpy(z: &LiftedState, h: f64, d: &LiftedState) -> LiftedState {
    LiftedState {
        px: z.px + h * d.px,
        py: z.py + h * d.py,
        c: z.c + h * d.c,
        s: z.s + h * d.s,
    }
}

fn rk4_step(z: &LiftedState, beta: f64, u: Control, h: f64) -> LiftedState {
    let k1 = member_rhs(z, beta, u.v, u.omega);
    let k2 = member_rhs(&axpy(z, 0.5 * h, &k1), beta, u.v, u.omega);
    let k3 = member_rhs(&axpy(z, 0.5 * h, &k2), beta, u.v, u.omega);
    let k4 = member_rhs(&axpy(z, h, &k3), beta, u.v, u.omega);
    let w = h / 6.0;
    LiftedState {
        px: z.px + w * (k1.px + 2.0 * k2.px + 2.0 * k3.px + k4.px),
        py: z.py + w * (k1.py + 2.0 * k2.py + 2.0 * k3.py + k4.py),
        c: z.c + w * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
        s: z.s + w * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s),
    }
}

/// Fixed-step RK4 rollout of one member; `steps + 1` states including `z0`.
pub fn rollout_member(
    z0: &LiftedState,
    beta: f64,
    controls: &ControlSequence,
    opts: RolloutOptions,
) -> Result<MemberTrajectory> {
    if controls.is_empty() {
        return Err(Error::Domain("control sequence is empty".into()));
    }
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*z0);
    let mut z = *z0;
    for (i, u) in controls.pairs().iter().enumerate() {
        z = rk4_step(&z, beta, *u, controls.dt());
        if opts.renormalize {
            let n = (z.c * z.c + z.s * z.s).sqrt();
            if n > 0.0 {
                z.c /= n;
                z.s /= n;
            }
        }
        if !z.is_finite() {
            return Err(Error::Diverged { step: i + 1, beta: Some(beta) });
        }
        states.push(z);
    }
    Ok(MemberTrajectory { beta, dt: controls.dt(), states })
}

/// One trajectory per grid sample, in grid order, all under the same control.
pub fn rollout_ensemble(
    grid: &EnsembleGrid,
    z0: &LiftedState,
    controls: &ControlSequence,
    opts: RolloutOptions,
    exec: ExecMode,
) -> Result<Vec<MemberTrajectory>> {
    par::try_map_indexed(exec, grid.len(), |i| {
        rollout_member(z0, grid.samples()[i], controls, opts)
    })
}

/// Weighted population mean position at every step.
pub fn mean_positions(grid: &EnsembleGrid, trajectories: &[MemberTrajectory]) -> Vec<[f64; 2]> {
    let total: f64 = grid.weights().iter().sum();
    let steps = trajectories.first().map_or(0, |t| t.states.len());
    (0..steps)
        .map(|n| {
            let mut acc = [0.0; 2];
            for (tr, w) in trajectories.iter().zip(grid.weights()) {
                acc[0] += w * tr.states[n].px;
                acc[1] += w * tr.states[n].py;
            }
            [acc[0] / total, acc[1] / total]
        })
        .collect()
}
