//! Signal temporal logic over moment trajectories.
//!
//! Windows are in seconds relative to the evaluation time and are rounded
//! inward to signal samples. The smooth semantics replace min/max by
//! log-sum-exp with sharpness `K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{moment_polyhedron_bands, Polyhedron};
use crate::legendre::SignedPartTable;
use crate::moments::{Block, MomentTrajectory, MomentVector};

/// Affine functional `coeffs · m_k + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub order: usize,
    pub coeffs: [f64; 4],
    pub offset: f64,
}

impl Predicate {
    pub fn value(&self, m: &MomentVector) -> f64 {
        let b = m.block(self.order);
        self.coeffs.iter().zip(b).map(|(c, x)| c * x).sum::<f64>() + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StlFormula {
    Predicate(Predicate),
    Not(Box<StlFormula>),
    And(Vec<StlFormula>),
    Or(Vec<StlFormula>),
    Eventually { window: [f64; 2], child: Box<StlFormula> },
    Always { window: [f64; 2], child: Box<StlFormula> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    sharpness: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self { sharpness: 10.0 }
    }
}

impl RobustnessConfig {
    pub fn new(sharpness: f64) -> Result<Self> {
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(Error::Formula(format!("sharpness must be finite and positive, got {sharpness}")));
        }
        Ok(Self { sharpness })
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }
}

/// Moment states sampled every `dt` seconds starting at `t = 0`.
#[derive(Debug, Clone, Copy)]
pub struct TimedMomentSignal<'a> {
    pub dt: f64,
    pub states: &'a [MomentVector],
}

impl<'a> TimedMomentSignal<'a> {
    pub fn new(dt: f64, states: &'a [MomentVector]) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Evaluation(format!("signal dt must be positive, got {dt}")));
        }
        if states.is_empty() {
            return Err(Error::Evaluation("signal is empty".into()));
        }
        Ok(Self { dt, states })
    }

    pub fn from_trajectory(traj: &'a MomentTrajectory) -> Result<Self> {
        Self::new(traj.dt, &traj.states)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Sample range `[t + ceil(a/dt), t + floor(b/dt)]` clipped to the signal end.
    fn window(&self, t: usize, w: [f64; 2]) -> Result<std::ops::RangeInclusive<usize>> {
        let eps = 1e-9;
        let lo = t + (w[0] / self.dt - eps).ceil().max(0.0) as usize;
        let hi_raw = (w[1] / self.dt + eps).floor();
        let last = self.states.len() - 1;
        if hi_raw < 0.0 || lo > last {
            return Err(Error::Evaluation(format!(
                "window [{}, {}] at step {t} lies outside the signal of {} samples",
                w[0],
                w[1],
                self.states.len()
            )));
        }
        let hi = (t + hi_raw as usize).min(last);
        if lo > hi {
            return Err(Error::Evaluation(format!(
                "window [{}, {}] contains no sample at dt = {}",
                w[0], w[1], self.dt
            )));
        }
        Ok(lo..=hi)
    }
}

/// Gradient entry: `∂ρ/∂m_{step, order} = coeffs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradEntry {
    pub step: usize,
    pub order: usize,
    pub coeffs: Block,
}

fn lse_max(vals: &[f64], k: f64) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + vals.iter().map(|v| (k * (v - m)).exp()).sum::<f64>().ln() / k
}

/// Soft maximum `(1/K) log Σ exp(K a_i)`.
pub fn smooth_max(vals: &[f64], k: f64) -> f64 {
    lse_max(vals, k)
}

/// Soft minimum `−(1/K) log Σ exp(−K a_i)`.
pub fn smooth_min(vals: &[f64], k: f64) -> f64 {
    let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
    -lse_max(&neg, k)
}

fn softmax_weights(vals: &[f64], k: f64) -> Vec<f64> {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = vals.iter().map(|v| (k * (v - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn check_order(p: &Predicate, sig: &TimedMomentSignal) -> Result<()> {
    if p.order > sig.states[0].order() {
        return Err(Error::Evaluation(format!(
            "predicate order {} exceeds signal order {}",
            p.order,
            sig.states[0].order()
        )));
    }
    Ok(())
}

impl StlFormula {
    pub fn and(children: Vec<StlFormula>) -> Self {
        Self::And(children)
    }

    pub fn eventually(window: [f64; 2], child: StlFormula) -> Self {
        Self::Eventually {
            window,
            child: Box::new(child),
        }
    }

    pub fn always(window: [f64; 2], child: StlFormula) -> Self {
        Self::Always {
            window,
            child: Box::new(child),
        }
    }

    /// Checks structure and `0 ≤ a ≤ b ≤ horizon` for every window.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            Self::Predicate(p) => {
                if p.coeffs.iter().chain([&p.offset]).any(|v| !v.is_finite()) {
                    return Err(Error::Formula("predicate has non-finite coefficients".into()));
                }
                Ok(())
            }
            Self::Not(c) => c.validate(horizon),
            Self::And(cs) | Self::Or(cs) => {
                if cs.is_empty() {
                    return Err(Error::Formula("and/or needs at least one child".into()));
                }
                cs.iter().try_for_each(|c| c.validate(horizon))
            }
            Self::Eventually { window, child } | Self::Always { window, child } => {
                let [a, b] = *window;
                if !(0.0 <= a && a <= b && b <= horizon + 1e-9) {
                    return Err(Error::Formula(format!(
                        "window [{a}, {b}] must satisfy 0 <= a <= b <= {horizon}"
                    )));
                }
                child.validate(horizon)
            }
        }
    }

    /// Same formula with every temporal window moved earlier by `t0`, clamped at 0.
    pub fn shifted(&self, t0: f64) -> Self {
        match self {
            Self::Predicate(p) => Self::Predicate(*p),
            Self::Not(c) => Self::Not(Box::new(c.shifted(t0))),
            Self::And(cs) => Self::And(cs.iter().map(|c| c.shifted(t0)).collect()),
            Self::Or(cs) => Self::Or(cs.iter().map(|c| c.shifted(t0)).collect()),
            Self::Eventually { window, child } => Self::Eventually {
                window: [(window[0] - t0).max(0.0), (window[1] - t0).max(0.0)],
                child: Box::new(child.shifted(t0)),
            },
            Self::Always { window, child } => Self::Always {
                window: [(window[0] - t0).max(0.0), (window[1] - t0).max(0.0)],
                child: Box::new(child.shifted(t0)),
            },
        }
    }

    /// Number of nodes of each kind, as `(eventually, always)`.
    pub fn temporal_counts(&self) -> (usize, usize) {
        match self {
            Self::Predicate(_) => (0, 0),
            Self::Not(c) => c.temporal_counts(),
            Self::And(cs) | Self::Or(cs) => cs.iter().fold((0, 0), |(e, a), c| {
                let (ce, ca) = c.temporal_counts();
                (e + ce, a + ca)
            }),
            Self::Eventually { child, .. } => {
                let (e, a) = child.temporal_counts();
                (e + 1, a)
            }
            Self::Always { child, .. } => {
                let (e, a) = child.temporal_counts();
                (e, a + 1)
            }
        }
    }
}

pub fn robustness_exact(f: &StlFormula, sig: &TimedMomentSignal, t: usize) -> Result<f64> {
    if t >= sig.len() {
        return Err(Error::Evaluation(format!("step {t} outside signal of {} samples", sig.len())));
    }
    exact(f, sig, t)
}

fn exact(f: &StlFormula, sig: &TimedMomentSignal, t: usize) -> Result<f64> {
    Ok(match f {
        StlFormula::Predicate(p) => {
            check_order(p, sig)?;
            p.value(&sig.states[t])
        }
        StlFormula::Not(c) => -exact(c, sig, t)?,
        StlFormula::And(cs) => fold_children(cs, |c| exact(c, sig, t), f64::INFINITY, f64::min)?,
        StlFormula::Or(cs) => fold_children(cs, |c| exact(c, sig, t), f64::NEG_INFINITY, f64::max)?,
        StlFormula::Eventually { window, child } => sig
            .window(t, *window)?
            .map(|s| exact(child, sig, s))
            .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))?,
        StlFormula::Always { window, child } => sig
            .window(t, *window)?
            .map(|s| exact(child, sig, s))
            .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))?,
    })
}

fn fold_children(
    cs: &[StlFormula],
    eval: impl Fn(&StlFormula) -> Result<f64>,
    init: f64,
    op: fn(f64, f64) -> f64,
) -> Result<f64> {
    if cs.is_empty() {
        return Err(Error::Formula("and/or needs at least one child".into()));
    }
    cs.iter().try_fold(init, |acc, c| eval(c).map(|v| op(acc, v)))
}

pub fn robustness_smooth(
    f: &StlFormula,
    sig: &TimedMomentSignal,
    t: usize,
    cfg: &RobustnessConfig,
) -> Result<f64> {
    robustness_smooth_with_gradient(f, sig, t, cfg).map(|(v, _)| v)
}

/// Smooth robustness and its gradient with respect to the signal's moment blocks.
pub fn robustness_smooth_with_gradient(
    f: &StlFormula,
    sig: &TimedMomentSignal,
    t: usize,
    cfg: &RobustnessConfig,
) -> Result<(f64, Vec<GradEntry>)> {
    if t >= sig.len() {
        return Err(Error::Evaluation(format!("step {t} outside signal of {} samples", sig.len())));
    }
    smooth(f, sig, t, cfg.sharpness)
}

fn combine(parts: Vec<(f64, Vec<GradEntry>)>, k: f64, is_max: bool) -> (f64, Vec<GradEntry>) {
    let vals: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let (value, w) = if is_max {
        (lse_max(&vals, k), softmax_weights(&vals, k))
    } else {
        let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
        (-lse_max(&neg, k), softmax_weights(&neg, k))
    };
    let mut grad = Vec::new();
    for ((_, g), wi) in parts.into_iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        grad.extend(g.into_iter().map(|e| GradEntry {
            coeffs: e.coeffs.map(|c| c * wi),
            ..e
        }));
    }
    (value, grad)
}

fn smooth(f: &StlFormula, sig: &TimedMomentSignal, t: usize, k: f64) -> Result<(f64, Vec<GradEntry>)> {
    Ok(match f {
        StlFormula::Predicate(p) => {
            check_order(p, sig)?;
            (
                p.value(&sig.states[t]),
                vec![GradEntry {
                    step: t,
                    order: p.order,
                    coeffs: p.coeffs,
                }],
            )
        }
        StlFormula::Not(c) => {
            let (v, g) = smooth(c, sig, t, k)?;
            (
                -v,
                g.into_iter()
                    .map(|e| GradEntry {
                        coeffs: e.coeffs.map(|c| -c),
                        ..e
                    })
                    .collect(),
            )
        }
        StlFormula::And(cs) | StlFormula::Or(cs) => {
            if cs.is_empty() {
                return Err(Error::Formula("and/or needs at least one child".into()));
            }
            let parts = cs.iter().map(|c| smooth(c, sig, t, k)).collect::<Result<Vec<_>>>()?;
            combine(parts, k, matches!(f, StlFormula::Or(_)))
        }
        StlFormula::Eventually { window, child } | StlFormula::Always { window, child } => {
            let parts = sig
                .window(t, *window)?
                .map(|s| smooth(child, sig, s, k))
                .collect::<Result<Vec<_>>>()?;
            combine(parts, k, matches!(f, StlFormula::Eventually { .. }))
        }
    })
}

/// Conjunction of both one-sided band predicates of `poly` at moment order `order`.
pub fn region_formula(poly: &Polyhedron, table: &SignedPartTable, order: usize) -> Result<StlFormula> {
    let bands = moment_polyhedron_bands(poly, table, &[order])?;
    let mut preds = Vec::with_capacity(2 * bands.len());
    for b in bands {
        preds.push(StlFormula::Predicate(Predicate {
            order,
            coeffs: [b.row[0], b.row[1], 0.0, 0.0],
            offset: -b.lo,
        }));
        preds.push(StlFormula::Predicate(Predicate {
            order,
            coeffs: [-b.row[0], -b.row[1], 0.0, 0.0],
            offset: b.hi,
        }));
    }
    Ok(StlFormula::And(preds))
}

/// `∧_j F_{w_j} (inside waypoint j)`.
pub fn waypoint_formula(
    waypoints: &[(Polyhedron, [f64; 2])],
    table: &SignedPartTable,
    order: usize,
) -> Result<StlFormula> {
    if waypoints.is_empty() {
        return Err(Error::Formula("waypoint list is empty".into()));
    }
    let children = waypoints
        .iter()
        .map(|(poly, w)| region_formula(poly, table, order).map(|r| StlFormula::eventually(*w, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StlFormula::And(children))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{LiftedState, ParameterInterval};
    use crate::legendre::signed_part_integrals;
    use approx::assert_abs_diff_eq;

    fn scalar_signal(vals: &[f64]) -> Vec<MomentVector> {
        let interval = ParameterInterval::symmetric();
        vals.iter()
            .map(|&v| MomentVector::from_blocks(interval, vec![[v, 0.0, 0.0, 0.0]]).unwrap())
            .collect()
    }

    fn px(offset: f64) -> StlFormula {
        StlFormula::Predicate(Predicate {
            order: 0,
            coeffs: [1.0, 0.0, 0.0, 0.0],
            offset,
        })
    }

    #[test]
    fn exact_examples() {
        let states = scalar_signal(&[0.7; 5]);
        let sig = TimedMomentSignal::new(1.0, &states).unwrap();
        let f = StlFormula::always([0.0, 4.0], px(0.0));
        assert_eq!(robustness_exact(&f, &sig, 0).unwrap(), 0.7);

        let f = StlFormula::and(vec![px(-0.4), px(-0.9)]);
        assert_abs_diff_eq!(robustness_exact(&f, &sig, 0).unwrap(), -0.2, epsilon = 1e-15);

        let states = scalar_signal(&[-1.0, 0.5, -2.0]);
        let sig = TimedMomentSignal::new(1.0, &states).unwrap();
        let f = StlFormula::eventually([0.0, 2.0], px(0.0));
        assert_eq!(robustness_exact(&f, &sig, 0).unwrap(), 0.5);
        let f = StlFormula::Not(Box::new(f));
        assert_eq!(robustness_exact(&f, &sig, 0).unwrap(), -0.5);
    }

    #[test]
    fn windows_round_inward_and_clip() {
        let states = scalar_signal(&[5.0, 1.0, 2.0, 3.0, 9.0]);
        let sig = TimedMomentSignal::new(0.5, &states).unwrap();
        // [0.3, 1.2] s → samples 1..=2
        let f = StlFormula::eventually([0.3, 1.2], px(0.0));
        assert_eq!(robustness_exact(&f, &sig, 0).unwrap(), 2.0);
        // clipped at the end
        let f = StlFormula::always([1.0, 10.0], px(0.0));
        assert_eq!(robustness_exact(&f, &sig, 0).unwrap(), 2.0);
        let f = StlFormula::always([3.0, 4.0], px(0.0));
        assert!(matches!(robustness_exact(&f, &sig, 0), Err(Error::Evaluation(_))));
        let f = StlFormula::always([0.1, 0.2], px(0.0));
        assert!(robustness_exact(&f, &sig, 0).is_err());
        assert!(robustness_exact(&px(0.0), &sig, 5).is_err());
    }

    #[test]
    fn smooth_examples() {
        assert_abs_diff_eq!(smooth_max(&[0.0, 0.0], 1.0), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(smooth_min(&[0.0, 0.0], 1.0), -(2f64.ln()), epsilon = 1e-15);
        let v = [0.3, -1.2, 0.25];
        assert!((smooth_max(&v, 1000.0) - 0.3).abs() <= 0.002);
        assert!((smooth_min(&v, 1000.0) + 1.2).abs() <= 0.002);
        assert_eq!(smooth_max(&[1e6, -1e6], 10.0), 1e6);

        let states = scalar_signal(&[0.4]);
        let sig = TimedMomentSignal::new(1.0, &states).unwrap();
        let cfg = RobustnessConfig::new(3.0).unwrap();
        let f = StlFormula::and(vec![StlFormula::Or(vec![StlFormula::eventually([0.0, 0.0], px(0.1))])]);
        assert_abs_diff_eq!(robustness_smooth(&f, &sig, 0, &cfg).unwrap(), 0.5, epsilon = 1e-15);
        assert!(RobustnessConfig::new(0.0).is_err());
        assert!(RobustnessConfig::new(f64::INFINITY).is_err());
    }

    #[test]
    fn smooth_gradient_matches_finite_differences() {
        let states = scalar_signal(&[0.2, -0.3, 0.8, 0.1, 0.5, -0.7]);
        let cfg = RobustnessConfig::new(4.0).unwrap();
        let f = StlFormula::and(vec![
            StlFormula::eventually([0.0, 3.0], StlFormula::and(vec![px(-0.1), StlFormula::Not(Box::new(px(-0.9)))])),
            StlFormula::always([1.0, 5.0], StlFormula::Or(vec![px(0.5), px(1.0)])),
        ]);
        let sig = TimedMomentSignal::new(1.0, &states).unwrap();
        let (_, grad) = robustness_smooth_with_gradient(&f, &sig, 0, &cfg).unwrap();
        let mut dense = vec![0.0; states.len()];
        for e in grad {
            dense[e.step] += e.coeffs[0];
        }
        let h = 1e-6;
        for s in 0..states.len() {
            let mut p = states.clone();
            let mut q = states.clone();
            p[s].blocks_mut()[0][0] += h;
            q[s].blocks_mut()[0][0] -= h;
            let fp = robustness_smooth(&f, &TimedMomentSignal::new(1.0, &p).unwrap(), 0, &cfg).unwrap();
            let fq = robustness_smooth(&f, &TimedMomentSignal::new(1.0, &q).unwrap(), 0, &cfg).unwrap();
            assert_abs_diff_eq!((fp - fq) / (2.0 * h), dense[s], epsilon = 1e-7);
        }
    }

    #[test]
    fn waypoint_examples() {
        let table = signed_part_integrals(2);
        let interval = ParameterInterval::new(0.9, 1.1).unwrap();
        let wp = Polyhedron::from_box([1.0, 1.0], [2.0, 2.0]).unwrap();
        let inside = |x: f64, y: f64| MomentVector::point_mass(2, interval, &LiftedState::new(x, y, 1.0, 0.0));
        let f = waypoint_formula(&[(wp.clone(), [0.0, 1.0])], &table, 0).unwrap();
        let states = vec![inside(1.5, 1.5); 11];
        let sig = TimedMomentSignal::new(0.1, &states).unwrap();
        assert!(robustness_exact(&f, &sig, 0).unwrap() > 0.0);
        let states = vec![inside(3.0, 1.5); 11];
        let sig = TimedMomentSignal::new(0.1, &states).unwrap();
        assert!(robustness_exact(&f, &sig, 0).unwrap() < 0.0);

        let wp2 = Polyhedron::from_box([4.0, 1.0], [5.0, 2.0]).unwrap();
        let f = waypoint_formula(&[(wp, [0.0, 0.5]), (wp2, [0.6, 1.0])], &table, 0).unwrap();
        assert_eq!(f.temporal_counts(), (2, 0));
        assert!(waypoint_formula(&[], &table, 0).is_err());
        assert!(f.validate(1.0).is_ok());
        assert!(f.validate(0.8).is_err());
    }

    #[test]
    fn shift_moves_windows() {
        let f = StlFormula::eventually([14.0, 16.0], px(0.0)).shifted(5.0);
        assert_eq!(f, StlFormula::eventually([9.0, 11.0], px(0.0)));
        let f = StlFormula::always([1.0, 2.0], px(0.0)).shifted(3.0);
        assert_eq!(f, StlFormula::always([0.0, 0.0], px(0.0)));
    }
}
