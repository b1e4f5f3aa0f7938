//! Initial guesses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ControlBounds, DecisionVector, OcpSpec, SolverOptions};
use crate::ensemble::Control;

fn wrap(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    (a + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI
}

/// Constant-curvature arc from the mean start pose to the goal, traversed by the
/// nominal member `β = τ` in the full horizon.
pub fn arc_initialization(spec: &OcpSpec) -> DecisionVector {
    let start = spec.start_pose();
    let goal = spec.goal();
    let (dx, dy) = (goal[0] - start.px, goal[1] - start.py);
    let dist = dx.hypot(dy);
    let tau = spec.initial.interval().center();
    let time = tau * spec.horizon();
    let control = if dist < 1e-12 {
        Control::default()
    } else {
        // heading convention: θ = 0 points along +y, θ grows clockwise
        let chord = dx.atan2(dy);
        let alpha = wrap(chord - start.theta);
        let length = if alpha.abs() < 1e-9 { dist } else { dist * alpha / alpha.sin() };
        Control::new(length / time, 2.0 * alpha / time)
    };
    DecisionVector::new(vec![spec.bounds.project(control); spec.knots])
}

/// Seeded uniform perturbation of `base`, a quarter of the bound per channel.
pub fn perturbed(base: &DecisionVector, bounds: &ControlBounds, seed: u64, index: u64) -> DecisionVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    let controls = base
        .controls
        .iter()
        .map(|u| {
            let v = u.v + 0.25 * bounds.v_max * rng.random_range(-1.0..1.0);
            let w = u.omega + 0.25 * bounds.omega_max * rng.random_range(-1.0..1.0);
            bounds.project(Control::new(v, w))
        })
        .collect();
    DecisionVector {
        controls,
        binaries: base.binaries.clone(),
    }
}

/// Start point of restart `r`: the base guess for `r = 0`, a seeded perturbation otherwise.
pub fn restart_point(base: &DecisionVector, spec: &OcpSpec, opts: &SolverOptions, r: usize) -> DecisionVector {
    if r == 0 {
        base.clone()
    } else {
        perturbed(base, &spec.bounds, opts.seed, r as u64)
    }
}
