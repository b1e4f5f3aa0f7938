//! Moment transform and the truncated moment dynamics.
//!
//! With `β = τ + σ μ`, the moments of an ensemble profile are
//! `m_k = ∫_{-1}^{1} φ_k(μ) z(τ + σμ) dμ`, one 4-vector block per order.
//! Multiplying the member dynamics by `φ_k` and using the three-term
//! recurrence gives
//!
//! ```text
//! ṁ_k = (v B₁ + ω B₂) ( σ (a_k m_{k+1} + c_k m_{k-1}) + τ m_k ),   m_{-1} = m_{N+1} = 0
//! ```
//!
//! i.e. `ṁ = (J ⊗ G(u)) m` with `J` the symmetric Jacobi matrix shifted by `τ`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{Control, ControlSequence, EnsembleGrid, LiftedState, ParameterInterval};
use crate::error::{Error, Result};
use crate::legendre::{self, OrthonormalBasis};

/// One moment block: the moments of `(px, py, cos θ, sin θ)` at a single order.
pub type Block = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    interval: ParameterInterval,
    blocks: Vec<Block>,
}

impl MomentVector {
    pub fn zeros(order: usize, interval: ParameterInterval) -> Self {
        Self {
            interval,
            blocks: vec![[0.0; 4]; order + 1],
        }
    }

    pub fn from_blocks(interval: ParameterInterval, blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Domain("a moment vector needs at least one block".into()));
        }
        Ok(Self { interval, blocks })
    }

    /// Moments of the profile that puts every member at `z`.
    pub fn point_mass(order: usize, interval: ParameterInterval, z: &LiftedState) -> Self {
        let mut m = Self::zeros(order, interval);
        let r2 = std::f64::consts::SQRT_2;
        m.blocks[0] = z.to_array().map(|v| r2 * v);
        m
    }

    pub fn order(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn interval(&self) -> ParameterInterval {
        self.interval
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn block(&self, k: usize) -> Block {
        self.blocks[k]
    }

    /// Position sub-block `m̃_k` (first two components).
    pub fn position(&self, k: usize) -> [f64; 2] {
        [self.blocks[k][0], self.blocks[k][1]]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|v| v.is_finite())
    }

    /// Population-mean position, `m̃_0 / √2`.
    pub fn mean_position(&self) -> [f64; 2] {
        let p = self.position(0);
        [p[0] / std::f64::consts::SQRT_2, p[1] / std::f64::consts::SQRT_2]
    }

    /// `Σ_k ‖m̃_k − target_k‖²` over position blocks; missing target blocks count as zero.
    pub fn position_error_sq(&self, target: &[[f64; 2]]) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let t = target.get(k).copied().unwrap_or([0.0, 0.0]);
                (b[0] - t[0]).powi(2) + (b[1] - t[1]).powi(2)
            })
            .sum()
    }

    /// Largest absolute entry difference.
    pub fn sup_distance(&self, other: &MomentVector) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub dt: f64,
    pub states: Vec<MomentVector>,
}

impl MomentTrajectory {
    pub fn final_state(&self) -> &MomentVector {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn order(&self) -> usize {
        self.states[0].order()
    }
}

/// Forward transform of a sampled profile. `profile[i]` is the state of the
/// member at `grid.samples()[i]`.
pub fn forward_transform(
    grid: &EnsembleGrid,
    profile: &[LiftedState],
    order: usize,
) -> Result<MomentVector> {
    let required = 2 * (order + 1);
    if grid.len() < required {
        return Err(Error::Resolution {
            samples: grid.len(),
            order,
            required,
        });
    }
    if profile.len() != grid.len() {
        return Err(Error::Domain(format!(
            "profile has {} samples but the grid has {}",
            profile.len(),
            grid.len()
        )));
    }
    let interval = grid.interval();
    let jac = 1.0 / interval.half_width();
    let basis = OrthonormalBasis::new(order);
    let mut m = MomentVector::zeros(order, interval);
    for ((&beta, &w), z) in grid.samples().iter().zip(grid.weights()).zip(profile) {
        let phi = basis.evaluate_all(interval.to_unit(beta));
        let z = z.to_array();
        for (block, p) in m.blocks.iter_mut().zip(&phi) {
            for (b, zi) in block.iter_mut().zip(z) {
                *b += w * jac * p * zi;
            }
        }
    }
    Ok(m)
}

/// Truncated Fourier–Legendre synthesis `Σ_k m_k φ_k(μ(β))`.
pub fn reconstruct(m: &MomentVector, beta: f64) -> LiftedState {
    let mu = m.interval.to_unit(beta).clamp(-1.0, 1.0);
    let mut phi = vec![0.0; m.order() + 1];
    legendre::fill_all(mu, &mut phi);
    let mut out = [0.0; 4];
    for (b, p) in m.blocks.iter().zip(&phi) {
        for (o, bi) in out.iter_mut().zip(b) {
            *o += p * bi;
        }
    }
    LiftedState::from_array(out)
}

/// `Σ_k ‖m_k‖²`
pub fn parseval_norm(m: &MomentVector) -> f64 {
    m.blocks.iter().flatten().map(|v| v * v).sum()
}

/// Linear operator `m ↦ (J ⊗ G(u)) m` for a fixed order and interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentDynamics {
    a: Vec<f64>,
    c: Vec<f64>,
    sigma: f64,
    tau: f64,
}

#[inline]
fn g_apply(w: &Block, u: Control) -> Block {
    [u.v * w[3], u.v * w[2], -u.omega * w[3], u.omega * w[2]]
}

#[inline]
fn g_transpose(l: &Block, u: Control) -> Block {
    [0.0, 0.0, u.v * l[1] + u.omega * l[3], u.v * l[0] - u.omega * l[2]]
}

impl MomentDynamics {
    pub fn new(order: usize, interval: ParameterInterval) -> Self {
        let rc = legendre::recurrence_coefficients(order);
        Self {
            a: rc.a,
            c: rc.c,
            sigma: interval.half_width(),
            tau: interval.center(),
        }
    }

    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    /// `(J m)_k = τ m_k + σ (a_k m_{k+1} + c_k m_{k-1})`, closure `m_{N+1} = 0`.
    #[inline]
    fn mix(&self, m: &[Block], k: usize) -> Block {
        let n = self.a.len() - 1;
        let mut w = m[k].map(|x| self.tau * x);
        if k < n {
            let s = self.sigma * self.a[k];
            for (wi, x) in w.iter_mut().zip(&m[k + 1]) {
                *wi += s * x;
            }
        }
        if k > 0 {
            let s = self.sigma * self.c[k];
            for (wi, x) in w.iter_mut().zip(&m[k - 1]) {
                *wi += s * x;
            }
        }
        w
    }

    pub fn apply(&self, m: &[Block], u: Control, out: &mut [Block]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = g_apply(&self.mix(m, k), u);
        }
    }

    /// Transpose of [`apply`](Self::apply) in the flattened Euclidean inner product.
    pub fn apply_transpose(&self, lam: &[Block], u: Control, out: &mut [Block], scratch: &mut Vec<Block>) {
        scratch.clear();
        scratch.extend(lam.iter().map(|l| g_transpose(l, u)));
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.mix(scratch, k);
        }
    }

    /// `(λ · (J ⊗ B₁) m, λ · (J ⊗ B₂) m)`: sensitivities of `λ · f` to `v` and `ω`.
    pub fn control_sensitivity(&self, m: &[Block], lam: &[Block]) -> (f64, f64) {
        let (mut dv, mut dw) = (0.0, 0.0);
        for (k, l) in lam.iter().enumerate() {
            let w = self.mix(m, k);
            dv += l[0] * w[3] + l[1] * w[2];
            dw += -l[2] * w[3] + l[3] * w[2];
        }
        (dv, dw)
    }

    /// One classical RK4 step of length `h`.
    pub fn rk4_step(&self, m: &[Block], u: Control, h: f64, out: &mut [Block], work: &mut Rk4Work) {
        let n = m.len();
        work.resize(n);
        self.apply(m, u, &mut work.k1);
        axpy(&mut work.y, m, 0.5 * h, &work.k1);
        self.apply(&work.y, u, &mut work.k2);
        axpy(&mut work.y, m, 0.5 * h, &work.k2);
        self.apply(&work.y, u, &mut work.k3);
        axpy(&mut work.y, m, h, &work.k3);
        self.apply(&work.y, u, &mut work.k4);
        let w = h / 6.0;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            for (j, v) in o.iter_mut().enumerate() {
                *v = m[i][j] + w * (work.k1[i][j] + 2.0 * work.k2[i][j] + 2.0 * work.k3[i][j] + work.k4[i][j]);
            }
        }
    }
}

/// `y = m + a·k`, block by block.
fn axpy(y: &mut [Block], m: &[Block], a: f64, k: &[Block]) {
    for ((yi, mi), ki) in y.iter_mut().zip(m).zip(k) {
        for j in 0..4 {
            yi[j] = mi[j] + a * ki[j];
        }
    }
}

impl MomentDynamics {
    /// Reverse-mode step: given `m`, the control and the cotangent `lam_out` of the
    /// RK4 output, writes the cotangent of `m` into `lam_in` and returns the
    /// cotangent of `(v, ω)`.
    pub fn rk4_vjp(
        &self,
        m: &[Block],
        u: Control,
        h: f64,
        lam_out: &[Block],
        lam_in: &mut [Block],
        work: &mut Rk4Work,
    ) -> (f64, f64) {
        let n = m.len();
        work.resize(n);
        let mut y2 = vec![[0.0; 4]; n];
        let mut y3 = vec![[0.0; 4]; n];
        let mut y4 = vec![[0.0; 4]; n];
        self.apply(m, u, &mut work.k1);
        for i in 0..n {
            for j in 0..4 {
                y2[i][j] = m[i][j] + 0.5 * h * work.k1[i][j];
            }
        }
        self.apply(&y2, u, &mut work.k2);
        for i in 0..n {
            for j in 0..4 {
                y3[i][j] = m[i][j] + 0.5 * h * work.k2[i][j];
            }
        }
        self.apply(&y3, u, &mut work.k3);
        for i in 0..n {
            for j in 0..4 {
                y4[i][j] = m[i][j] + h * work.k3[i][j];
            }
        }

        let mut scratch = Vec::with_capacity(n);
        let mut ybar = vec![[0.0; 4]; n];
        let (mut dv, mut dw) = (0.0, 0.0);
        lam_in.copy_from_slice(lam_out);

        // k4 = A y4, cotangent h/6 λ
        let mut kbar: Vec<Block> = lam_out.iter().map(|l| l.map(|x| x * h / 6.0)).collect();
        let (a, b) = self.control_sensitivity(&y4, &kbar);
        dv += a;
        dw += b;
        self.apply_transpose(&kbar, u, &mut ybar, &mut scratch);
        // y4 = m + h k3
        let mut k3bar: Vec<Block> = lam_out.iter().map(|l| l.map(|x| x * h / 3.0)).collect();
        for i in 0..n {
            for j in 0..4 {
                lam_in[i][j] += ybar[i][j];
                k3bar[i][j] += h * ybar[i][j];
            }
        }
        let (a, b) = self.control_sensitivity(&y3, &k3bar);
        dv += a;
        dw += b;
        self.apply_transpose(&k3bar, u, &mut ybar, &mut scratch);
        // y3 = m + h/2 k2
        kbar.iter_mut().zip(lam_out).for_each(|(k, l)| *k = l.map(|x| x * h / 3.0));
        for i in 0..n {
            for j in 0..4 {
                lam_in[i][j] += ybar[i][j];
                kbar[i][j] += 0.5 * h * ybar[i][j];
            }
        }
        let (a, b) = self.control_sensitivity(&y2, &kbar);
        dv += a;
        dw += b;
        self.apply_transpose(&kbar, u, &mut ybar, &mut scratch);
        // y2 = m + h/2 k1
        kbar.iter_mut().zip(lam_out).for_each(|(k, l)| *k = l.map(|x| x * h / 6.0));
        for i in 0..n {
            for j in 0..4 {
                lam_in[i][j] += ybar[i][j];
                kbar[i][j] += 0.5 * h * ybar[i][j];
            }
        }
        let (a, b) = self.control_sensitivity(m, &kbar);
        dv += a;
        dw += b;
        self.apply_transpose(&kbar, u, &mut ybar, &mut scratch);
        for i in 0..n {
            for j in 0..4 {
                lam_in[i][j] += ybar[i][j];
            }
        }
        (dv, dw)
    }
}

/// Scratch buffers for [`MomentDynamics::rk4_step`].
#[derive(Debug, Clone, Default)]
pub struct Rk4Work {
    pub(crate) k1: Vec<Block>,
    pub(crate) k2: Vec<Block>,
    pub(crate) k3: Vec<Block>,
    pub(crate) k4: Vec<Block>,
    pub(crate) y: Vec<Block>,
}

impl Rk4Work {
    pub(crate) fn resize(&mut self, n: usize) {
        for v in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.y] {
            v.resize(n, [0.0; 4]);
        }
    }
}

/// Time derivative of the moment vector under control `(v, ω)`.
pub fn moment_rhs(m: &MomentVector, v: f64, omega: f64) -> MomentVector {
    let dynamics = MomentDynamics::new(m.order(), m.interval);
    let mut out = MomentVector::zeros(m.order(), m.interval);
    dynamics.apply(&m.blocks, Control::new(v, omega), &mut out.blocks);
    out
}

/// RK4 integration of the moment system on the control grid.
pub fn integrate_moments(m0: &MomentVector, controls: &ControlSequence) -> Result<MomentTrajectory> {
    if controls.is_empty() {
        return Err(Error::Domain("control sequence is empty".into()));
    }
    let dynamics = MomentDynamics::new(m0.order(), m0.interval);
    let mut work = Rk4Work::default();
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(m0.clone());
    for (i, u) in controls.pairs().iter().enumerate() {
        let mut next = MomentVector::zeros(m0.order(), m0.interval);
        dynamics.rk4_step(&states[i].blocks, *u, controls.dt(), &mut next.blocks, &mut work);
        if !next.is_finite() {
            return Err(Error::Diverged { step: i + 1, beta: None });
        }
        states.push(next);
    }
    Ok(MomentTrajectory {
        dt: controls.dt(),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{lift, rollout_ensemble, RolloutOptions, UnicycleState};
    use crate::par::ExecMode;
    use approx::assert_abs_diff_eq;

    fn gl(interval: ParameterInterval) -> EnsembleGrid {
        EnsembleGrid::gauss_legendre(interval, 40).unwrap()
    }

    fn profile(grid: &EnsembleGrid, f: impl Fn(f64) -> [f64; 4]) -> Vec<LiftedState> {
        grid.samples()
            .iter()
            .map(|&b| LiftedState::from_array(f(grid.interval().to_unit(b))))
            .collect()
    }

    #[test]
    fn transform_examples() {
        let grid = gl(ParameterInterval::symmetric());
        let m = forward_transform(&grid, &profile(&grid, |_| [1.0, 0.0, 0.0, 1.0]), 5).unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(m.block(0)[0], r2, epsilon = 1e-13);
        assert_abs_diff_eq!(m.block(0)[3], r2, epsilon = 1e-13);
        for k in 1..=5 {
            assert!(m.block(k).iter().all(|v| v.abs() < 1e-13));
        }

        let m = forward_transform(&grid, &profile(&grid, |mu| [mu, 0.0, 0.0, 0.0]), 5).unwrap();
        assert_abs_diff_eq!(m.block(1)[0], (2.0f64 / 3.0).sqrt(), epsilon = 1e-13);
        for k in [0, 2, 3, 4, 5] {
            assert_abs_diff_eq!(m.block(k)[0], 0.0, epsilon = 1e-13);
        }

        let phi2 = |mu: f64| legendre::evaluate(2, mu).unwrap();
        let m = forward_transform(&grid, &profile(&grid, |mu| [0.0, phi2(mu), 0.0, 0.0]), 5).unwrap();
        assert_abs_diff_eq!(m.block(2)[1], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(parseval_norm(&m), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_rejects_coarse_grid() {
        let grid = EnsembleGrid::uniform(ParameterInterval::symmetric(), 7).unwrap();
        let p = vec![LiftedState::default(); 7];
        assert!(matches!(
            forward_transform(&grid, &p, 3),
            Err(Error::Resolution { required: 8, .. })
        ));
    }

    #[test]
    fn reconstruct_round_trips_polynomials() {
        let interval = ParameterInterval::new(0.9, 1.1).unwrap();
        let grid = gl(interval);
        let f = |mu: f64| [1.0 + mu - 0.5 * mu.powi(3), 2.0 * mu * mu, 0.3, -mu.powi(4)];
        let m = forward_transform(&grid, &profile(&grid, f), 4).unwrap();
        for i in 0..=10 {
            let beta = 0.9 + 0.02 * i as f64;
            let z = reconstruct(&m, beta).to_array();
            let e = f(interval.to_unit(beta));
            for (a, b) in z.iter().zip(e) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
        // N = 0 reconstructs the mean over μ
        let m0 = forward_transform(&grid, &profile(&grid, f), 0).unwrap();
        let z = reconstruct(&m0, 1.0).to_array();
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[3], -1.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn parseval_examples() {
        let interval = ParameterInterval::symmetric();
        assert_eq!(parseval_norm(&MomentVector::zeros(3, interval)), 0.0);
        let grid = gl(interval);
        let m = forward_transform(&grid, &profile(&grid, |_| [1.0, 0.0, 0.0, 0.0]), 3).unwrap();
        assert_abs_diff_eq!(parseval_norm(&m), 2.0, epsilon = 1e-12);
        let phi1 = |mu: f64| legendre::evaluate(1, mu).unwrap();
        let m = forward_transform(&grid, &profile(&grid, |mu| [0.0, 0.0, phi1(mu), 0.0]), 3).unwrap();
        assert_abs_diff_eq!(parseval_norm(&m), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rhs_examples() {
        let interval = ParameterInterval::symmetric();
        let mut m = MomentVector::zeros(3, interval);
        m.blocks_mut()[1][2] = 1.0;
        let zero = moment_rhs(&m, 0.0, 0.0);
        assert!(zero.blocks().iter().flatten().all(|v| *v == 0.0));
        let d = moment_rhs(&m, 1.0, 0.0);
        assert_abs_diff_eq!(d.block(0)[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.block(0)[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn transpose_is_adjoint() {
        let interval = ParameterInterval::new(0.8, 1.3).unwrap();
        let dyn_ = MomentDynamics::new(5, interval);
        let x: Vec<Block> = (0..6).map(|k| [k as f64, 1.0 - k as f64, 0.3 * k as f64, 0.7]).collect();
        let y: Vec<Block> = (0..6).map(|k| [0.2, (k as f64).sin(), -1.0, k as f64 * 0.1]).collect();
        let u = Control::new(0.7, -1.3);
        let mut ax = vec![[0.0; 4]; 6];
        let mut aty = vec![[0.0; 4]; 6];
        let mut scratch = Vec::new();
        dyn_.apply(&x, u, &mut ax);
        dyn_.apply_transpose(&y, u, &mut aty, &mut scratch);
        let dot = |a: &[Block], b: &[Block]| -> f64 {
            a.iter().flatten().zip(b.iter().flatten()).map(|(p, q)| p * q).sum()
        };
        assert_abs_diff_eq!(dot(&y, &ax), dot(&aty, &x), epsilon = 1e-12);
    }

    #[test]
    fn rhs_matches_transform_of_rollout_derivative() {
        // finite difference in time of forward_transform ∘ rollout
        let interval = ParameterInterval::new(0.9, 1.1).unwrap();
        let grid = gl(interval);
        let z0 = lift(&UnicycleState::new(0.3, -0.2, 0.4));
        let u = Control::new(1.3, 0.8);
        let h = 1e-4;
        let seq = ControlSequence::constant(h, 1, u).unwrap();
        let seq_back = ControlSequence::constant(h, 1, Control::new(-u.v, -u.omega)).unwrap();
        let opts = RolloutOptions { renormalize: false };
        let fwd = rollout_ensemble(&grid, &z0, &seq, opts, ExecMode::Sequential).unwrap();
        let bwd = rollout_ensemble(&grid, &z0, &seq_back, opts, ExecMode::Sequential).unwrap();
        let p: Vec<_> = fwd.iter().map(|t| t.final_state()).collect();
        let q: Vec<_> = bwd.iter().map(|t| t.final_state()).collect();
        let mp = forward_transform(&grid, &p, 8).unwrap();
        let mq = forward_transform(&grid, &q, 8).unwrap();
        let m0 = forward_transform(&grid, &vec![z0; grid.len()], 8).unwrap();
        let d = moment_rhs(&m0, u.v, u.omega);
        for k in 0..=8 {
            for j in 0..4 {
                let fd = (mp.block(k)[j] - mq.block(k)[j]) / (2.0 * h);
                assert!((fd - d.block(k)[j]).abs() < 1e-6, "k={k} j={j} fd={fd} rhs={}", d.block(k)[j]);
            }
        }
    }

    #[test]
    fn rk4_vjp_matches_finite_differences() {
        let interval = ParameterInterval::new(0.9, 1.1).unwrap();
        let dyn_ = MomentDynamics::new(3, interval);
        let m: Vec<Block> = (0..4).map(|k| [0.5 - k as f64, 0.2 * k as f64, 0.8, -0.3 + 0.1 * k as f64]).collect();
        let lam: Vec<Block> = (0..4).map(|k| [1.0, -0.5, 0.3 * k as f64, 0.7]).collect();
        let u = Control::new(1.2, -0.7);
        let h = 0.05;
        let mut work = Rk4Work::default();
        let mut lam_in = vec![[0.0; 4]; 4];
        let (dv, dw) = dyn_.rk4_vjp(&m, u, h, &lam, &mut lam_in, &mut work);
        let phi = |m: &[Block], u: Control| -> f64 {
            let mut out = vec![[0.0; 4]; 4];
            let mut w = Rk4Work::default();
            dyn_.rk4_step(m, u, h, &mut out, &mut w);
            out.iter().flatten().zip(lam.iter().flatten()).map(|(a, b)| a * b).sum()
        };
        let e = 1e-6;
        let fd_v = (phi(&m, Control::new(u.v + e, u.omega)) - phi(&m, Control::new(u.v - e, u.omega))) / (2.0 * e);
        let fd_w = (phi(&m, Control::new(u.v, u.omega + e)) - phi(&m, Control::new(u.v, u.omega - e))) / (2.0 * e);
        assert_abs_diff_eq!(dv, fd_v, epsilon = 1e-8);
        assert_abs_diff_eq!(dw, fd_w, epsilon = 1e-8);
        for i in 0..4 {
            for j in 0..4 {
                let mut p = m.clone();
                let mut q = m.clone();
                p[i][j] += e;
                q[i][j] -= e;
                let fd = (phi(&p, u) - phi(&q, u)) / (2.0 * e);
                assert_abs_diff_eq!(lam_in[i][j], fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn zero_controls_hold_state() {
        let interval = ParameterInterval::new(0.9, 1.1).unwrap();
        let m0 = MomentVector::point_mass(4, interval, &lift(&UnicycleState::new(1.0, 2.0, 0.3)));
        let seq = ControlSequence::constant(0.01, 50, Control::default()).unwrap();
        let tr = integrate_moments(&m0, &seq).unwrap();
        assert_eq!(tr.states.len(), 51);
        assert!(tr.states.iter().all(|m| *m == m0));
    }
}
