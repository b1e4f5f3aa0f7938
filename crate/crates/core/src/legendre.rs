//! Orthonormal Legendre basis on `[-1, 1]`.
//!
//! `φ_k(μ) = sqrt((2k+1)/2) · P_k(μ)`, orthonormal under the plain Lebesgue
//! measure `dμ`, so `φ_0 ≡ 1/√2`. Everything is evaluated with the
//! three-term recurrence
//!
//! ```text
//! μ φ_k(μ) = a_k φ_{k+1}(μ) + c_k φ_{k-1}(μ),   c_0 = 0,  c_k = a_{k-1} = k / sqrt(4k² - 1)
//! ```
//!
//! which is also the coupling that closes the moment dynamics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|μ| ≤ 1` before a value is treated as out of domain.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCoefficients {
    /// `a_0 … a_N`
    pub a: Vec<f64>,
    /// `c_0 … c_N`, with `c_0 = 0`
    pub c: Vec<f64>,
}

impl RecurrenceCoefficients {
    pub fn order(&self) -> usize {
        self.a.len() - 1
    }
}

/// Positive / negative part integrals `m_k^± = ∫ max(±φ_k, 0) dμ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedPartTable {
    pub m_plus: Vec<f64>,
    pub m_minus: Vec<f64>,
}

impl SignedPartTable {
    pub fn order(&self) -> usize {
        self.m_plus.len() - 1
    }

    pub fn plus(&self, k: usize) -> f64 {
        self.m_plus[k]
    }

    pub fn minus(&self, k: usize) -> f64 {
        self.m_minus[k]
    }

    /// `∫ φ_k dμ = m_k^+ - m_k^-`.
    pub fn integral(&self, k: usize) -> f64 {
        self.m_plus[k] - self.m_minus[k]
    }
}

/// The basis truncated at `max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    max_order: usize,
    recurrence: RecurrenceCoefficients,
}

impl OrthonormalBasis {
    pub fn new(max_order: usize) -> Self {
        Self {
            max_order,
            recurrence: recurrence_coefficients(max_order),
        }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn recurrence(&self) -> &RecurrenceCoefficients {
        &self.recurrence
    }

    pub fn evaluate(&self, k: usize, mu: f64) -> Result<f64> {
        if k > self.max_order {
            return Err(Error::Domain(format!(
                "basis order {k} exceeds truncation order {}",
                self.max_order
            )));
        }
        evaluate(k, mu)
    }

    /// `[φ_0(μ), …, φ_N(μ)]`. `μ` is clamped into `[-1, 1]`.
    pub fn evaluate_all(&self, mu: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.max_order + 1];
        fill_all(mu.clamp(-1.0, 1.0), &mut out);
        out
    }

    pub fn signed_parts(&self) -> SignedPartTable {
        signed_part_integrals(self.max_order)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain(format!("mu = {mu} lies outside [-1, 1]")));
    }
    Ok(())
}

#[inline]
fn a_coef(k: usize) -> f64 {
    let kp = (k + 1) as f64;
    kp / (4.0 * kp * kp - 1.0).sqrt()
}

/// Evaluates `φ_0..φ_{out.len()-1}` at `mu`.
pub(crate) fn fill_all(mu: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = std::f64::consts::FRAC_1_SQRT_2;
    if out.len() == 1 {
        return;
    }
    out[1] = mu * out[0] / a_coef(0);
    for k in 1..out.len() - 1 {
        // c_k = a_{k-1}
        out[k + 1] = (mu * out[k] - a_coef(k - 1) * out[k - 1]) / a_coef(k);
    }
}

/// `φ_k(mu)` via the orthonormal three-term recurrence.
pub fn evaluate(k: usize, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let mut buf = vec![0.0; k + 1];
    fill_all(mu.clamp(-1.0, 1.0), &mut buf);
    Ok(buf[k])
}

/// Classical (unnormalized) Legendre polynomial `P_k(mu)`, Bonnet recurrence.
pub fn classical(k: usize, mu: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => mu,
        _ => {
            let (mut prev, mut cur) = (1.0, mu);
            for n in 1..k {
                let nf = n as f64;
                let next = ((2.0 * nf + 1.0) * mu * cur - nf * prev) / (nf + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn normalization(k: usize) -> f64 {
    ((2 * k + 1) as f64 / 2.0).sqrt()
}

/// Antiderivative of `φ_k` vanishing at `μ = -1`.
fn antiderivative(k: usize, mu: f64) -> f64 {
    if k == 0 {
        return normalization(0) * (mu + 1.0);
    }
    // ∫ P_k = (P_{k+1} - P_{k-1}) / (2k+1); zero at μ = -1 for k ≥ 1.
    normalization(k) * (classical(k + 1, mu) - classical(k - 1, mu)) / (2 * k + 1) as f64
}

/// Derivative of `φ_k` (valid for |μ| < 1).
fn derivative(k: usize, mu: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    let dp = kf * (classical(k - 1, mu) - mu * classical(k, mu)) / (1.0 - mu * mu);
    normalization(k) * dp
}

pub fn recurrence_coefficients(n: usize) -> RecurrenceCoefficients {
    let a: Vec<f64> = (0..=n).map(a_coef).collect();
    let c: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { 0.0 } else { a_coef(k - 1) })
        .collect();
    RecurrenceCoefficients { a, c }
}

/// Roots of `φ_k` in ascending order; empty for `k = 0`.
///
/// Eigenvalues of the `k × k` symmetric Jacobi matrix, each polished with one
/// Newton step.
pub fn polynomial_roots(k: usize) -> Vec<f64> {
    jacobi_eigen(k)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]` (nodes ascending).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nodes = jacobi_eigen(n);
    let weights = nodes
        .iter()
        .map(|&x| {
            let dp = derivative(n, x) / normalization(n);
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (nodes, weights)
}

fn jacobi_eigen(k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let jac = DMatrix::from_fn(k, k, |i, j| {
        if i + 1 == j {
            a_coef(i)
        } else if j + 1 == i {
            a_coef(j)
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut roots: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    roots.sort_by(|a, b| a.total_cmp(b));
    for r in roots.iter_mut() {
        let d = derivative(k, *r);
        if d != 0.0 {
            let mut buf = vec![0.0; k + 1];
            fill_all(*r, &mut buf);
            let step = buf[k] / d;
            if step.abs() < 1e-6 {
                *r -= step;
            }
        }
        // symmetric pairs: clean the middle root of odd orders
        if r.abs() < 1e-15 {
            *r = 0.0;
        }
    }
    roots
}

/// Exact `m_k^±` for `k = 0..=n`, integrating the antiderivative piecewise
/// between consecutive roots.
pub fn signed_part_integrals(n: usize) -> SignedPartTable {
    let mut m_plus = Vec::with_capacity(n + 1);
    let mut m_minus = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut breaks = vec![-1.0];
        breaks.extend(polynomial_roots(k));
        breaks.push(1.0);
        let (mut plus, mut minus) = (0.0, 0.0);
        for w in breaks.windows(2) {
            let piece = antiderivative(k, w[1]) - antiderivative(k, w[0]);
            if piece >= 0.0 {
                plus += piece;
            } else {
                minus -= piece;
            }
        }
        m_plus.push(plus);
        m_minus.push(minus);
    }
    SignedPartTable { m_plus, m_minus }
}
