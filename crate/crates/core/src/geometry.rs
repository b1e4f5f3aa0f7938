//! Position constraints and their moment-space counterparts.

use serde::{Deserialize, Serialize};

use crate::ensemble::{MemberTrajectory, ParameterInterval};
use crate::error::{Error, Result};
use crate::legendre::{fill_all, SignedPartTable};
use crate::moments::MomentVector;

fn dot(a: [f64; 2], x: [f64; 2]) -> f64 {
    a[0] * x[0] + a[1] * x[1]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Two-sided polyhedron `{x : b ≤ A x ≤ c}` in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    rows: Vec<[f64; 2]>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Polyhedron {
    pub fn new(rows: Vec<[f64; 2]>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Geometry("polyhedron needs at least one row".into()));
        }
        if rows.len() != lower.len() || rows.len() != upper.len() {
            return Err(Error::Geometry(format!(
                "row count {} does not match bound lengths {} and {}",
                rows.len(),
                lower.len(),
                upper.len()
            )));
        }
        for (j, ((a, b), c)) in rows.iter().zip(&lower).zip(&upper).enumerate() {
            if !(a[0].is_finite() && a[1].is_finite()) || norm(*a) == 0.0 {
                return Err(Error::Geometry(format!("row {j} is zero or non-finite")));
            }
            if b.is_nan() || c.is_nan() || b > c {
                return Err(Error::Geometry(format!("row {j}: lower bound {b} exceeds upper bound {c}")));
            }
        }
        Ok(Self { rows, lower, upper })
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn from_box(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Self::new(vec![[1.0, 0.0], [0.0, 1.0]], lo.to_vec(), hi.to_vec())
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.violation(p) == 0.0
    }

    /// Largest raw row violation `max(0, b − a·x, a·x − c)`.
    pub fn violation(&self, p: [f64; 2]) -> f64 {
        self.row_violations(p).into_iter().fold(0.0, f64::max)
    }

    pub fn row_violations(&self, p: [f64; 2]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(a, (b, c))| {
                let y = dot(*a, p);
                (b - y).max(y - c).max(0.0)
            })
            .collect()
    }

    /// Largest row violation measured as Euclidean distance to the violated slab.
    pub fn distance_violation(&self, p: [f64; 2]) -> f64 {
        self.row_violations(p)
            .iter()
            .zip(&self.rows)
            .map(|(v, a)| v / norm(*a))
            .fold(0.0, f64::max)
    }

    /// Moves every face inward by `margin` (distance units). Errors if a slab collapses.
    pub fn shrunk(&self, margin: f64) -> Result<Self> {
        let (mut lower, mut upper) = (self.lower.clone(), self.upper.clone());
        for ((a, b), c) in self.rows.iter().zip(&mut lower).zip(&mut upper) {
            let d = margin * norm(*a);
            *b += d;
            *c -= d;
        }
        Self::new(self.rows.clone(), lower, upper)
    }
}

/// Convex obstacle `{x : A x ≥ b}` with the big-M used for its disjunctive encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    rows: Vec<[f64; 2]>,
    bounds: Vec<f64>,
    big_m: f64,
}

pub const DEFAULT_BIG_M: f64 = 20.0;

impl ObstacleSpec {
    pub fn new(rows: Vec<[f64; 2]>, bounds: Vec<f64>, big_m: f64) -> Result<Self> {
        if rows.len() != bounds.len() {
            return Err(Error::Geometry(format!(
                "{} facet normals but {} bounds",
                rows.len(),
                bounds.len()
            )));
        }
        if rows.len() < 3 {
            return Err(Error::Geometry("a bounded planar obstacle needs at least 3 facets".into()));
        }
        if !(big_m.is_finite() && big_m > 0.0) {
            return Err(Error::Geometry(format!("big-M must be positive, got {big_m}")));
        }
        if rows.iter().any(|a| !(a[0].is_finite() && a[1].is_finite()) || norm(*a) == 0.0)
            || bounds.iter().any(|b| !b.is_finite())
        {
            return Err(Error::Geometry("facet rows and bounds must be finite and nonzero".into()));
        }
        let obs = Self { rows, bounds, big_m };
        if !obs.is_bounded() {
            return Err(Error::Geometry("obstacle is unbounded".into()));
        }
        if obs.vertices().len() < 3 {
            return Err(Error::Geometry("obstacle is empty or degenerate".into()));
        }
        Ok(obs)
    }

    /// Axis-aligned box obstacle, facets ordered `x ≥ lo.x, −y ≥ −hi.y, −x ≥ −hi.x, y ≥ lo.y`.
    pub fn from_box(lo: [f64; 2], hi: [f64; 2], big_m: f64) -> Result<Self> {
        Self::new(
            vec![[1.0, 0.0], [0.0, -1.0], [-1.0, 0.0], [0.0, 1.0]],
            vec![lo[0], -hi[1], -hi[0], lo[1]],
            big_m,
        )
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn facet_count(&self) -> usize {
        self.rows.len()
    }

    /// Bounded iff the facet normals leave no angular gap of π or more.
    fn is_bounded(&self) -> bool {
        let mut angles: Vec<f64> = self.rows.iter().map(|a| a[1].atan2(a[0])).collect();
        angles.sort_by(f64::total_cmp);
        let tau = std::f64::consts::TAU;
        let mut max_gap = angles[0] + tau - angles[angles.len() - 1];
        for w in angles.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        max_gap < std::f64::consts::PI - 1e-12
    }

    /// Vertices by pairwise facet intersection, deduplicated.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let mut out: Vec<[f64; 2]> = Vec::new();
        let n = self.rows.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (self.rows[i], self.rows[j]);
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let (p, q) = (self.bounds[i], self.bounds[j]);
                let x = [(p * b[1] - q * a[1]) / det, (a[0] * q - b[0] * p) / det];
                let feasible = self
                    .rows
                    .iter()
                    .zip(&self.bounds)
                    .all(|(r, bb)| dot(*r, x) >= bb - 1e-9 * (1.0 + bb.abs()));
                if feasible && !out.iter().any(|v| (v[0] - x[0]).hypot(v[1] - x[1]) < 1e-9) {
                    out.push(x);
                }
            }
        }
        out
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.rows.iter().zip(&self.bounds).all(|(a, b)| dot(*a, p) > *b)
    }

    /// Distance from `p` to the nearest facet when inside, 0 otherwise.
    pub fn penetration(&self, p: [f64; 2]) -> f64 {
        self.rows
            .iter()
            .zip(&self.bounds)
            .map(|(a, b)| ((dot(*a, p) - b) / norm(*a)).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed slack of facet `i` as a separating half-plane: `(b_i − a_i·x)/‖a_i‖`.
    pub fn facet_clearance(&self, i: usize, p: [f64; 2]) -> f64 {
        (self.bounds[i] - dot(self.rows[i], p)) / norm(self.rows[i])
    }

    /// Obstacle grown by `margin` in every facet direction.
    pub fn inflated(&self, margin: f64) -> Result<Self> {
        let bounds = self
            .rows
            .iter()
            .zip(&self.bounds)
            .map(|(a, b)| b - margin * norm(*a))
            .collect();
        Self::new(self.rows.clone(), bounds, self.big_m)
    }

    /// Checks `|a_i·x| + |b_i| < M` over the corners of a workspace box.
    pub fn check_big_m(&self, lo: [f64; 2], hi: [f64; 2]) -> Result<()> {
        let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        for (i, (a, b)) in self.rows.iter().zip(&self.bounds).enumerate() {
            let worst = corners.iter().map(|x| dot(*a, *x).abs()).fold(0.0, f64::max) + b.abs();
            if worst >= self.big_m {
                return Err(Error::Geometry(format!(
                    "big-M {} too small for facet {i}: needs more than {worst}",
                    self.big_m
                )));
            }
        }
        Ok(())
    }
}

/// `lo ≤ row · m̃_k ≤ hi`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBandConstraint {
    pub order: usize,
    pub row: [f64; 2],
    pub lo: f64,
    pub hi: f64,
}

impl MomentBandConstraint {
    pub fn value(&self, m: &MomentVector) -> f64 {
        dot(self.row, m.position(self.order))
    }

    /// Smaller of the two one-sided slacks; negative when violated.
    pub fn slack(&self, m: &MomentVector) -> f64 {
        let y = self.value(m);
        (y - self.lo).min(self.hi - y)
    }
}

pub fn moment_polyhedron_bands(
    poly: &Polyhedron,
    table: &SignedPartTable,
    orders: &[usize],
) -> Result<Vec<MomentBandConstraint>> {
    let mut out = Vec::with_capacity(orders.len() * poly.len());
    for &k in orders {
        if k > table.order() {
            return Err(Error::Domain(format!(
                "band order {k} exceeds signed-part table order {}",
                table.order()
            )));
        }
        let (mp, mm) = (table.plus(k), table.minus(k));
        for ((a, b), c) in poly.rows.iter().zip(&poly.lower).zip(&poly.upper) {
            out.push(MomentBandConstraint {
                order: k,
                row: *a,
                lo: b * mp - c * mm,
                hi: c * mp - b * mm,
            });
        }
    }
    Ok(out)
}

/// Row constraint on the member reconstructed from the moments at one parameter
/// value: `lo ≤ row · Σ_k w_k m̃_k ≤ hi` with `w_k = φ_k(μ(β))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberNodeConstraint {
    pub beta: f64,
    pub weights: Vec<f64>,
    pub row: [f64; 2],
    pub lo: f64,
    pub hi: f64,
}

impl MemberNodeConstraint {
    pub fn value(&self, m: &MomentVector) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * dot(self.row, m.position(k)))
            .sum()
    }

    pub fn slack(&self, m: &MomentVector) -> f64 {
        let y = self.value(m);
        (y - self.lo).min(self.hi - y)
    }
}

/// Keeps the reconstructed members at `betas` inside `poly`.
pub fn member_node_bands(
    poly: &Polyhedron,
    interval: ParameterInterval,
    order: usize,
    betas: &[f64],
) -> Result<Vec<MemberNodeConstraint>> {
    let mut out = Vec::with_capacity(betas.len() * poly.len());
    for &beta in betas {
        if !interval.contains(beta) {
            return Err(Error::Domain(format!(
                "node {beta} outside the parameter interval [{}, {}]",
                interval.lo(),
                interval.hi()
            )));
        }
        let mut weights = vec![0.0; order + 1];
        fill_all(interval.to_unit(beta).clamp(-1.0, 1.0), &mut weights);
        for ((a, b), c) in poly.rows.iter().zip(&poly.lower).zip(&poly.upper) {
            out.push(MemberNodeConstraint {
                beta,
                weights: weights.clone(),
                row: *a,
                lo: *b,
                hi: *c,
            });
        }
    }
    Ok(out)
}

/// Order-0 facet band `lo ≤ row·m̃_0 + coeff·z ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetBand {
    pub row: [f64; 2],
    pub lo: f64,
    pub hi: f64,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjunctiveMomentConstraint {
    pub facets: Vec<FacetBand>,
}

impl DisjunctiveMomentConstraint {
    /// Minimum band slack under the binary assignment `z`; errors when no facet is selected.
    pub fn slack(&self, m: &MomentVector, z: &[bool]) -> Result<f64> {
        if z.len() != self.facets.len() {
            return Err(Error::Domain(format!(
                "{} binaries for {} facets",
                z.len(),
                self.facets.len()
            )));
        }
        if !z.iter().any(|&b| b) {
            return Err(Error::Domain("at least one facet must be selected".into()));
        }
        let p = m.position(0);
        Ok(self
            .facets
            .iter()
            .zip(z)
            .map(|(f, &zi)| {
                let y = dot(f.row, p) + if zi { f.coeff } else { 0.0 };
                (y - f.lo).min(f.hi - y)
            })
            .fold(f64::INFINITY, f64::min))
    }

    /// Slack of facet `i` when selected.
    pub fn active_slack(&self, i: usize, m: &MomentVector) -> f64 {
        let f = &self.facets[i];
        f.hi - f.coeff - dot(f.row, m.position(0))
    }
}

pub fn obstacle_disjunction(obs: &ObstacleSpec, table: &SignedPartTable) -> DisjunctiveMomentConstraint {
    let (mp, mm) = (table.plus(0), table.minus(0));
    let m = obs.big_m;
    let facets = obs
        .rows
        .iter()
        .zip(&obs.bounds)
        .map(|(a, b)| FacetBand {
            row: *a,
            lo: -m * mp - (b + m) * mm,
            hi: (b + m) * mp + m * mm,
            coeff: m * (mp - mm),
        })
        .collect();
    DisjunctiveMomentConstraint { facets }
}

/// Per-step violation of one member against a region.
pub trait StateConstraint {
    fn violation_at(&self, p: [f64; 2]) -> f64;
}

impl StateConstraint for Polyhedron {
    fn violation_at(&self, p: [f64; 2]) -> f64 {
        self.violation(p)
    }
}

impl StateConstraint for ObstacleSpec {
    fn violation_at(&self, p: [f64; 2]) -> f64 {
        self.penetration(p)
    }
}

pub fn member_violation<C: StateConstraint + ?Sized>(region: &C, traj: &MemberTrajectory) -> Vec<f64> {
    traj.states.iter().map(|z| region.violation_at(z.position())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{LiftedState, ParameterInterval};
    use crate::legendre::signed_part_integrals;
    use approx::assert_abs_diff_eq;

    fn square() -> ObstacleSpec {
        ObstacleSpec::new(
            vec![[1.0, 0.0], [0.0, -1.0], [-1.0, 0.0], [0.0, 1.0]],
            vec![2.0, -3.0, -6.0, 1.0],
            20.0,
        )
        .unwrap()
    }

    #[test]
    fn band_examples() {
        let table = signed_part_integrals(4);
        let poly = Polyhedron::new(vec![[2.0, 1.0], [0.0, 1.0]], vec![-1.0, -2.0], vec![13.0, 2.0]).unwrap();
        let bands = moment_polyhedron_bands(&poly, &table, &[2]).unwrap();
        assert_abs_diff_eq!(bands[0].lo, -8.52, epsilon = 5e-3);
        assert_abs_diff_eq!(bands[0].hi, 8.52, epsilon = 5e-3);
        assert_abs_diff_eq!(bands[1].lo, -2.43, epsilon = 5e-3);
        assert_abs_diff_eq!(bands[1].hi, 2.43, epsilon = 5e-3);
        let b0 = moment_polyhedron_bands(&poly, &table, &[0]).unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(b0[0].lo, -r2, epsilon = 1e-12);
        assert_abs_diff_eq!(b0[0].hi, 13.0 * r2, epsilon = 1e-12);
        assert_abs_diff_eq!(b0[1].lo, -2.0 * r2, epsilon = 1e-12);
        assert!(moment_polyhedron_bands(&poly, &table, &[5]).is_err());
    }

    #[test]
    fn degenerate_slab_bands() {
        let table = signed_part_integrals(3);
        let poly = Polyhedron::new(vec![[1.0, 0.0]], vec![0.0], vec![0.0]).unwrap();
        let bands = moment_polyhedron_bands(&poly, &table, &[0, 1, 2, 3]).unwrap();
        for b in bands {
            assert_abs_diff_eq!(b.lo, -b.hi, epsilon = 1e-15);
        }
        let poly = Polyhedron::new(vec![[1.0, 0.0]], vec![1.5], vec![1.5]).unwrap();
        let b = moment_polyhedron_bands(&poly, &table, &[0]).unwrap()[0];
        assert_abs_diff_eq!(b.lo, 1.5 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.hi, 1.5 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn polyhedron_validation() {
        assert!(Polyhedron::new(vec![], vec![], vec![]).is_err());
        assert!(Polyhedron::new(vec![[1.0, 0.0]], vec![2.0], vec![1.0]).is_err());
        assert!(Polyhedron::new(vec![[0.0, 0.0]], vec![0.0], vec![1.0]).is_err());
        assert!(Polyhedron::new(vec![[1.0, 0.0]], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn disjunction_example() {
        let table = signed_part_integrals(2);
        let d = obstacle_disjunction(&square(), &table);
        let expected = [31.11, 24.04, 19.80, 29.70];
        for (f, e) in d.facets.iter().zip(expected) {
            assert_abs_diff_eq!(f.hi, e, epsilon = 5e-3);
            assert_abs_diff_eq!(f.lo, -28.28, epsilon = 5e-3);
            assert_abs_diff_eq!(f.coeff, 28.28, epsilon = 5e-3);
        }
    }

    #[test]
    fn disjunction_active_facet_is_tight_on_boundary() {
        let table = signed_part_integrals(2);
        let obs = square();
        let d = obstacle_disjunction(&obs, &table);
        let interval = ParameterInterval::symmetric();
        // points on each facet's supporting line
        let pts = [[2.0, 0.0], [4.0, 3.0], [6.0, 5.0], [1.0, 1.0]];
        for (i, p) in pts.iter().enumerate() {
            let m = MomentVector::point_mass(0, interval, &LiftedState::new(p[0], p[1], 1.0, 0.0));
            let mut z = [false; 4];
            z[i] = true;
            assert_abs_diff_eq!(d.active_slack(i, &m), 0.0, epsilon = 1e-12);
            let f = d.facets[i];
            assert_abs_diff_eq!(f.row[0] * m.position(0)[0] + f.row[1] * m.position(0)[1] + f.coeff, f.hi, epsilon = 1e-12);
            assert!(d.slack(&m, &z).unwrap() >= -1e-12);
        }
        let m = MomentVector::zeros(0, interval);
        assert!(d.slack(&m, &[false; 4]).is_err());
    }

    #[test]
    fn obstacle_validation() {
        assert!(ObstacleSpec::new(vec![[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], vec![0.0, 0.0, -1.0], 20.0).is_ok());
        // half-plane pair: unbounded
        assert!(ObstacleSpec::new(vec![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], vec![0.0, 0.0, 0.0], 20.0).is_err());
        // empty
        assert!(ObstacleSpec::new(vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], vec![2.0, -1.0, 0.0, -1.0], 20.0).is_err());
        assert!(ObstacleSpec::new(vec![[1.0, 0.0]], vec![0.0], 20.0).is_err());
        assert!(ObstacleSpec::from_box([0.0, 0.0], [1.0, 1.0], 0.0).is_err());
        assert_eq!(square().vertices().len(), 4);
        assert_eq!(ObstacleSpec::from_box([2.0, 1.0], [6.0, 3.0], 20.0).unwrap(), square());
    }

    #[test]
    fn big_m_check() {
        assert!(square().check_big_m([-1.0, -1.0], [8.0, 5.0]).is_ok());
        assert!(square().check_big_m([-30.0, -1.0], [8.0, 5.0]).is_err());
    }

    #[test]
    fn violation_examples() {
        let obs = square();
        assert!(obs.penetration([4.0, 2.0]) > 0.0);
        assert_abs_diff_eq!(obs.penetration([4.0, 2.0]), 1.0, epsilon = 1e-12);
        assert_eq!(obs.penetration([0.0, 0.0]), 0.0);
        let poly = Polyhedron::from_box([0.0, 0.0], [1.0, 1.0]).unwrap();
        assert_eq!(poly.violation([0.5, 0.5]), 0.0);
        assert_abs_diff_eq!(poly.violation([1.5, -0.25]), 0.5, epsilon = 1e-15);
        let traj = MemberTrajectory {
            beta: 1.0,
            dt: 0.1,
            states: vec![LiftedState::new(0.5, 0.5, 1.0, 0.0), LiftedState::new(4.0, 2.0, 1.0, 0.0)],
        };
        assert_eq!(member_violation(&poly, &traj), vec![0.0, 3.0]);
        assert_eq!(member_violation(&obs, &traj), vec![0.0, 1.0]);
    }

    #[test]
    fn inflate_and_shrink() {
        let obs = square().inflated(0.5).unwrap();
        assert!(obs.contains([1.6, 2.0]));
        assert!(!obs.contains([1.4, 2.0]));
        let poly = Polyhedron::from_box([0.0, 0.0], [1.0, 1.0]).unwrap().shrunk(0.1).unwrap();
        assert!(!poly.contains([0.05, 0.5]));
        assert!(Polyhedron::from_box([0.0, 0.0], [1.0, 1.0]).unwrap().shrunk(0.6).is_err());
        let tri = Polyhedron::new(vec![[3.0, 4.0]], vec![0.0], vec![5.0]).unwrap().shrunk(0.5).unwrap();
        assert_abs_diff_eq!(tri.lower()[0], 2.5, epsilon = 1e-15);
    }
}
