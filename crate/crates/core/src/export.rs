//! CSV writers for trajectories, moments, basis tables and constraint tables.

use std::io::{self, Write};

use crate::ensemble::MemberTrajectory;
use crate::geometry::{DisjunctiveMomentConstraint, MomentBandConstraint};
use crate::legendre::{OrthonormalBasis, SignedPartTable};
use crate::moments::MomentTrajectory;

/// Columns `t,beta,px,py,theta`.
pub fn write_member_trajectories<W: Write>(out: &mut W, trajs: &[MemberTrajectory]) -> io::Result<()> {
    writeln!(out, "t,beta,px,py,theta")?;
    for tr in trajs {
        for (i, z) in tr.states.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                tr.time(i),
                tr.beta,
                z.px,
                z.py,
                z.s.atan2(z.c)
            )?;
        }
    }
    Ok(())
}

/// Columns `t,k,m_px,m_py,m_c,m_s`.
pub fn write_moment_trajectory<W: Write>(out: &mut W, traj: &MomentTrajectory) -> io::Result<()> {
    writeln!(out, "t,k,m_px,m_py,m_c,m_s")?;
    for (i, m) in traj.states.iter().enumerate() {
        let t = i as f64 * traj.dt;
        for (k, b) in m.blocks().iter().enumerate() {
            writeln!(out, "{t},{k},{},{},{},{}", b[0], b[1], b[2], b[3])?;
        }
    }
    Ok(())
}

/// Columns `k,a_k,c_k,m_plus,m_minus`.
pub fn write_basis_table<W: Write>(out: &mut W, basis: &OrthonormalBasis, table: &SignedPartTable) -> io::Result<()> {
    writeln!(out, "k,a_k,c_k,m_plus,m_minus")?;
    let rc = basis.recurrence();
    for k in 0..=basis.max_order() {
        writeln!(out, "{k},{},{},{},{}", rc.a[k], rc.c[k], table.plus(k), table.minus(k))?;
    }
    Ok(())
}

/// `u,mu,phi_0,...,phi_N` on `samples` equispaced points of [-1, 1].
pub fn write_basis_samples<W: Write>(out: &mut W, basis: &OrthonormalBasis, samples: usize) -> io::Result<()> {
    let n = basis.max_order();
    let header: Vec<String> = (0..=n).map(|k| format!("phi_{k}")).collect();
    writeln!(out, "mu,{}", header.join(","))?;
    let samples = samples.max(2);
    for i in 0..samples {
        let mu = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
        let vals: Vec<String> = basis.evaluate_all(mu).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{mu},{}", vals.join(","))?;
    }
    Ok(())
}

/// Columns `kind,index,order,row_x,row_y,lo,hi,binary_coeff`.
pub fn write_constraint_table<W: Write>(
    out: &mut W,
    bands: &[MomentBandConstraint],
    obstacles: &[DisjunctiveMomentConstraint],
) -> io::Result<()> {
    writeln!(out, "kind,index,order,row_x,row_y,lo,hi,binary_coeff")?;
    for (i, b) in bands.iter().enumerate() {
        writeln!(out, "band,{i},{},{},{},{},{},0", b.order, b.row[0], b.row[1], b.lo, b.hi)?;
    }
    for (j, d) in obstacles.iter().enumerate() {
        for f in &d.facets {
            writeln!(out, "obstacle,{j},0,{},{},{},{},{}", f.row[0], f.row[1], f.lo, f.hi, f.coeff)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{LiftedState, ParameterInterval};
    use crate::legendre::signed_part_integrals;
    use crate::moments::MomentVector;

    #[test]
    fn moment_csv_layout() {
        let m = MomentVector::point_mass(1, ParameterInterval::symmetric(), &LiftedState::new(1.0, 0.0, 1.0, 0.0));
        let tr = MomentTrajectory { dt: 0.5, states: vec![m.clone(), m] };
        let mut buf = Vec::new();
        write_moment_trajectory(&mut buf, &tr).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,k,m_px,m_py,m_c,m_s");
        assert_eq!(lines.len(), 5);
        assert!(lines[3].starts_with("0.5,0,"));
    }

    #[test]
    fn trajectory_csv_layout() {
        let tr = MemberTrajectory {
            beta: 1.1,
            dt: 0.1,
            states: vec![LiftedState::new(0.0, 0.0, 0.0, 1.0)],
        };
        let mut buf = Vec::new();
        write_member_trajectories(&mut buf, &[tr]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().nth(1).unwrap(), format!("0,1.1,0,0,{}", std::f64::consts::FRAC_PI_2));
    }

    #[test]
    fn basis_csv_layout() {
        let basis = OrthonormalBasis::new(3);
        let mut buf = Vec::new();
        write_basis_table(&mut buf, &basis, &signed_part_integrals(3)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
        let mut buf = Vec::new();
        write_basis_samples(&mut buf, &basis, 11).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 12);
    }
}
