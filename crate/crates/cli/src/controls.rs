//! Knot-control CSV files: `knot,t,v,omega`.

use std::io::Write;
use std::path::Path;

use moment_ensemble::ensemble::Control;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    knot: usize,
    t: f64,
    v: f64,
    omega: f64,
}

pub fn write_controls<W: Write>(out: W, controls: &[Control], knot_dt: f64) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for (k, u) in controls.iter().enumerate() {
        w.serialize(Row {
            knot: k,
            t: k as f64 * knot_dt,
            v: u.v,
            omega: u.omega,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a control file and checks it has exactly `knots` rows in knot order.
pub fn read_controls(path: &Path, knots: usize) -> Result<Vec<Control>, CliError> {
    let fail = |message: String| CliError::Controls {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.knot != i {
            return Err(fail(format!("row {} has knot {}, expected {i}", i + 1, row.knot)));
        }
        if !(row.v.is_finite() && row.omega.is_finite()) {
            return Err(fail(format!("knot {i} has a non-finite control")));
        }
        out.push(Control::new(row.v, row.omega));
    }
    if out.len() != knots {
        return Err(fail(format!("{} knots in file, scenario has {knots}", out.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let controls = vec![Control::new(0.5, -0.25), Control::new(1.0 / 3.0, 2.0)];
        write_controls(std::fs::File::create(&path).unwrap(), &controls, 0.5).unwrap();
        assert_eq!(read_controls(&path, 2).unwrap(), controls);
        assert!(matches!(read_controls(&path, 3), Err(CliError::Controls { .. })));
    }

    #[test]
    fn malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "knot,t,v,omega\n0,0,1,x\n").unwrap();
        assert!(read_controls(&path, 1).is_err());
        std::fs::write(&path, "knot,t,v,omega\n1,0,1,1\n").unwrap();
        assert!(read_controls(&path, 1).unwrap_err().to_string().contains("expected 0"));
    }
}
