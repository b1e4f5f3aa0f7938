//! Bundled scenarios solved end to end and checked against their
//! `*.expect.toml` property files.

use std::path::{Path, PathBuf};

use ensemble_cli::run::{Job, Overrides};
use ensemble_cli::scenario::{parse_scenario, Mode};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Expect {
    status: String,
    converged: bool,
    members: usize,
    max_keep_in_violation: Option<f64>,
    max_obstacle_penetration: Option<f64>,
    /// Exact robustness of the solved moment trajectory must exceed this.
    min_robustness: Option<f64>,
    terminal_mean: Option<[f64; 2]>,
    terminal_tolerance: Option<f64>,
}

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn golden(name: &str) {
    let expect: Expect =
        toml::from_str(&std::fs::read_to_string(dir().join(format!("{name}.expect.toml"))).unwrap()).unwrap();
    let mut scenario = parse_scenario(&dir().join(format!("{name}.toml"))).unwrap();
    scenario.file.run.mode = Mode::Solve;
    let out = tempfile::tempdir().unwrap();
    let job = Job::new(
        scenario,
        &Overrides {
            out: Some(out.path().to_path_buf()),
            ..Overrides::default()
        },
    )
    .unwrap();
    let r = job.run().unwrap().summary;
    let v = &r["verification"];

    assert_eq!(r["status"], expect.status.as_str(), "{name}: {r}");
    assert_eq!(r["converged"], expect.converged, "{name}");
    assert_eq!(v["members"], expect.members, "{name}");
    if let Some(tol) = expect.max_keep_in_violation {
        let got = v["max_keep_in_violation"].as_f64().unwrap();
        assert!(got <= tol, "{name}: keep-in violation {got}");
    }
    if let Some(tol) = expect.max_obstacle_penetration {
        let got = v["max_obstacle_penetration"].as_f64().unwrap();
        assert!(got <= tol, "{name}: penetration {got}");
    }
    if let Some(min) = expect.min_robustness {
        let got = r["robustness_exact"].as_f64().unwrap();
        assert!(got > min, "{name}: robustness {got}");
    }
    if let (Some(goal), Some(tol)) = (expect.terminal_mean, expect.terminal_tolerance) {
        for i in 0..2 {
            let got = v["terminal_mean"][i].as_f64().unwrap();
            assert!((got - goal[i]).abs() <= tol, "{name}: terminal mean axis {i} at {got}");
        }
    }
}

#[test]
fn box_keep_in() {
    golden("box");
}

#[test]
fn polyhedron_keep_in() {
    golden("polyhedron");
}

#[test]
fn one_obstacle() {
    golden("obstacles1");
}

#[test]
fn three_obstacles() {
    golden("obstacles3");
}

#[test]
fn five_obstacles() {
    golden("obstacles5");
}

#[test]
fn stretch_scenes_parse() {
    for n in 6..=8 {
        let s = parse_scenario(&dir().join(format!("obstacles{n}.toml"))).unwrap();
        assert_eq!(s.obstacles.len(), n);
        assert!(s.formula.is_some());
    }
}
