use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn ensemble(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensemble")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_and_parse_errors_exit_with_2() {
    assert_eq!(code(&ensemble(&[])), 2);
    assert_eq!(code(&ensemble(&["solve"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = ensemble(&["solve", "--scenario", s(&missing)]);
    assert_eq!(code(&o), 2);

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenario("box")).unwrap().replace("knots = 40", "knots = 30");
    fs::write(&bad, text).unwrap();
    let o = ensemble(&["solve", "--scenario", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("task.knots") && err.contains("task.horizon"), "{err}");
}

#[test]
fn basis_command_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = ensemble(&["basis", "--order", "4", "--samples", "11", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let table = fs::read_to_string(dir.path().join("basis.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(table.starts_with("k,a_k,c_k,m_plus,m_minus"));
    let samples = fs::read_to_string(dir.path().join("basis_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 12);
}

#[test]
fn solve_then_verify_replays_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let solved = dir.path().join("solved");
    let o = ensemble(&["solve", "--scenario", s(&scenario("box")), "--out", s(&solved)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "controls.csv", "moments.csv", "members.csv", "constraints.csv", "plot.svg", "resolved.toml"] {
        assert!(solved.join(f).exists(), "missing {f}");
    }

    let replay = dir.path().join("replay");
    let controls = solved.join("controls.csv");
    let o = ensemble(&[
        "verify",
        "--scenario",
        s(&scenario("box")),
        "--controls",
        s(&controls),
        "--out",
        s(&replay),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&solved.join("report.json"));
    let mut verification = json(&replay.join("verification.json"));
    verification.as_object_mut().unwrap().remove("status");
    assert_eq!(report["verification"], verification);
    assert_eq!(
        fs::read(solved.join("members.csv")).unwrap(),
        fs::read(replay.join("members.csv")).unwrap()
    );
}

#[test]
fn box_plot_has_one_line_per_member_and_one_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    let o = ensemble(&["solve", "--scenario", s(&scenario("box")), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="member""#).count(), 50);
    let keep_in: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="keep-in""#)).collect();
    assert_eq!(keep_in.len(), 1);
    assert_eq!(keep_in[0].matches(',').count(), 4);
}

#[test]
fn obstacle_plot_draws_each_obstacle_once() {
    let dir = tempfile::tempdir().unwrap();
    let o = ensemble(&["simulate", "--scenario", s(&scenario("obstacles5")), "--grid", "7", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="obstacle""#).count(), 5);
    assert_eq!(svg.matches(r#"class="member""#).count(), 7);
    assert_eq!(svg.matches(r#"class="waypoint""#).count(), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<PathBuf> = ["a", "b"].iter().map(|r| dir.path().join(r)).collect();
    for out in &runs {
        let o = ensemble(&["solve", "--scenario", s(&scenario("polyhedron")), "--seed", "7", "--out", s(out)]);
        assert_eq!(code(&o), 0);
    }
    for f in ["controls.csv", "moments.csv", "members.csv", "constraints.csv", "plot.svg"] {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = ensemble(&["simulate", "--scenario", s(&scenario("box")), "--grid", "9", "--out", s(&first)]);
    assert_eq!(code(&o), 0);
    let second = dir.path().join("second");
    let o = ensemble(&["run", "--scenario", s(&first.join("resolved.toml")), "--out", s(&second)]);
    assert_eq!(code(&o), 0);
    assert!(second.join("simulate.json").exists());
    assert_eq!(
        fs::read(first.join("members.csv")).unwrap(),
        fs::read(second.join("members.csv")).unwrap()
    );
}

#[test]
fn verification_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // full speed straight ahead leaves the box through its top edge
    let controls = dir.path().join("straight.csv");
    let mut text = String::from("knot,t,v,omega\n");
    for k in 0..40 {
        text.push_str(&format!("{k},{},2,0\n", k as f64 * 0.05));
    }
    fs::write(&controls, text).unwrap();
    let out = dir.path().join("o");
    let o = ensemble(&["verify", "--scenario", s(&scenario("box")), "--controls", s(&controls), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let v = json(&out.join("verification.json"));
    assert_eq!(v["passed"], false);
    assert!(v["max_keep_in_violation"].as_f64().unwrap() > 0.05);
}

#[test]
fn malformed_controls_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let controls = dir.path().join("short.csv");
    fs::write(&controls, "knot,t,v,omega\n0,0,1,0\n").unwrap();
    let o = ensemble(&["verify", "--scenario", s(&scenario("box")), "--controls", s(&controls), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    let o = ensemble(&["verify", "--scenario", s(&scenario("box")), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn non_convergence_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    // a keep-in slab the start pose lies outside of, with a single outer iteration
    let text = fs::read_to_string(scenario("box"))
        .unwrap()
        .replace("lo = [-0.2, -0.05]", "lo = [5.0, -0.05]")
        .replace("hi = [3.3, 2.6]", "hi = [6.0, 2.6]")
        .replace("[run]", "[run]\nmax_outer = 1\nrestarts = 0");
    let path = dir.path().join("stuck.toml");
    fs::write(&path, text).unwrap();
    let out = dir.path().join("o");
    let o = ensemble(&["solve", "--scenario", s(&path), "--out", s(&out)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("report.json"))["status"], "not_converged");
}

#[test]
fn transform_reports_small_truncation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ensemble(&["transform", "--scenario", s(&scenario("box")), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let t = json(&dir.path().join("transform.json"));
    assert_eq!(t["nodes"], 50);
    assert!(t["max_sup_error"].as_f64().unwrap() < 1e-3);
    let csv = fs::read_to_string(dir.path().join("transform.csv")).unwrap();
    assert_eq!(csv.lines().count(), 202);
}
