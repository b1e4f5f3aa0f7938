//! Command implementations. Every scenario command writes `resolved.toml` next
//! to its outputs so the run can be repeated from the output directory alone.

use std::fs;
use std::path::{Path, PathBuf};

use moment_ensemble::ensemble::{
    lift, rollout_ensemble, EnsembleGrid, MemberTrajectory, RolloutOptions,
};
use moment_ensemble::export;
use moment_ensemble::legendre::{signed_part_integrals, OrthonormalBasis};
use moment_ensemble::moments::{forward_transform, integrate_moments, MomentVector};
use moment_ensemble::ocp::{
    arc_initialization, expand_controls, open_loop_run, receding_horizon_run, solve_exploration, solve_visit_avoid,
    verify_controls, OcpSpec, SolveReport, VerificationSummary,
};
use serde::Serialize;
use serde_json::json;

use crate::controls::{read_controls, write_controls};
use crate::scenario::{Mode, Scenario};
use crate::svg::{render_svg, Plot};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    VerificationFailed,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 3,
            Status::NotConverged => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub status: Status,
    /// Contents of the main JSON report.
    pub summary: serde_json::Value,
}

/// Command-line overrides of `[run]` fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    /// Control file, relative to the working directory.
    pub controls: Option<PathBuf>,
}

/// A scenario with overrides applied, ready to run.
#[derive(Debug, Clone)]
pub struct Job {
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub controls: Option<PathBuf>,
}

impl Job {
    pub fn new(scenario: Scenario, ov: &Overrides) -> Result<Self, CliError> {
        let mut file = scenario.file.clone();
        if let Some(s) = ov.seed {
            file.run.seed = s;
        }
        if let Some(g) = ov.grid {
            file.run.grid = g;
        }
        let controls = match &ov.controls {
            Some(p) => {
                let abs = std::path::absolute(p).map_err(|e| io_err(p, e))?;
                file.run.controls = Some(abs.display().to_string());
                Some(abs)
            }
            None => file.run.controls.as_deref().map(|c| scenario.resolve(c)),
        };
        let out_dir = ov.out.clone().unwrap_or_else(|| PathBuf::from(&file.run.out));
        file.run.out = out_dir.display().to_string();
        let scenario = Scenario::from_file(file, &scenario.base_dir)?;
        Ok(Job {
            scenario,
            out_dir,
            controls,
        })
    }

    pub fn run(&self) -> Result<RunArtifacts, CliError> {
        match self.scenario.file.run.mode {
            Mode::Transform => self.transform(),
            Mode::Simulate => self.simulate(),
            Mode::Solve => self.solve(),
            Mode::Verify => self.verify(),
            Mode::Receding => self.receding(),
        }
    }

    fn writer(&self) -> Result<Outputs, CliError> {
        let mut out = Outputs::new(&self.out_dir)?;
        out.text("resolved.toml", &self.scenario.echo())?;
        Ok(out)
    }

    /// Knot controls from the control file, or the arc initialization.
    fn knot_controls(&self, spec: &OcpSpec) -> Result<Vec<moment_ensemble::ensemble::Control>, CliError> {
        match &self.controls {
            Some(p) => read_controls(p, spec.knots),
            None => Ok(arc_initialization(spec).controls),
        }
    }

    fn plot(&self, title: &str, trajs: &[MemberTrajectory], dashed: &[MemberTrajectory]) -> Plot {
        let s = &self.scenario;
        Plot {
            title: title.to_string(),
            paths: trajs.iter().map(path_of).collect(),
            dashed: dashed.iter().map(path_of).collect(),
            keep_in: s.keep_in.iter().map(|r| r.poly.clone()).collect(),
            waypoints: s.waypoints.iter().map(|r| r.poly.clone()).collect(),
            obstacles: s.obstacles.iter().map(|o| o.spec.clone()).collect(),
            start: Some([s.start.px, s.start.py]),
            goal: Some(s.file.task.target),
        }
    }

    /// Compares quadrature moments of the sampled ensemble with the integrated
    /// moment system along the same controls.
    pub fn transform(&self) -> Result<RunArtifacts, CliError> {
        let s = &self.scenario;
        let spec = s.ocp_spec()?;
        let seq = expand_controls(&spec, &self.knot_controls(&spec)?)?;
        let grid = EnsembleGrid::gauss_legendre(s.interval, s.file.run.grid)?;
        let trajs = rollout_ensemble(&grid, &lift(&s.start), &seq, RolloutOptions::default(), s.file.run.exec)?;
        let integrated = integrate_moments(&spec.initial, &seq)?;

        let mut out = self.writer()?;
        let mut errors = String::from("t,sup_error\n");
        let mut max_err = 0.0f64;
        let mut final_err = 0.0;
        for (i, m) in integrated.states.iter().enumerate() {
            let profile: Vec<_> = trajs.iter().map(|tr| tr.states[i]).collect();
            let sampled: MomentVector = forward_transform(&grid, &profile, s.order())?;
            final_err = sampled.sup_distance(m);
            max_err = max_err.max(final_err);
            errors.push_str(&format!("{},{final_err}\n", i as f64 * seq.dt()));
        }
        out.text("transform.csv", &errors)?;
        out.csv("moments.csv", |w| export::write_moment_trajectory(w, &integrated))?;
        let summary = json!({
            "nodes": grid.len(),
            "order": s.order(),
            "steps": seq.len(),
            "max_sup_error": max_err,
            "final_sup_error": final_err,
        });
        out.json("transform.json", &summary)?;
        Ok(out.finish(Status::Ok, summary))
    }

    pub fn simulate(&self) -> Result<RunArtifacts, CliError> {
        let s = &self.scenario;
        let spec = s.ocp_spec()?;
        let knots = self.knot_controls(&spec)?;
        let seq = expand_controls(&spec, &knots)?;
        let grid = EnsembleGrid::uniform(s.interval, s.file.run.grid)?;
        let trajs = rollout_ensemble(&grid, &lift(&s.start), &seq, RolloutOptions::default(), s.file.run.exec)?;
        let moments = integrate_moments(&spec.initial, &seq)?;

        let mut out = self.writer()?;
        out.csv("members.csv", |w| export::write_member_trajectories(w, &trajs))?;
        out.csv("moments.csv", |w| export::write_moment_trajectory(w, &moments))?;
        out.text("plot.svg", &render_svg(&self.plot(&s.file.name, &trajs, &[])))?;
        let summary = json!({
            "members": trajs.len(),
            "terminal_member_mean": member_mean(&trajs),
            "terminal_moment_mean": moments.final_state().mean_position(),
        });
        out.json("simulate.json", &summary)?;
        Ok(out.finish(Status::Ok, summary))
    }

    pub fn solve(&self) -> Result<RunArtifacts, CliError> {
        let s = &self.scenario;
        let spec = s.ocp_spec()?;
        let opts = s.solver_options();
        let mut report: SolveReport = if spec.obstacles.is_empty() {
            solve_exploration(&spec, &opts)?
        } else {
            solve_visit_avoid(&spec, &opts)?
        };
        let seq = expand_controls(&spec, &report.decision.controls)?;
        let (summary, trajs) = verify_controls(&s.verification_spec(), &seq)?;
        report.verification = Some(summary.clone());
        let status = status_of(report.converged, &summary);

        let mut out = self.writer()?;
        out.csv("controls.csv", |w| write_controls(w, &report.decision.controls, spec.knot_dt()).map_err(csv_io))?;
        out.csv("moments.csv", |w| export::write_moment_trajectory(w, &report.trajectory))?;
        out.csv("members.csv", |w| export::write_member_trajectories(w, &trajs))?;
        out.csv("constraints.csv", |w| export::write_constraint_table(w, &spec.bands, &spec.obstacles))?;
        out.text("plot.svg", &render_svg(&self.plot(&s.file.name, &trajs, &[])))?;
        let mut value = serde_json::to_value(&report)?;
        value["status"] = serde_json::to_value(status)?;
        out.json("report.json", &value)?;
        Ok(out.finish(status, value))
    }

    /// Replays a control file against the true geometry.
    pub fn verify(&self) -> Result<RunArtifacts, CliError> {
        let s = &self.scenario;
        if self.controls.is_none() {
            return Err(CliError::Usage(
                "verify needs a control file (run.controls or --controls)".into(),
            ));
        }
        let spec = s.ocp_spec()?;
        let seq = expand_controls(&spec, &self.knot_controls(&spec)?)?;
        let (summary, trajs) = verify_controls(&s.verification_spec(), &seq)?;
        let status = status_of(true, &summary);

        let mut out = self.writer()?;
        out.csv("members.csv", |w| export::write_member_trajectories(w, &trajs))?;
        out.text("plot.svg", &render_svg(&self.plot(&s.file.name, &trajs, &[])))?;
        let mut value = serde_json::to_value(&summary)?;
        value["status"] = serde_json::to_value(status)?;
        out.json("verification.json", &value)?;
        Ok(out.finish(status, value))
    }

    /// Closed-loop replanning against the plant, compared with broadcasting
    /// the first plan open loop.
    pub fn receding(&self) -> Result<RunArtifacts, CliError> {
        let s = &self.scenario;
        let spec = s.ocp_spec()?;
        let plant = s.plant()?;
        let run = receding_horizon_run(&spec, &plant, &s.receding_options())?;
        let open = open_loop_run(&spec, &run.first_plan.decision.controls, &plant)?;
        let target = s.file.task.target;
        let closed_mean = member_mean(&run.plant);
        let open_mean = member_mean(&open);

        let mut out = self.writer()?;
        out.csv("plant.csv", |w| export::write_member_trajectories(w, &run.plant))?;
        out.csv("open_loop.csv", |w| export::write_member_trajectories(w, &open))?;
        out.csv("applied_controls.csv", |w| {
            write_controls(w, run.applied.pairs(), run.applied.dt()).map_err(csv_io)
        })?;
        out.text("plot.svg", &render_svg(&self.plot(&s.file.name, &run.plant, &open)))?;
        let summary = json!({
            "cycles": run.records.len(),
            "records": run.records,
            "plant_members": plant.samples(),
            "closed_loop_terminal_mean": closed_mean,
            "open_loop_terminal_mean": open_mean,
            "closed_loop_terminal_error": dist(closed_mean, target),
            "open_loop_terminal_error": dist(open_mean, target),
        });
        out.json("receding.json", &summary)?;
        Ok(out.finish(Status::Ok, summary))
    }
}

/// Writes `basis.csv` (recurrence and signed parts) and `basis_samples.csv`.
pub fn basis(order: usize, samples: usize, out_dir: &Path) -> Result<RunArtifacts, CliError> {
    if order > 40 {
        return Err(CliError::Usage(format!("order must be at most 40, got {order}")));
    }
    let basis = OrthonormalBasis::new(order);
    let table = signed_part_integrals(order);
    let mut out = Outputs::new(out_dir)?;
    out.csv("basis.csv", |w| export::write_basis_table(w, &basis, &table))?;
    out.csv("basis_samples.csv", |w| export::write_basis_samples(w, &basis, samples))?;
    Ok(out.finish(Status::Ok, json!({ "order": order, "samples": samples })))
}

/// Re-renders a member CSV (`t,beta,px,py,theta`) over the scenario geometry.
pub fn plot(job: &Job, members: &Path) -> Result<RunArtifacts, CliError> {
    let mut reader = csv::Reader::from_path(members).map_err(|e| CliError::Controls {
        path: members.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<(f64, Vec<[f64; 2]>)> = Vec::new();
    for rec in reader.deserialize::<(f64, f64, f64, f64, f64)>() {
        let (_, beta, px, py, _) = rec.map_err(|e| CliError::Controls {
            path: members.to_path_buf(),
            message: e.to_string(),
        })?;
        match paths.last_mut() {
            Some((b, p)) if *b == beta => p.push([px, py]),
            _ => paths.push((beta, vec![[px, py]])),
        }
    }
    let mut plot = job.plot(&job.scenario.file.name, &[], &[]);
    plot.paths = paths.into_iter().map(|(_, p)| p).collect();
    let mut out = Outputs::new(&job.out_dir)?;
    out.text("plot.svg", &render_svg(&plot))?;
    Ok(out.finish(Status::Ok, json!({ "paths": plot.paths.len() })))
}

fn status_of(converged: bool, v: &VerificationSummary) -> Status {
    if !converged {
        Status::NotConverged
    } else if !v.passed {
        Status::VerificationFailed
    } else {
        Status::Ok
    }
}

fn path_of(tr: &MemberTrajectory) -> Vec<[f64; 2]> {
    tr.states.iter().map(|z| z.position()).collect()
}

fn member_mean(trajs: &[MemberTrajectory]) -> [f64; 2] {
    let n = trajs.len().max(1) as f64;
    let mut acc = [0.0; 2];
    for tr in trajs {
        let p = tr.final_state().position();
        acc[0] += p[0] / n;
        acc[1] += p[1] / n;
    }
    acc
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        context: path.display().to_string(),
        source,
    }
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Output directory with a record of every file written.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn csv<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        let path = self.dir.join(name);
        f(&mut buf).map_err(|e| io_err(&path, e))?;
        fs::write(&path, buf).map_err(|e| io_err(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.text(name, &text)
    }

    fn finish(self, status: Status, summary: serde_json::Value) -> RunArtifacts {
        RunArtifacts {
            out_dir: self.dir,
            files: self.files,
            status,
            summary,
        }
    }
}
