use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ensemble_cli::run::{self, Job, Overrides};
use ensemble_cli::scenario::Mode;
use ensemble_cli::{parse_scenario, CliError, RunArtifacts};

/// Moment-based ensemble planning for unicycles with uncertain speed scaling.
#[derive(Debug, Parser)]
#[command(name = "ensemble", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the basis recurrence, signed-part table and sampled basis functions.
    Basis {
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare sampled moments with the integrated moment system.
    Transform(ScenarioArgs),
    /// Roll the ensemble out under given (or initial-guess) controls.
    Simulate(ScenarioArgs),
    /// Solve the planning problem and verify the result on a member grid.
    Solve(ScenarioArgs),
    /// Verify a control file against the true constraints.
    Verify(ScenarioArgs),
    /// Closed-loop replanning against the plant.
    Receding(ScenarioArgs),
    /// Re-render a member trajectory CSV over the scenario geometry.
    Plot {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Member CSV with columns t,beta,px,py,theta.
        #[arg(long)]
        members: PathBuf,
    },
    /// Run whatever `run.mode` in the scenario says.
    Run(ScenarioArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (overrides run.out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Members in the verification grid (overrides run.grid).
    #[arg(long)]
    grid: Option<usize>,
    /// Knot control CSV (overrides run.controls).
    #[arg(long)]
    controls: Option<PathBuf>,
}

impl ScenarioArgs {
    fn job(&self, mode: Option<Mode>) -> Result<Job, CliError> {
        let mut scenario = parse_scenario(&self.scenario)?;
        if let Some(m) = mode {
            scenario.file.run.mode = m;
        }
        Job::new(
            scenario,
            &Overrides {
                out: self.out.clone(),
                seed: self.seed,
                grid: self.grid,
                controls: self.controls.clone(),
            },
        )
    }
}

fn dispatch(cmd: Command) -> Result<RunArtifacts, CliError> {
    match cmd {
        Command::Basis { order, samples, out } => run::basis(order, samples, &out),
        Command::Transform(a) => a.job(Some(Mode::Transform))?.run(),
        Command::Simulate(a) => a.job(Some(Mode::Simulate))?.run(),
        Command::Solve(a) => a.job(Some(Mode::Solve))?.run(),
        Command::Verify(a) => a.job(Some(Mode::Verify))?.run(),
        Command::Receding(a) => a.job(Some(Mode::Receding))?.run(),
        Command::Plot { args, members } => run::plot(&args.job(None)?, &members),
        Command::Run(a) => a.job(None)?.run(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(art) => {
            for f in &art.files {
                println!("wrote {}", f.display());
            }
            match art.status {
                run::Status::Ok => {}
                run::Status::VerificationFailed => eprintln!("verification failed"),
                run::Status::NotConverged => eprintln!("solver did not converge"),
            }
            ExitCode::from(art.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
