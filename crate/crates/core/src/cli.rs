//! The `lfd` command-line front end.
//!
//! Every subcommand is a thin wrapper over the library. Results go to the
//! supplied writer (standard output for the binary), diagnostics to standard
//! error. Exit codes: 0 success, 2 invalid input or configuration,
//! 3 numeric failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{build_dataset_layout, validate_dataset, PoseRecord};
use crate::dmp::{reproduction_rmse, DmpParams};
use crate::error::{Error, Result};
use crate::pose::{sample_viewpoints, ObjectConfig, ViewpointSet};
use crate::task::{GoalRule, TaskProgram};
use crate::trajectory::{parse_trajectory, rmse, write_trajectory, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lfd",
    version,
    about = "Teach, replan and evaluate movement primitives; build pose datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a sub-task on a demonstration and append it to a program.
    Teach(TeachArgs),
    /// Replan a whole program from a new start configuration.
    Plan(PlanArgs),
    /// Per-channel RMSE between two trajectories, or of a taught sub-task.
    Eval(EvalArgs),
    /// Print seeded camera viewpoints for an object.
    SampleViews(ViewArgs),
    /// Write a pose/rgb/mask dataset scaffold.
    Dataset(DatasetArgs),
    /// Check a dataset directory against the layout.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GoalModeArg {
    Relative,
    Absolute,
}

#[derive(Debug, Args)]
pub struct TeachArgs {
    /// Demonstration CSV (`t,q0,q1,...`).
    #[arg(long)]
    pub demo: PathBuf,
    /// Program file; created when missing.
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value_t = 25.0)]
    pub alpha_z: f64,
    #[arg(long, default_value_t = 50)]
    pub n_basis: usize,
    /// Integration step in seconds [default: duration / 1000].
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = GoalModeArg::Relative)]
    pub goal_mode: GoalModeArg,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub program: PathBuf,
    /// Start configuration, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, default_value_t = 1.0)]
    pub tau_scale: f64,
    /// Planned trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `t,segment,q0,...` for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference trajectory (or the demonstration of `--name`).
    #[arg(long)]
    pub demo: PathBuf,
    /// Trajectory to compare; sampled at the reference timestamps when the
    /// grids differ.
    #[arg(long, conflicts_with_all = ["program", "name"], required_unless_present = "program")]
    pub trajectory: Option<PathBuf>,
    /// Program holding the sub-task to replay against `--demo`.
    #[arg(long, requires = "name")]
    pub program: Option<PathBuf>,
    #[arg(long, requires = "program")]
    pub name: Option<String>,
    /// Also write `t,ref_q0,...,cmp_q0,...` for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub count: usize,
    /// Camera distance from the object origin, meters.
    #[arg(long, default_value_t = 0.15)]
    pub radius: f64,
    /// Object symmetry/grasp configuration (JSON).
    #[arg(long)]
    pub symmetry: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Degrees above the plane orthogonal to the symmetry axis.
    #[arg(long, default_value_t = 10.0)]
    pub elevation_min: f64,
    #[arg(long, default_value_t = 80.0)]
    pub elevation_max: f64,
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Dataset root directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Dataset root directory.
    pub root: PathBuf,
    /// Also require every named rgb/mask image to exist.
    #[arg(long)]
    pub require_images: bool,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_INPUT
    }
}

/// Runs one parsed command; `Ok` carries the exit code.
pub fn execute<W: Write>(command: &Command, out: &mut W) -> Result<i32> {
    match command {
        Command::Teach(a) => cmd_teach(a, out).map(|_| EXIT_OK),
        Command::Plan(a) => cmd_plan(a, out).map(|_| EXIT_OK),
        Command::Eval(a) => cmd_eval(a, out).map(|_| EXIT_OK),
        Command::SampleViews(a) => cmd_sample_views(a, out).map(|_| EXIT_OK),
        Command::Dataset(a) => cmd_dataset(a, out).map(|_| EXIT_OK),
        Command::Validate(a) => cmd_validate(a, out),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn read_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(&read_text(path)?).map_err(|e| match e {
        Error::Input { line, message } => Error::Input {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Parses `"v0,v1,..."`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::input(format!("invalid number {s:?} in {text:?}"))),
            }
        })
        .collect()
}

fn write_out<W: Write>(out: &mut W, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn cmd_teach<W: Write>(args: &TeachArgs, out: &mut W) -> Result<()> {
    let demo = read_trajectory(&args.demo)?;
    let mut program = if args.program.exists() {
        TaskProgram::from_json(&read_text(&args.program)?)?
    } else {
        TaskProgram::new()
    };
    let duration = demo.duration();
    let mut params = DmpParams::with_alpha_z(args.alpha_z);
    params.n_basis = args.n_basis;
    params.tau = duration;
    params.dt = args.dt.unwrap_or(1e-3 * duration);
    let rule = match args.goal_mode {
        GoalModeArg::Relative => GoalRule::Relative,
        GoalModeArg::Absolute => GoalRule::Absolute,
    };
    let sub = program.add_subtask(&demo, &args.name, &params, rule)?;
    let errors = reproduction_rmse(&sub.model, &demo)?;
    let amplitudes = sub.model.forcing.demo_amplitude.clone();
    fs::write(&args.program, program.to_json())?;
    log::info!(
        "program {} now has {} sub-tasks",
        args.program.display(),
        program.len()
    );

    let mut text = format!(
        "sub-task {} (#{}): {} channels, tau {} s\n",
        args.name,
        program.len(),
        demo.channel_count(),
        duration
    );
    for (c, (e, a)) in errors.iter().zip(&amplitudes).enumerate() {
        let rel = if a.abs() > 0.0 {
            format!("{:.4}% of amplitude", 100.0 * e / a.abs())
        } else {
            "zero amplitude".to_string()
        };
        text.push_str(&format!("rmse q{c} {e:.12e} ({rel})\n"));
    }
    write_out(out, &text)
}

pub fn cmd_plan<W: Write>(args: &PlanArgs, out: &mut W) -> Result<()> {
    let program = TaskProgram::from_json(&read_text(&args.program)?)?;
    let start = parse_vector(&args.start)?;
    let plan = program.plan(&start, args.tau_scale)?;
    fs::write(&args.out, write_trajectory(&plan.trajectory))?;
    if let Some(path) = &args.plot {
        let traj = &plan.trajectory;
        let mut csv = String::from("t,segment");
        for c in 0..traj.channel_count() {
            csv.push_str(&format!(",q{c}"));
        }
        csv.push('\n');
        let mut seg = 0;
        for i in 0..traj.len() {
            while i > plan.segments[seg].end_index {
                seg += 1;
            }
            csv.push_str(&format!("{},{seg}", traj.times()[i]));
            for v in traj.position(i) {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        fs::write(path, csv)?;
    }

    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.12}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut text = format!(
        "planned {} samples over {} s\nfinal {}\n",
        plan.trajectory.len(),
        plan.trajectory.end_time(),
        join(plan.trajectory.last_position())
    );
    for s in &plan.segments {
        text.push_str(&format!(
            "sub-task {}: goal {} final {} goal error {:.12e}\n",
            s.name,
            join(&s.goal),
            join(&s.final_position),
            s.goal_error()
        ));
    }
    write_out(out, &text)
}

pub fn cmd_eval<W: Write>(args: &EvalArgs, out: &mut W) -> Result<()> {
    let reference = read_trajectory(&args.demo)?;
    let (errors, compared) = match (&args.trajectory, &args.program, &args.name) {
        (Some(path), _, _) => {
            let other = read_trajectory(path)?;
            if other.channel_count() != reference.channel_count() {
                return Err(Error::validation(format!(
                    "channel count mismatch: {} vs {}",
                    reference.channel_count(),
                    other.channel_count()
                )));
            }
            let other = if other.times() == reference.times() {
                other
            } else {
                other.sample_at(reference.times())?
            };
            (rmse(&reference, &other)?, other)
        }
        (None, Some(program), Some(name)) => {
            let program = TaskProgram::from_json(&read_text(program)?)?;
            let sub = program
                .subtasks()
                .iter()
                .find(|s| &s.name == name)
                .ok_or_else(|| Error::validation(format!("no sub-task named {name:?}")))?;
            if sub.model.n_channels != reference.channel_count() {
                return Err(Error::validation(format!(
                    "sub-task {name:?} has {} channels, demonstration has {}",
                    sub.model.n_channels,
                    reference.channel_count()
                )));
            }
            let tau = sub.model.params.tau;
            let replay = crate::dmp::rollout(
                &sub.model,
                &sub.model.demo_start,
                &sub.model.demo_goal,
                tau,
                tau.max(reference.duration()),
            )?;
            let shifted = reference.shifted(-reference.start_time())?;
            let replay = replay.sample_at(shifted.times())?;
            (rmse(&shifted, &replay)?, replay)
        }
        _ => {
            return Err(Error::input(
                "eval needs --trajectory or --program with --name",
            ))
        }
    };
    if let Some(path) = &args.plot {
        let n = reference.channel_count();
        let mut csv = String::from("t");
        for c in 0..n {
            csv.push_str(&format!(",ref_q{c}"));
        }
        for c in 0..n {
            csv.push_str(&format!(",cmp_q{c}"));
        }
        csv.push('\n');
        for i in 0..reference.len() {
            csv.push_str(&reference.times()[i].to_string());
            for v in reference.position(i).iter().chain(compared.position(i)) {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        fs::write(path, csv)?;
    }
    let mut text = String::new();
    for (c, e) in errors.iter().enumerate() {
        text.push_str(&format!("rmse q{c} {e:.15e}\n"));
    }
    write_out(out, &text)
}

fn sample(args: &SamplingArgs) -> Result<ViewpointSet> {
    let config = ObjectConfig::from_json(&read_text(&args.symmetry)?)?;
    let lo = args.elevation_min.to_radians();
    let hi = args.elevation_max.to_radians();
    sample_viewpoints(
        args.count,
        args.radius,
        (lo, hi),
        &config.symmetry,
        args.seed,
    )
}

pub fn cmd_sample_views<W: Write>(args: &ViewArgs, out: &mut W) -> Result<()> {
    let set = sample(&args.sampling)?;
    let mut csv = String::from("index,azimuth_deg,elevation_deg,roll_deg,qw,qx,qy,qz,x,y,z\n");
    for (i, v) in set.views.iter().enumerate() {
        let q = v.camera.wxyz();
        let t = v.camera.translation();
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{},{},{}\n",
            v.azimuth.to_degrees(),
            v.elevation.to_degrees(),
            v.roll.to_degrees(),
            q[0],
            q[1],
            q[2],
            q[3],
            t.x,
            t.y,
            t.z
        ));
    }
    match &args.out {
        Some(path) => {
            fs::write(path, csv)?;
            write_out(
                out,
                &format!(
                    "wrote {} viewpoints to {}\n",
                    set.views.len(),
                    path.display()
                ),
            )
        }
        None => write_out(out, &csv),
    }
}

pub fn cmd_dataset<W: Write>(args: &DatasetArgs, out: &mut W) -> Result<()> {
    let set = sample(&args.sampling)?;
    let records: Vec<PoseRecord> = set
        .object_in_camera()
        .iter()
        .map(PoseRecord::from_pose)
        .collect();
    let layout = build_dataset_layout(&args.out, &records)?;
    write_out(
        out,
        &format!(
            "wrote {} pose files under {}\n",
            layout.count,
            layout.root.display()
        ),
    )
}

/// Exit code 2 when the dataset has violations.
pub fn cmd_validate<W: Write>(args: &ValidateArgs, out: &mut W) -> Result<i32> {
    let report = validate_dataset(&args.root, args.require_images);
    let mut text = String::new();
    for v in &report.violations {
        text.push_str(&format!("violation: {v}\n"));
    }
    text.push_str(&format!(
        "{} entries, {} violations\n",
        report.count,
        report.violations.len()
    ));
    write_out(out, &text)?;
    Ok(if report.is_clean() {
        EXIT_OK
    } else {
        EXIT_INPUT
    })
}
