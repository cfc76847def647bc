//! Subcommand orchestration. Every run writes its files into one directory
//! from a single thread; only the numerical work fans out.

use std::path::{Path, PathBuf};

use radshoot::assumptions::{check_assumptions, default_base_points, AssumptionReport};
use radshoot::degree::{phi_degree, DegreeReport, SimplexGrid};
use radshoot::dirichlet::{
    solve_dirichlet_scalar, solve_dirichlet_system, DirichletResult, DirichletSummary,
};
use radshoot::export;
use radshoot::integrator::residual;
use radshoot::pohozaev::{
    nonexistence_certificate, verify_cross_identity, verify_merged_identity_theta,
    verify_rellich_identity, verify_scalar_identity, BallSolution, Certificate, IdentityReport,
    MergedKind,
};
use radshoot::search::{find_zero, SolutionCandidate};
use radshoot::target::{dynamic_estimate_check, sweep, DynamicEstimateReport, SimplexPoint};
use radshoot::{integrate, Params, ShotConfig, ShotOutcome, SystemSpec};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, EXIT_CHECK, EXIT_NUMERICAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Shoot,
    Sweep,
    Degree,
    Find,
    Dirichlet,
    Pohozaev,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Shoot => "shoot",
            Command::Sweep => "sweep",
            Command::Degree => "degree",
            Command::Find => "find",
            Command::Dirichlet => "dirichlet",
            Command::Pohozaev => "pohozaev",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// One line for the terminal.
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SystemInfo {
    name: String,
    n: u32,
    #[serde(rename = "L")]
    dim: usize,
    params: Params,
}

#[derive(Serialize)]
struct Header {
    command: &'static str,
    system: SystemInfo,
    shot: ShotConfig,
    seed: u64,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    #[serde(flatten)]
    head: &'a Header,
    #[serde(flatten)]
    body: T,
}

struct Sink {
    dir: PathBuf,
    format: Format,
    files: Vec<PathBuf>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl Sink {
    fn new(dir: &Path, format: Format) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
        })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).map_err(|e| io_error(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if !self.format.json() {
            return Ok(());
        }
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| io_error(&self.dir.join(name), e))?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> radshoot::Result<()>,
    ) -> Result<(), CliError> {
        if !self.format.csv() {
            return Ok(());
        }
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.bytes(name, &buf)
    }

    fn plot_stub(&mut self, command: Command) -> Result<(), CliError> {
        if !self.format.csv() {
            return Ok(());
        }
        self.bytes("plot.py", plot_script(command).as_bytes())
    }
}

/// Runs one subcommand and writes its outputs below `cfg.output.dir`.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let spec = cfg.system_spec()?;
    let mut sink = Sink::new(Path::new(&cfg.output.dir), cfg.output.format)?;
    let head = Header {
        command: command.name(),
        system: SystemInfo {
            name: spec.name().to_string(),
            n: spec.n(),
            dim: spec.dim(),
            params: spec.params().clone(),
        },
        shot: cfg.shot,
        seed: cfg.output.seed,
    };
    let (exit_code, summary) = match command {
        Command::Shoot => shoot(&spec, cfg, &mut sink, &head)?,
        Command::Sweep => sweep_grid(&spec, cfg, &mut sink, &head)?,
        Command::Degree => degree(&spec, cfg, &mut sink, &head)?,
        Command::Find => find(&spec, cfg, &mut sink, &head)?,
        Command::Dirichlet => dirichlet(&spec, cfg, &mut sink, &head)?,
        Command::Pohozaev => pohozaev(&spec, cfg, &mut sink, &head)?,
        Command::Check => check(&spec, cfg, &mut sink, &head)?,
    };
    Ok(RunOutcome {
        exit_code,
        summary,
        files: sink.files,
    })
}

fn barycentre(level: f64, dim: usize) -> Vec<f64> {
    vec![level / dim as f64; dim]
}

#[derive(Serialize)]
struct ShootBody {
    alpha: Vec<f64>,
    outcome: ShotOutcome,
    nodes: usize,
    equation_residual: Option<f64>,
}

fn shoot(
    spec: &SystemSpec,
    cfg: &RunConfig,
    sink: &mut Sink,
    head: &Header,
) -> Result<(i32, String), CliError> {
    let alpha = match &cfg.experiment.alpha {
        Some(a) => a.clone(),
        None => barycentre(cfg.level()?, spec.dim()),
    };
    let (traj, outcome) = integrate(spec, &alpha, &cfg.shot)?;
    let nodes = traj.nodes().len();
    let equation_residual = (nodes >= 5).then(|| residual(&traj, spec, 400));
    let code = match outcome {
        ShotOutcome::Blowup { .. } | ShotOutcome::StepLimit { .. } => EXIT_NUMERICAL,
        _ => 0,
    };
    let summary = match &outcome {
        ShotOutcome::WallHit { r_alpha, .. } => format!("wall hit at r = {r_alpha}"),
        ShotOutcome::NoHitUpTo { r_max } => format!("no wall hit up to r = {r_max}"),
        ShotOutcome::Blowup { r_stop } => format!("blow-up at r = {r_stop}"),
        ShotOutcome::StepLimit { r_stop } => format!("step limit at r = {r_stop}"),
    };
    sink.csv("trajectory.csv", |w| export::write_trajectory_csv(&traj, w))?;
    sink.json(
        "outcome.json",
        &Report {
            head,
            body: ShootBody {
                alpha,
                outcome,
                nodes,
                equation_residual,
            },
        },
    )?;
    sink.plot_stub(Command::Shoot)?;
    Ok((code, summary))
}

#[derive(Serialize)]
struct SweepEntry {
    alpha: Vec<f64>,
    psi: Option<Vec<f64>>,
    /// `null` when the shot never hit.
    r_alpha: f64,
    hit_set: Vec<usize>,
}

#[derive(Serialize)]
struct SweepBody {
    level: f64,
    resolution: usize,
    no_hit_count: usize,
    points: Vec<SweepEntry>,
}

fn sweep_grid(
    spec: &SystemSpec,
    cfg: &RunConfig,
    sink: &mut Sink,
    head: &Header,
) -> Result<(i32, String), CliError> {
    let level = cfg.level()?;
    let grid = SimplexGrid::new(level, spec.dim(), cfg.experiment.k)?;
    let points = grid.points();
    let results = sweep(spec, &points, &cfg.shot)?;
    sink.csv("sweep.csv", |w| {
        export::write_sweep_csv(&points, &results, w)
    })?;
    let entries: Vec<SweepEntry> = points
        .iter()
        .zip(&results)
        .map(|(p, t)| SweepEntry {
            alpha: p.alpha().to_vec(),
            psi: t.psi.clone(),
            r_alpha: t.r_alpha,
            hit_set: t.hit_set.clone(),
        })
        .collect();
    let no_hit_count = results.iter().filter(|t| t.is_no_hit()).count();
    let summary = format!(
        "{} points, {no_hit_count} without a wall hit",
        entries.len()
    );
    sink.json(
        "sweep.json",
        &Report {
            head,
            body: SweepBody {
                level,
                resolution: grid.resolution(),
                no_hit_count,
                points: entries,
            },
        },
    )?;
    sink.plot_stub(Command::Sweep)?;
    Ok((0, summary))
}

#[derive(Serialize)]
struct DegreeBody {
    report: DegreeReport,
}

fn degree(
    spec: &SystemSpec,
    cfg: &RunConfig,
    sink: &mut Sink,
    head: &Header,
) -> Result<(i32, String), CliError> {
    let level = cfg.level()?;
    let target = match &cfg.experiment.target {
        Some(t) => t.clone(),
        None => barycentre(level, spec.dim()),
    };
    let target = SimplexPoint::new(target, level).map_err(|e| CliError::Validation {
        key: "experiment.target".into(),
        message: e.to_string(),
    })?;
    let grid = SimplexGrid::new(level, spec.dim(), cfg.experiment.k)?;
    let rep = phi_degree(spec, &target, &grid, &cfg.shot)?;
    let summary = format!("degree {} ({:?})", rep.degree, rep.method);
    sink.json(
        "degree.json",
        &Report {
            head,
            body: DegreeBody { report: rep },
        },
    )?;
    Ok((0, summary))
}

#[derive(Serialize)]
struct FindBody {
    candidate: SolutionCandidate,
    ground_state: bool,
    bracket_width: f64,
}

fn find(
    spec: &SystemSpec,
    cfg: &RunConfig,
    sink: &mut Sink,
    head: &Header,
) -> Result<(i32, String), CliError> {
    let level = cfg.level()?;
    let candidate = find_zero(spec, level, &cfg.shot, cfg.experiment.budget)?;
    let summary = format!(
        "candidate {:?}, achieved r = {}, {} shots",
        candidate.alpha0.alpha(),
        candidate.achieved_r,
        candidate.shots
    );
    sink.csv("trace.csv", |w| {
        export::write_trace_csv(&candidate.trace, w)
    })?;
    sink.json(
        "candidate.json",
        &Report {
            head,
            body: FindBody {
                ground_state: candidate.is_ground_state(),
                bracket_width: candidate.bracket_width(),
                candidate,
            },
        },
    )?;
    sink.plot_stub(Command::Find)?;
    Ok((0, summary))
}

fn solve_ball(
    spec: &SystemSpec,
    cfg: &RunConfig,
    radius: f64,
) -> Result<DirichletResult, CliError> {
    let e = &cfg.experiment;
    let res = match (spec.name(), spec.param("p")) {
        ("lane_emden_scalar", Some(p)) => solve_dirichlet_scalar(p, spec.n(), radius, &cfg.shot)?,
        _ => solve_dirichlet_system(
            spec,
            (e.a_range[0], e.a_range[1]),
            radius,
            &cfg.shot,
            e.budget,
        )?,
    };
    Ok(res)
}

#[derive(Serialize)]
struct BallEntry {
    radius: f64,
    result: DirichletSummary,
    equation_residual: Option<f64>,
}

#[derive(Serialize)]
struct DirichletBody {
    balls: Vec<BallEntry>,
}

fn dirichlet(
    spec: &SystemSpec,
    cfg: &RunConfig,
    sink: &mut Sink,
    head: &Header,
) -> Result<(i32, String), CliError> {
    let mut balls = Vec::new();
    for (i, &radius) in cfg.experiment.radii.iter().enumerate() {
        let res = solve_ball(spec, cfg, radius)?;
        let equation_residual = res.solution().map(|s| residual(s.trajectory(), spec, 400));
        if let Some(sol) = res.solution() {
            sink.csv(&format!("profile_{i}.csv"), |w| {
                export::write_ball_csv(sol, w)
            })?;
        }
        balls.push(BallEntry {
            radius,
            result: res.summary(),
            equation_residual,
        });
    }
    let found = balls
        .iter()
        .filter(|b| matches!(b.result, DirichletSummary::Found { .. }))
        .count();
    let summary = format!("{found} of {} balls solved", balls.len());
    sink.json(
        "dirichlet.json",
        &Report {
            head,
            body: DirichletBody { balls },
        },
    )?;
    sink.plot_stub(Command::Dirichlet)?;
    Ok((0, summary))
}

#[derive(Serialize)]
struct IdentityEntry {
    radius: f64,
    found: bool,
    reason: Option<String>,
    identities: Vec<IdentityReport>,
}

#[derive(Serialize)]
struct PohozaevBody {
    certificate: Certificate,
    certificate_text: String,
    balls: Vec<IdentityEntry>,
}

fn identities(
    spec: &SystemSpec,
    sol: &BallSolution,
    theta: f64,
) -> Result<Vec<IdentityReport>, CliError> {
    let mut out = Vec::new();
    if let ("lane_emden_scalar", Some(p)) = (spec.name(), spec.param("p")) {
        out.push(verify_scalar_identity(sol, p)?);
        out.push(verify_rellich_identity(sol, 0)?.identity);
    } else if let Some(kind) = MergedKind::from_spec(spec) {
        out.push(verify_merged_identity_theta(sol, kind, theta)?);
        out.push(verify_cross_identity(sol)?);
    } else {
        out.push(verify_cross_identity(sol)?);
        for i in 0..sol.dim() {
            out.push(verify_rellich_identity(sol, i)?.identity);
        }
    }
    Ok(out)
}

fn pohozaev(
    spec: &SystemSpec,
    cfg: &RunConfig,
    sink: &mut Sink,
    head: &Header,
) -> Result<(i32, String), CliError> {
    let certificate = nonexistence_certificate(spec)?;
    let certificate_text = certificate.text();
    let mut balls = Vec::new();
    for &radius in &cfg.experiment.radii {
        let entry = match solve_ball(spec, cfg, radius)? {
            DirichletResult::Found(sol) => IdentityEntry {
                radius,
                found: true,
                reason: None,
                identities: identities(spec, &sol, cfg.experiment.theta)?,
            },
            DirichletResult::NotFound { reason, .. } => IdentityEntry {
                radius,
                found: false,
                reason: Some(reason),
                identities: Vec::new(),
            },
        };
        balls.push(entry);
    }
    sink.bytes(
        "certificate.txt",
        format!("{certificate_text}\n").as_bytes(),
    )?;
    sink.json(
        "pohozaev.json",
        &Report {
            head,
            body: PohozaevBody {
                certificate,
                certificate_text: certificate_text.clone(),
                balls,
            },
        },
    )?;
    Ok((0, certificate_text))
}

#[derive(Serialize)]
struct EstimateEntry {
    base_point: Vec<f64>,
    delta: f64,
    report: DynamicEstimateReport,
}

#[derive(Serialize)]
struct CheckBody {
    ok: bool,
    assumptions: AssumptionReport,
    dynamic_estimates: Vec<EstimateEntry>,
}

fn check(
    spec: &SystemSpec,
    cfg: &RunConfig,
    sink: &mut Sink,
    head: &Header,
) -> Result<(i32, String), CliError> {
    let e = &cfg.experiment;
    let seed = cfg.output.seed;
    let bases = match &e.base_points {
        Some(b) => b.clone(),
        None => default_base_points(spec.dim(), e.a.unwrap_or(1.0)),
    };
    let assumptions = check_assumptions(spec, e.box_max, e.samples, &bases, e.delta0, seed)?;
    let mut dynamic_estimates = Vec::new();
    for entry in assumptions.control_entries.iter().filter(|c| c.ok) {
        for &delta in &e.deltas {
            dynamic_estimates.push(EstimateEntry {
                base_point: entry.base_point.clone(),
                delta,
                report: dynamic_estimate_check(
                    spec,
                    entry,
                    delta,
                    e.estimate_samples,
                    seed,
                    &cfg.shot,
                )?,
            });
        }
    }
    let ok = assumptions.all_ok() && dynamic_estimates.iter().all(|d| d.report.ok);
    let summary = if ok {
        "all checks passed".to_string()
    } else {
        "a check failed".to_string()
    };
    sink.json(
        "check.json",
        &Report {
            head,
            body: CheckBody {
                ok,
                assumptions,
                dynamic_estimates,
            },
        },
    )?;
    Ok((if ok { 0 } else { EXIT_CHECK }, summary))
}

fn plot_script(command: Command) -> String {
    let body = match command {
        Command::Shoot => {
            "d = read(\"trajectory.csv\")\n\
             for c in [k for k in d.dtype.names if k.startswith(\"u\")]:\n    \
             plt.plot(d[\"r\"], d[c], label=c)\n\
             plt.xlabel(\"r\")\n"
        }
        Command::Sweep => {
            "d = read(\"sweep.csv\")\n\
             plt.semilogy(d[\"alpha_1\"], d[\"r_alpha\"], \".\")\n\
             plt.xlabel(\"alpha_1\")\nplt.ylabel(\"r_alpha\")\n"
        }
        Command::Find => {
            "d = read(\"trace.csv\")\n\
             plt.semilogy(d[\"r_mid\"], \"o-\")\n\
             plt.xlabel(\"iteration\")\nplt.ylabel(\"r at midpoint\")\n"
        }
        _ => {
            "import glob\n\
             for name in sorted(glob.glob(\"profile_*.csv\")):\n    \
             d = read(name)\n    \
             for c in [k for k in d.dtype.names if k.startswith(\"u\")]:\n        \
             plt.plot(d[\"r\"], d[c], label=f\"{name} {c}\")\n"
        }
    };
    format!(
        "# Plot stub for `radshoot {}` output; run from the output directory.\n\
         import numpy as np\n\
         import matplotlib.pyplot as plt\n\n\
         def read(name):\n    \
         return np.genfromtxt(name, delimiter=\",\", names=True, comments=\"#\")\n\n\
         {body}\
         plt.legend()\n\
         plt.savefig(\"{}.png\")\n",
        command.name(),
        command.name()
    )
}
