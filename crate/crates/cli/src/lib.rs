//! `swarm` command-line tool: single runs, sweeps, calibration,
//! classification and the live server.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

pub mod manifest;

use std::ffi::OsString;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarm_core::calibration::{self, SensorStats};
use swarm_core::config::RunConfig;
use swarm_core::metrics::{PhaseLabel, WindowSummary};
use swarm_core::record::{record_run, RunRecord, TraceFormat};
use swarm_core::scenarios;
use swarm_core::serde_ext::fmt_f64;
use swarm_core::sweep::{self, GridSummary, PhaseCell, PhaseFormat, SweepPlan};
use swarm_core::SwarmError;
use thiserror::Error;

use crate::manifest::{default_manifest_path, FileDigest, RunManifest};

/// Reports to stdout, ignoring write errors: a closed pipe (`swarm ... | head`)
/// must not abort a command whose real output is files.
macro_rules! say {
    () => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout());
    }};
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "swarm", version, about = "Minimal reactive robot swarm simulator")]
pub struct Cli {
    /// Manifest to append to (default: manifest.jsonl beside the output).
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    /// Run the command a second time and fail unless every output file is
    /// byte-identical.
    #[arg(long, global = true)]
    pub deterministic_check: bool,

    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Simulate one world and write its record.
    Run(RunArgs),
    /// Run a parameter sweep and write the phase-diagram table.
    Sweep(SweepArgs),
    /// Build a calibration profile from measured robot trials.
    Calibrate(CalibrateArgs),
    /// Print the phase label and metrics of a recorded run.
    Classify(ClassifyArgs),
    /// Serve a live, steerable session over HTTP and WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration (JSON); may carry a snapshot state to resume from.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ticks to simulate (default: the configuration's).
    #[arg(long)]
    pub ticks: Option<u64>,
    /// Record file; `.bin` writes the binary trace, anything else JSON lines.
    #[arg(long)]
    pub out: PathBuf,
    /// Record metrics only, without per-agent poses.
    #[arg(long)]
    pub metrics_only: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep plan (JSON).
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Phase-diagram table; a grid summary is written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// `csv` or `jsonl` (default: from the output extension).
    #[arg(long)]
    pub format: Option<PhaseFormat>,
    /// Overrides the plan's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Measurement CSV: robot_id,u1,u2,speed_cm_s,turn_deg_s.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Calibration profile (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Sensor range and half-angle distributions (JSON); default: the
    /// measured means.
    #[arg(long)]
    pub sensor: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Run record, JSON lines or binary.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Initial run configuration (default: the six-robot mill).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory `/phase-diagram` serves tables from.
    #[arg(long, default_value = ".")]
    pub data_dir: PathBuf,
    /// Frames per wall second while running (at most 60).
    #[arg(long, default_value_t = 60.0)]
    pub frame_rate: f64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Input(SwarmError),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn input_error(path: &Path) -> impl FnOnce(SwarmError) -> CliError + '_ {
    move |e| match e {
        SwarmError::Io(io) => CliError::Usage(format!("cannot read {}: {io}", path.display())),
        other => CliError::Input(other),
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cli: Cli, argv: Vec<String>) -> Result<()> {
    let check = cli.deterministic_check;
    let manifest = cli.manifest;
    match cli.command {
        Cmd::Run(a) => cmd_run(a, check, manifest, argv),
        Cmd::Sweep(a) => cmd_sweep(a, check, manifest, argv),
        Cmd::Calibrate(a) => cmd_calibrate(a, check, manifest, argv),
        Cmd::Classify(a) => cmd_classify(a),
        Cmd::Serve(a) => cmd_serve(a),
    }
}

/// Writes the outputs via `produce` (which receives the primary output path
/// and returns every file it wrote, primary first). With `check`, produces
/// them again in a scratch directory and compares the bytes.
fn produce<S>(
    out: &Path,
    check: bool,
    produce: impl Fn(&Path) -> Result<(Vec<PathBuf>, S)>,
) -> Result<(Vec<FileDigest>, S, Option<bool>)> {
    let (paths, summary) = produce(out)?;
    let digests: Vec<FileDigest> = paths.iter().map(|p| FileDigest::of(p)).collect::<std::io::Result<_>>().map_err(runtime)?;
    if !check {
        return Ok((digests, summary, None));
    }
    let scratch = tempfile::tempdir().map_err(runtime)?;
    let name = out.file_name().ok_or_else(|| CliError::Usage("output path has no file name".into()))?;
    let (again, _) = produce(&scratch.path().join(name))?;
    for (first, second) in digests.iter().zip(&again) {
        let second = FileDigest::of(second).map_err(runtime)?;
        if first.sha256 != second.sha256 {
            return Err(CliError::Runtime(format!(
                "deterministic check failed: {} differs between runs",
                first.path.display()
            )));
        }
    }
    say!("deterministic check passed: {} file(s) identical across two runs", digests.len());
    Ok((digests, summary, Some(true)))
}

fn record_manifest(entry: RunManifest, explicit: Option<PathBuf>, primary: &Path) -> Result<()> {
    let path = explicit.unwrap_or_else(|| default_manifest_path(primary));
    entry
        .append(&path)
        .map_err(|e| CliError::Runtime(format!("cannot append to manifest {}: {e}", path.display())))
}

fn digest_input(path: &Path) -> Result<FileDigest> {
    FileDigest::of(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn describe_summary(s: &WindowSummary) -> String {
    format!(
        "mean circliness {} over the last {} ticks; diffusion {} (min {}); {} component(s); {} collision(s)",
        fmt_f64(s.mean_circliness),
        s.window_ticks,
        fmt_f64(s.final_diffusion),
        fmt_f64(s.min_diffusion),
        s.n_components,
        s.collisions
    )
}

pub fn cmd_run(a: RunArgs, check: bool, manifest: Option<PathBuf>, argv: Vec<String>) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config).map_err(input_error(&a.config))?;
    if let Some(seed) = a.seed {
        cfg.world.seed = seed;
    }
    let ticks = a.ticks.unwrap_or(cfg.ticks);
    // surface configuration problems as such before simulating
    cfg.build_world().map_err(CliError::Input)?;
    let (outputs, record, checked) = produce(&a.out, check, |out| {
        let mut world = cfg.build_world().map_err(CliError::Input)?;
        let record = record_run(&mut world, ticks, cfg.classifier, !a.metrics_only).map_err(runtime)?;
        record.save(out, TraceFormat::from_path(out)).map_err(runtime)?;
        Ok((vec![out.to_path_buf()], record))
    })?;

    let h = &record.header;
    say!(
        "run: {} agents, {ticks} ticks ({:.2} s simulated), seed {}",
        h.n_agents,
        ticks as f64 * h.dt,
        h.seed
    );
    match &record.summary {
        Some(s) => {
            say!("label: {}", s.label);
            say!("  {}", describe_summary(s));
        }
        None => say!("label: none (run shorter than the classification window)"),
    }
    say!("wrote {}", a.out.display());

    let mut entry = RunManifest::new("run", argv, &a.config);
    entry.inputs = vec![digest_input(&a.config)?];
    entry.seed = Some(h.seed);
    entry.outputs = outputs;
    entry.deterministic_check = checked;
    record_manifest(entry, manifest, &a.out)
}

fn label_code(label: Option<PhaseLabel>) -> &'static str {
    match label {
        Some(PhaseLabel::Mill) => "M",
        Some(PhaseLabel::Ellipsoidal) => "E",
        Some(PhaseLabel::SeparatedGroups) => "S",
        Some(PhaseLabel::CollidingClusters) => "C",
        None => "-",
    }
}

/// Label grid (two-axis plans) or per-cell list, plus totals.
pub fn sweep_table(plan: &SweepPlan, cells: &[PhaseCell]) -> String {
    let mut s = String::new();
    if plan.axes.len() == 2 {
        let (rows, cols) = (&plan.axes[0], &plan.axes[1]);
        s += &format!("{:>10} \\ {}\n", rows.param.as_str(), cols.param.as_str());
        s += &format!("{:>12}", "");
        for v in &cols.values {
            s += &format!("{:>9}", format!("{v:.4}"));
        }
        s.push('\n');
        for (r, rv) in rows.values.iter().enumerate() {
            s += &format!("{:>12}", format!("{rv:.4}"));
            for c in 0..cols.values.len() {
                s += &format!("{:>9}", label_code(cells[r * cols.values.len() + c].aggregate_label));
            }
            s.push('\n');
        }
        s += "legend: M Mill, E Ellipsoidal, S SeparatedGroups, C CollidingClusters, - no successful trial\n";
    } else {
        for c in cells {
            let coords: Vec<String> = c.coordinates.iter().map(|k| format!("{}={}", k.param, k.value)).collect();
            let label = c.aggregate_label.map_or("-".to_string(), |l| l.to_string());
            s += &format!("{:>5}  {:<40} {}\n", c.index, coords.join(" "), label);
        }
    }
    let mut counts = Vec::new();
    for l in PhaseLabel::ALL {
        let n = cells.iter().filter(|c| c.aggregate_label == Some(l)).count();
        counts.push(format!("{l} {n}"));
    }
    s += &format!("cells: {} ({})\n", cells.len(), counts.join(", "));
    s
}

pub fn cmd_sweep(a: SweepArgs, check: bool, manifest: Option<PathBuf>, argv: Vec<String>) -> Result<()> {
    let mut plan = SweepPlan::load(&a.plan).map_err(input_error(&a.plan))?;
    if let Some(seed) = a.seed {
        plan.master_seed = seed;
    }
    plan.validate().map_err(CliError::Input)?;
    let format = a.format.unwrap_or_else(|| PhaseFormat::from_path(&a.out));
    let workers = a.workers as usize;
    let total = plan.n_cells() * plan.trials_per_cell as usize;
    let show_progress = std::io::stderr().is_terminal();
    let progress = |done: usize, total: usize| {
        if show_progress && (done.is_multiple_of(16) || done == total) {
            eprint!("\r{done}/{total} trials");
        }
    };

    let (outputs, report, checked) = produce(&a.out, check, |out| {
        let report = sweep::run_sweep(&plan, workers, Some(&progress)).map_err(CliError::Input)?;
        if show_progress {
            eprintln!();
        }
        sweep::write_phase_diagram(&report.cells, out, format).map_err(runtime)?;
        let side = out.with_extension("summary.json");
        GridSummary::new(&plan, &report.cells)
            .and_then(|g| g.save(&side))
            .map_err(runtime)?;
        Ok((vec![out.to_path_buf(), side], report))
    })?;

    say!("{}", sweep_table(&plan, &report.cells).trim_end());
    let errors: usize = report.cells.iter().map(|c| c.n_errors()).sum();
    say!(
        "trials: {total} ({errors} failed), {} ticks each, {} worker(s), {:.2} s wall, {:.0} agent-ticks/ms",
        plan.ticks_per_run,
        report.workers,
        report.wall_s,
        report.agent_ticks as f64 / (report.wall_s * 1e3).max(1e-9)
    );
    if errors > 0 {
        for c in &report.cells {
            for t in c.trials.iter().filter_map(|t| t.error.as_ref()) {
                eprintln!("warning: cell {} trial failed: {t}", c.index);
            }
        }
    }
    for o in &outputs {
        say!("wrote {}", o.path.display());
    }

    let mut entry = RunManifest::new("sweep", argv, &a.plan);
    entry.inputs = vec![digest_input(&a.plan)?];
    if let Some(base) = &plan.base_config_source {
        entry.inputs.push(digest_input(base)?);
    }
    entry.seed = Some(plan.master_seed);
    entry.outputs = outputs;
    entry.deterministic_check = checked;
    record_manifest(entry, manifest, &a.out)
}

pub fn cmd_calibrate(a: CalibrateArgs, check: bool, manifest: Option<PathBuf>, argv: Vec<String>) -> Result<()> {
    let trials = calibration::load_measurements(&a.input).map_err(input_error(&a.input))?;
    let sensor: Option<SensorStats> = match &a.sensor {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::Input(SwarmError::Config(e.to_string())))?)
        }
        None => None,
    };
    let (profile, warnings) = calibration::build_profile(&trials, sensor).map_err(CliError::Input)?;
    let (outputs, (), checked) = produce(&a.out, check, |out| {
        profile.save(out).map_err(runtime)?;
        // the written file must read back to the same profile
        let back = calibration::CalibrationProfile::load(out).map_err(runtime)?;
        if back != profile {
            return Err(CliError::Runtime("profile did not survive a round trip".into()));
        }
        Ok((vec![out.to_path_buf()], ()))
    })?;

    for w in &warnings {
        eprintln!("warning: {w}");
    }
    say!("{:<12} {:>12} {:>12}", "robot", "speed factor", "turn factor");
    for (id, r) in &profile.robots {
        say!("{id:<12} {:>12.4} {:>12.4}", r.speed_factor, r.turn_factor);
    }
    let p = &profile.population;
    say!(
        "population: speed N({:.4}, {:.4}^2), turn N({:.4}, {:.4}^2)",
        p.speed_factor.mean, p.speed_factor.std, p.turn_factor.mean, p.turn_factor.std
    );
    say!("wrote {}", a.out.display());

    let mut entry = RunManifest::new("calibrate", argv, &a.input);
    entry.inputs = vec![digest_input(&a.input)?];
    if let Some(s) = &a.sensor {
        entry.inputs.push(digest_input(s)?);
    }
    entry.outputs = outputs;
    entry.deterministic_check = checked;
    record_manifest(entry, manifest, &a.out)
}

pub fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let record = RunRecord::load(&a.input).map_err(input_error(&a.input))?;
    let s = record.classify().map_err(CliError::Input)?;
    say!("{}", s.label);
    say!("circliness (window mean): {}", fmt_f64(s.mean_circliness));
    say!("diffusion (final): {}", fmt_f64(s.final_diffusion));
    say!("diffusion (window min): {}", fmt_f64(s.min_diffusion));
    say!("components: {}", s.n_components);
    say!("collisions: {}", s.collisions);
    say!("window: {} of {} ticks", s.window_ticks, record.ticks.len());
    Ok(())
}

pub fn cmd_serve(a: ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(input_error(p))?,
        None => RunConfig::new(scenarios::milling(0)),
    };
    if let Some(seed) = a.seed {
        cfg.world.seed = seed;
    }
    if !(a.frame_rate.is_finite() && a.frame_rate > 0.0) {
        return Err(CliError::Usage("--frame-rate must be positive".into()));
    }
    if !a.data_dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", a.data_dir.display())));
    }
    let session = swarm_live::Session::new(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| CliError::Runtime(format!("cannot listen on {}:{}: {e}", a.host, a.port)))?;
        let addr = listener.local_addr().map_err(runtime)?;
        say!("serving on http://{addr} (WebSocket ws://{addr}/session)");
        let options = swarm_live::ServeOptions {
            frame_rate: a.frame_rate,
            data_dir: a.data_dir.clone(),
        };
        swarm_live::serve(listener, session, options).await.map_err(runtime)
    })
}
