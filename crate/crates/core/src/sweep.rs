//! Seeded parameter sweeps and phase-diagram tables.
//!
//! A plan (JSON) names the swept axes, a base world and the trial budget:
//!
//! ```text
//! {
//!   "version": 1,
//!   "axes": [{"param": "v", "values": [0.1, 0.2]}, {"param": "omega", "values": [0.5, 1.0]}],
//!   "trials_per_cell": 3,
//!   "base_config_path": "milling.json",
//!   "ticks_per_run": 5455,
//!   "master_seed": 42
//! }
//! ```
//!
//! `base_config_path` points at a run configuration file (resolved relative
//! to the plan); `base_config` may carry a world configuration inline
//! instead. Cells are the Cartesian product of the axis values, row-major in
//! axis order (the last axis varies fastest). Trial seeds are
//! `derive_seed(master_seed, [sweep stream, cell, trial])`.
//!
//! # Outputs
//!
//! CSV columns, in order: `cell`, one column per axis named after its
//! parameter, `label`, `trials`, `errors`, `circliness_mean`,
//! `circliness_min`, `circliness_max`, `diffusion_mean`, `diffusion_min`,
//! `diffusion_max`, `collisions`. Circliness is each trial's window mean,
//! diffusion its value at the last tick; statistics cover successful
//! trials. `label` is empty when every trial failed.
//!
//! JSON lines: one [`PhaseCell`] per line, trials included.
//!
//! The grid summary sidecar ([`GridSummary`]) holds the axes and the
//! row-major label grid, enough to draw the heatmap without the table.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, DEFAULT_TICKS};
use crate::error::{Result, SwarmError};
use crate::metrics::{ClassifierConfig, PhaseLabel, WindowSummary};
use crate::model::{ControllerKind, ControllerMode};
use crate::record::simulate_window;
use crate::rng::{derive_seed, STREAM_SWEEP};
use crate::serde_ext::fmt_f64;
use crate::world::{World, WorldConfig, WorldParam};

pub const PLAN_VERSION: u32 = 1;
pub const GRID_SUMMARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: WorldParam,
    pub values: Vec<f64>,
}

fn one() -> u32 {
    1
}

fn default_ticks() -> u64 {
    DEFAULT_TICKS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub version: u32,
    pub axes: Vec<SweepAxis>,
    #[serde(default = "one")]
    pub trials_per_cell: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_config: Option<WorldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_config_path: Option<PathBuf>,
    /// File the base configuration was loaded from, once resolved.
    #[serde(skip)]
    pub base_config_source: Option<PathBuf>,
    #[serde(default = "default_ticks")]
    pub ticks_per_run: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub classifier: ClassifierConfig,
}

/// Speeds of the default (v, omega) grid, m/s.
pub const DEFAULT_V_AXIS: [f64; 7] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35];
pub const DEFAULT_TRIALS_PER_CELL: u32 = 5;

/// Turning rates of the default grid, deg/s.
pub const DEFAULT_OMEGA_AXIS_DEG: [f64; 8] = [15.0, 30.0, 45.0, 60.0, 75.0, 90.0, 105.0, 120.0];

impl SweepPlan {
    /// The 7 x 8 (v, omega) milling grid around v = 0.25 m/s, omega = 45 deg/s, N = 6.
    /// Five trials per cell: a single run labels a cell by one stochastic
    /// outcome, whereas the vote reports the typical one.
    pub fn default_grid() -> SweepPlan {
        let mode = ControllerMode::new(ControllerKind::Milling, 0.25, 45f64.to_radians()).expect("valid mode");
        SweepPlan {
            version: PLAN_VERSION,
            axes: vec![
                SweepAxis {
                    param: WorldParam::V,
                    values: DEFAULT_V_AXIS.to_vec(),
                },
                SweepAxis {
                    param: WorldParam::Omega,
                    values: DEFAULT_OMEGA_AXIS_DEG.iter().map(|d| d.to_radians()).collect(),
                },
            ],
            trials_per_cell: DEFAULT_TRIALS_PER_CELL,
            base_config: Some(WorldConfig::new(6, mode)),
            base_config_path: None,
            base_config_source: None,
            ticks_per_run: DEFAULT_TICKS,
            master_seed: 0,
            classifier: ClassifierConfig::default(),
        }
    }

    /// Parses a plan; a `base_config_path` is resolved against `dir` and loaded.
    pub fn from_json(text: &str, dir: Option<&Path>) -> Result<SweepPlan> {
        let mut plan: SweepPlan = serde_json::from_str(text).map_err(|e| SwarmError::Config(e.to_string()))?;
        if let Some(rel) = plan.base_config_path.take() {
            if plan.base_config.is_some() {
                return Err(SwarmError::Config("give base_config or base_config_path, not both".into()));
            }
            let path = match dir {
                Some(d) if rel.is_relative() => d.join(&rel),
                _ => rel,
            };
            plan.base_config = Some(RunConfig::load(&path)?.world);
            plan.base_config_source = Some(path);
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<SweepPlan> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SwarmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn base(&self) -> Result<&WorldConfig> {
        self.base_config
            .as_ref()
            .ok_or_else(|| SwarmError::Config("plan has no base configuration".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PLAN_VERSION {
            return Err(SwarmError::Config(format!(
                "unsupported plan version {} (expected {PLAN_VERSION})",
                self.version
            )));
        }
        if self.axes.is_empty() {
            return Err(SwarmError::Config("plan needs at least one axis".into()));
        }
        let mut seen = HashSet::new();
        for axis in &self.axes {
            if !seen.insert(axis.param) {
                return Err(SwarmError::Config(format!("axis {} appears twice", axis.param)));
            }
            if axis.values.is_empty() {
                return Err(SwarmError::Config(format!("axis {} has no values", axis.param)));
            }
            if let Some(v) = axis.values.iter().find(|v| !v.is_finite()) {
                return Err(SwarmError::Config(format!("axis {} has non-finite value {v}", axis.param)));
            }
        }
        if self.trials_per_cell == 0 {
            return Err(SwarmError::Config("trials_per_cell must be at least 1".into()));
        }
        let len = self.ticks_per_run as usize + 1;
        if self.classifier.window_len(len) > len {
            return Err(SwarmError::Config(format!(
                "ticks_per_run {} is shorter than the evaluation window",
                self.ticks_per_run
            )));
        }
        self.base()?.validate()
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// World configuration of one cell (seed not yet assigned).
    pub fn cell_config(&self, coordinates: &[f64]) -> Result<WorldConfig> {
        let mut cfg = self.base()?.clone();
        for (axis, &value) in self.axes.iter().zip(coordinates) {
            cfg = cfg.with_param(axis.param, value)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedCell {
    pub index: usize,
    pub coordinates: Vec<f64>,
    pub seeds: Vec<u64>,
}

pub fn trial_seed(master_seed: u64, cell: usize, trial: u32) -> u64 {
    derive_seed(master_seed, &[STREAM_SWEEP, cell as u64, trial as u64])
}

/// Expands the plan into cells with their trial seeds.
pub fn plan_grid(plan: &SweepPlan) -> Result<Vec<PlannedCell>> {
    plan.validate()?;
    let n = plan.n_cells();
    let mut seen = HashSet::with_capacity(n * plan.trials_per_cell as usize);
    let mut cells = Vec::with_capacity(n);
    for index in 0..n {
        let mut rem = index;
        let mut coordinates = vec![0.0; plan.axes.len()];
        for (k, axis) in plan.axes.iter().enumerate().rev() {
            coordinates[k] = axis.values[rem % axis.values.len()];
            rem /= axis.values.len();
        }
        let seeds: Vec<u64> = (0..plan.trials_per_cell).map(|t| trial_seed(plan.master_seed, index, t)).collect();
        for &s in &seeds {
            if !seen.insert(s) {
                return Err(SwarmError::Config(format!(
                    "derived seed collision in cell {index}; pick another master_seed"
                )));
            }
        }
        cells.push(PlannedCell {
            index,
            coordinates,
            seeds,
        });
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<WindowSummary>,
    /// Set when the trial failed or panicked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub param: WorldParam,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub index: usize,
    pub coordinates: Vec<Coordinate>,
    pub trials: Vec<TrialOutcome>,
    /// `None` when every trial failed.
    pub aggregate_label: Option<PhaseLabel>,
}

/// Majority vote; ties go to the worse label.
pub fn aggregate_label(labels: impl IntoIterator<Item = PhaseLabel>) -> Option<PhaseLabel> {
    let mut counts: BTreeMap<PhaseLabel, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts.into_iter().max_by_key(|&(l, c)| (c, l)).map(|(l, _)| l)
}

impl PhaseCell {
    pub fn summaries(&self) -> impl Iterator<Item = &WindowSummary> {
        self.trials.iter().filter_map(|t| t.summary.as_ref())
    }

    pub fn n_errors(&self) -> usize {
        self.trials.iter().filter(|t| t.error.is_some()).count()
    }

    pub fn coordinate(&self, param: WorldParam) -> Option<f64> {
        self.coordinates.iter().find(|c| c.param == param).map(|c| c.value)
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<PhaseCell>,
    /// Summed trial wall time per cell, seconds. Kept out of the tables so
    /// they stay reproducible.
    pub cell_wall_s: Vec<f64>,
    pub total_ticks: u64,
    pub agent_ticks: u64,
    pub wall_s: f64,
    pub workers: usize,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

/// Runs one trial: seeds the world, simulates and classifies.
pub fn run_trial(cfg: &WorldConfig, seed: u64, ticks: u64, classifier: &ClassifierConfig) -> TrialOutcome {
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<WindowSummary> {
        let mut cfg = cfg.clone();
        cfg.seed = seed;
        let mut world = World::init(cfg)?;
        simulate_window(&mut world, ticks, classifier)
    }));
    let (summary, error) = match result {
        Ok(Ok(s)) => (Some(s), None),
        Ok(Err(e)) => (None, Some(e.to_string())),
        Err(p) => (None, Some(format!("panicked: {}", panic_message(p)))),
    };
    TrialOutcome { seed, summary, error }
}

pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Runs every (cell, trial) on a pool of `workers` threads. Results do not
/// depend on the worker count. `progress` receives (finished, total).
pub fn run_sweep(plan: &SweepPlan, workers: usize, progress: Option<Progress<'_>>) -> Result<SweepReport> {
    if workers == 0 {
        return Err(SwarmError::Argument("workers must be at least 1".into()));
    }
    let planned = plan_grid(plan)?;
    let configs: Vec<WorldConfig> = planned
        .iter()
        .map(|c| plan.cell_config(&c.coordinates))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = planned
        .iter()
        .flat_map(|c| c.seeds.iter().map(move |&s| (c.index, s)))
        .collect();
    let total = jobs.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SwarmError::Argument(format!("thread pool: {e}")))?;
    let started = Instant::now();
    let results: Vec<(TrialOutcome, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, seed)| {
                let t0 = Instant::now();
                let out = run_trial(&configs[cell], seed, plan.ticks_per_run, &plan.classifier);
                let secs = t0.elapsed().as_secs_f64();
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(p) = progress {
                    p(n, total);
                }
                (out, secs)
            })
            .collect()
    });
    let wall_s = started.elapsed().as_secs_f64();

    let per_cell = plan.trials_per_cell as usize;
    let mut cells = Vec::with_capacity(planned.len());
    let mut cell_wall_s = Vec::with_capacity(planned.len());
    let mut results = results.into_iter();
    let mut agent_ticks = 0u64;
    for (pc, cfg) in planned.iter().zip(&configs) {
        let chunk: Vec<_> = results.by_ref().take(per_cell).collect();
        cell_wall_s.push(chunk.iter().map(|(_, s)| s).sum());
        let trials: Vec<TrialOutcome> = chunk.into_iter().map(|(t, _)| t).collect();
        agent_ticks += cfg.n_agents as u64 * plan.ticks_per_run * per_cell as u64;
        let aggregate = aggregate_label(trials.iter().filter_map(|t| t.summary.map(|s| s.label)));
        cells.push(PhaseCell {
            index: pc.index,
            coordinates: plan
                .axes
                .iter()
                .zip(&pc.coordinates)
                .map(|(a, &value)| Coordinate { param: a.param, value })
                .collect(),
            trials,
            aggregate_label: aggregate,
        });
    }
    Ok(SweepReport {
        cells,
        cell_wall_s,
        total_ticks: total as u64 * plan.ticks_per_run,
        agent_ticks,
        wall_s,
        workers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseFormat {
    Csv,
    Jsonl,
}

impl PhaseFormat {
    /// `.jsonl` is JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => PhaseFormat::Jsonl,
            _ => PhaseFormat::Csv,
        }
    }
}

impl std::str::FromStr for PhaseFormat {
    type Err = SwarmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(PhaseFormat::Csv),
            "jsonl" => Ok(PhaseFormat::Jsonl),
            _ => Err(SwarmError::Argument(format!("unknown format {s:?} (csv or jsonl)"))),
        }
    }
}

/// Shared axis list of `cells`, in order.
pub fn axis_params(cells: &[PhaseCell]) -> Result<Vec<WorldParam>> {
    let first = cells
        .first()
        .ok_or_else(|| SwarmError::Argument("no cells to emit".into()))?;
    let params: Vec<WorldParam> = first.coordinates.iter().map(|c| c.param).collect();
    for c in cells {
        if c.coordinates.len() != params.len() || c.coordinates.iter().zip(&params).any(|(a, p)| a.param != *p) {
            return Err(SwarmError::Schema(format!("cell {} has a different axis set", c.index)));
        }
    }
    Ok(params)
}

/// One table row: a cell flattened to statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub cell: usize,
    pub coordinates: Vec<Coordinate>,
    pub label: Option<PhaseLabel>,
    pub trials: usize,
    pub errors: usize,
    #[serde(with = "crate::serde_ext")]
    pub circliness_mean: f64,
    #[serde(with = "crate::serde_ext")]
    pub circliness_min: f64,
    #[serde(with = "crate::serde_ext")]
    pub circliness_max: f64,
    #[serde(with = "crate::serde_ext")]
    pub diffusion_mean: f64,
    #[serde(with = "crate::serde_ext")]
    pub diffusion_min: f64,
    #[serde(with = "crate::serde_ext")]
    pub diffusion_max: f64,
    pub collisions: u64,
}

fn stats(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        sum += v;
        n += 1;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if n == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (sum / n as f64, lo, hi)
    }
}

impl From<&PhaseCell> for PhaseRow {
    fn from(c: &PhaseCell) -> Self {
        let (circliness_mean, circliness_min, circliness_max) = stats(c.summaries().map(|s| s.mean_circliness));
        let (diffusion_mean, diffusion_min, diffusion_max) = stats(c.summaries().map(|s| s.final_diffusion));
        PhaseRow {
            cell: c.index,
            coordinates: c.coordinates.clone(),
            label: c.aggregate_label,
            trials: c.trials.len(),
            errors: c.n_errors(),
            circliness_mean,
            circliness_min,
            circliness_max,
            diffusion_mean,
            diffusion_min,
            diffusion_max,
            collisions: c.summaries().map(|s| s.collisions).sum(),
        }
    }
}

const STAT_COLUMNS: [&str; 10] = [
    "label",
    "trials",
    "errors",
    "circliness_mean",
    "circliness_min",
    "circliness_max",
    "diffusion_mean",
    "diffusion_min",
    "diffusion_max",
    "collisions",
];

pub fn write_csv<W: Write>(cells: &[PhaseCell], w: W) -> Result<()> {
    let params = axis_params(cells)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["cell".to_string()];
    header.extend(params.iter().map(|p| p.as_str().to_string()));
    header.extend(STAT_COLUMNS.iter().map(|s| s.to_string()));
    out.write_record(&header).map_err(csv_err)?;
    for c in cells {
        let r = PhaseRow::from(c);
        let mut rec = vec![r.cell.to_string()];
        rec.extend(r.coordinates.iter().map(|c| fmt_f64(c.value)));
        rec.push(r.label.map_or(String::new(), |l| l.as_str().to_string()));
        rec.push(r.trials.to_string());
        rec.push(r.errors.to_string());
        for v in [
            r.circliness_mean,
            r.circliness_min,
            r.circliness_max,
            r.diffusion_mean,
            r.diffusion_min,
            r.diffusion_max,
        ] {
            rec.push(fmt_f64(v));
        }
        rec.push(r.collisions.to_string());
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> SwarmError {
    SwarmError::Parse(e.to_string())
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| SwarmError::Parse(format!("bad number {s:?}"))),
    }
}

/// Reads a table written by [`write_csv`].
pub fn read_csv<R: Read>(r: R) -> Result<Vec<PhaseRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let n_axes = header.len().checked_sub(1 + STAT_COLUMNS.len()).filter(|_| header.get(0) == Some("cell"));
    let n_axes = n_axes.ok_or_else(|| SwarmError::Schema("not a phase-diagram table".into()))?;
    if header.iter().skip(1 + n_axes).ne(STAT_COLUMNS.iter().copied()) {
        return Err(SwarmError::Schema("unexpected phase-diagram columns".into()));
    }
    let params: Vec<WorldParam> = header.iter().skip(1).take(n_axes).map(str::parse).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| rec.get(i).unwrap_or_default();
        let int = |i: usize| f(i).parse::<u64>().map_err(|_| SwarmError::Parse(format!("bad integer {:?}", f(i))));
        let s = 1 + n_axes;
        rows.push(PhaseRow {
            cell: int(0)? as usize,
            coordinates: params
                .iter()
                .enumerate()
                .map(|(k, &param)| Ok(Coordinate { param, value: parse_f64(f(1 + k))? }))
                .collect::<Result<_>>()?,
            label: if f(s).is_empty() { None } else { Some(f(s).parse()?) },
            trials: int(s + 1)? as usize,
            errors: int(s + 2)? as usize,
            circliness_mean: parse_f64(f(s + 3))?,
            circliness_min: parse_f64(f(s + 4))?,
            circliness_max: parse_f64(f(s + 5))?,
            diffusion_mean: parse_f64(f(s + 6))?,
            diffusion_min: parse_f64(f(s + 7))?,
            diffusion_max: parse_f64(f(s + 8))?,
            collisions: int(s + 9)?,
        });
    }
    Ok(rows)
}

pub fn write_jsonl<W: Write>(cells: &[PhaseCell], mut w: W) -> Result<()> {
    axis_params(cells)?;
    for c in cells {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<PhaseCell>> {
    let mut cells = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        cells.push(
            serde_json::from_str(&line).map_err(|e| SwarmError::Parse(format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(cells)
}

pub fn write_phase_diagram(cells: &[PhaseCell], path: &Path, format: PhaseFormat) -> Result<()> {
    let w = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        PhaseFormat::Csv => write_csv(cells, w),
        PhaseFormat::Jsonl => write_jsonl(cells, w),
    }
}

/// Rows of a phase-diagram file in either format, detected by extension.
pub fn load_phase_rows(path: &Path) -> Result<Vec<PhaseRow>> {
    let file = std::fs::File::open(path)?;
    match PhaseFormat::from_path(path) {
        PhaseFormat::Csv => read_csv(file),
        PhaseFormat::Jsonl => Ok(read_jsonl(std::io::BufReader::new(file))?
            .iter()
            .map(PhaseRow::from)
            .collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub label: PhaseLabel,
    pub color: String,
}

/// Axis metadata and the row-major label grid of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub version: u32,
    pub axes: Vec<SweepAxis>,
    pub trials_per_cell: u32,
    pub ticks_per_run: u64,
    pub master_seed: u64,
    pub labels: Vec<Option<PhaseLabel>>,
    pub legend: Vec<LegendEntry>,
}

impl GridSummary {
    pub fn new(plan: &SweepPlan, cells: &[PhaseCell]) -> Result<GridSummary> {
        let params = axis_params(cells)?;
        if params.iter().ne(plan.axes.iter().map(|a| &a.param)) || cells.len() != plan.n_cells() {
            return Err(SwarmError::Schema("cells do not match the plan's grid".into()));
        }
        Ok(GridSummary {
            version: GRID_SUMMARY_VERSION,
            axes: plan.axes.clone(),
            trials_per_cell: plan.trials_per_cell,
            ticks_per_run: plan.ticks_per_run,
            master_seed: plan.master_seed,
            labels: cells.iter().map(|c| c.aggregate_label).collect(),
            legend: PhaseLabel::ALL
                .iter()
                .map(|&label| LegendEntry {
                    label,
                    color: label.color().into(),
                })
                .collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan(trials: u32) -> SweepPlan {
        let mut plan = SweepPlan::default_grid();
        plan.axes[0].values = vec![0.1, 0.2];
        plan.axes[1].values = vec![1.0, 2.0];
        plan.trials_per_cell = trials;
        plan.ticks_per_run = 150;
        plan
    }

    #[test]
    fn grid_is_row_major() {
        let cells = plan_grid(&small_plan(1)).unwrap();
        let coords: Vec<_> = cells.iter().map(|c| c.coordinates.clone()).collect();
        assert_eq!(coords, vec![vec![0.1, 1.0], vec![0.1, 2.0], vec![0.2, 1.0], vec![0.2, 2.0]]);
        assert_eq!(plan_grid(&SweepPlan::default_grid()).unwrap().len(), 56);
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let plan = small_plan(3);
        let a = plan_grid(&plan).unwrap();
        assert_eq!(a, plan_grid(&plan).unwrap());
        let all: HashSet<u64> = a.iter().flat_map(|c| c.seeds.clone()).collect();
        assert_eq!(all.len(), 12);
    }

    #[test]
    fn rejects_bad_plans() {
        let mut p = small_plan(1);
        p.axes[1].values.clear();
        assert!(plan_grid(&p).is_err());
        let mut p = small_plan(1);
        p.axes.clear();
        assert!(plan_grid(&p).is_err());
        let mut p = small_plan(1);
        p.axes[1].param = WorldParam::V;
        assert!(plan_grid(&p).is_err());
        let mut p = small_plan(1);
        p.ticks_per_run = 10;
        assert!(plan_grid(&p).is_err());
    }

    #[test]
    fn vote_rule() {
        use PhaseLabel::*;
        assert_eq!(aggregate_label([Mill, Mill, Mill, Ellipsoidal, Ellipsoidal]), Some(Mill));
        assert_eq!(aggregate_label([Mill, CollidingClusters]), Some(CollidingClusters));
        assert_eq!(aggregate_label([SeparatedGroups, Ellipsoidal]), Some(SeparatedGroups));
        assert_eq!(aggregate_label([]), None);
    }

    #[test]
    fn worker_count_does_not_change_tables() {
        let plan = small_plan(2);
        let a = run_sweep(&plan, 1, None).unwrap();
        let b = run_sweep(&plan, 4, None).unwrap();
        assert_eq!(a.cells, b.cells);
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        write_csv(&a.cells, &mut ta).unwrap();
        write_csv(&b.cells, &mut tb).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a.total_ticks, 4 * 2 * 150);
        assert_eq!(a.agent_ticks, 6 * 4 * 2 * 150);
    }

    #[test]
    fn failing_trials_are_recorded() {
        let mut plan = small_plan(1);
        plan.axes = vec![SweepAxis {
            param: WorldParam::NAgents,
            values: vec![2.0, 40.0],
        }];
        // 40 agents cannot be placed 1 m apart in a 2 x 2 box
        if let crate::world::SpawnSpec::Box { min_separation, .. } = &mut plan.base_config.as_mut().unwrap().spawn {
            *min_separation = 1.0;
        }
        let report = run_sweep(&plan, 2, None).unwrap();
        assert!(report.cells[0].aggregate_label.is_some());
        assert!(report.cells[1].trials[0].error.as_deref().unwrap().contains("spawn box"));
        assert_eq!(report.cells[1].aggregate_label, None);
        let row = PhaseRow::from(&report.cells[1]);
        assert_eq!((row.errors, row.label), (1, None));
        assert!(row.circliness_mean.is_nan());
    }

    #[test]
    fn tables_round_trip() {
        let report = run_sweep(&small_plan(2), 2, None).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&report.cells, &mut buf).unwrap();
        assert_eq!(read_jsonl(&buf[..]).unwrap(), report.cells);
        let mut buf = Vec::new();
        write_csv(&report.cells, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("cell,v,omega,label,trials,errors,circliness_mean"));
        let rows = read_csv(&buf[..]).unwrap();
        let want: Vec<PhaseRow> = report.cells.iter().map(PhaseRow::from).collect();
        assert_eq!(rows.len(), want.len());
        for (r, w) in rows.iter().zip(&want) {
            assert_eq!((r.cell, &r.coordinates, r.label, r.collisions), (w.cell, &w.coordinates, w.label, w.collisions));
        }
    }

    #[test]
    fn heterogeneous_axes_rejected() {
        let mut cells = run_sweep(&small_plan(1), 1, None).unwrap().cells;
        cells[2].coordinates.pop();
        assert!(matches!(write_csv(&cells, Vec::new()), Err(SwarmError::Schema(_))));
        assert!(matches!(write_jsonl(&cells, Vec::new()), Err(SwarmError::Schema(_))));
    }

    #[test]
    fn plan_file_with_base_path() {
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig::new(SweepPlan::default_grid().base_config.unwrap());
        base.save(&dir.path().join("base.json")).unwrap();
        let text = r#"{"version":1,"axes":[{"param":"n_agents","values":[3,4]}],"base_config_path":"base.json","ticks_per_run":200}"#;
        std::fs::write(dir.path().join("plan.json"), text).unwrap();
        let plan = SweepPlan::load(&dir.path().join("plan.json")).unwrap();
        assert_eq!(plan.trials_per_cell, 1);
        assert_eq!(plan.base().unwrap().n_agents, 6);
        assert_eq!(plan.cell_config(&[4.0]).unwrap().n_agents, 4);
        let summary = GridSummary::new(&plan, &run_sweep(&plan, 1, None).unwrap().cells).unwrap();
        assert_eq!(summary.labels.len(), 2);
    }
}
