//! Run records and their two on-disk encodings.
//!
//! # JSON lines (`.jsonl`)
//!
//! One JSON object per line, discriminated by `"type"`:
//!
//! ```text
//! {"type":"header","schema":"swarm-record/1","n_agents":6,"dt":0.022,"seed":7,"gamma":1.1,"body_radius":0.0975,"classifier":{...}}
//! {"type":"tick","tick":0,"agents":[{"id":0,"x":0.1,"y":-0.4,"heading":2.1,"sensor":0,"controller":"milling"}],"metrics":{...}}
//! ...
//! {"type":"summary","label":"Mill","mean_circliness":0.08,...}
//! ```
//!
//! The summary line is optional. Non-finite metric values are written as the
//! strings `"inf"`, `"-inf"` or `"nan"`.
//!
//! # Binary (`.bin`)
//!
//! Little-endian, fixed width. Header (80 bytes):
//!
//! | bytes | field |
//! |---|---|
//! | 8 | magic `SWTRACE\0` |
//! | 2 | version (1) |
//! | 2 | flags, bit 0 = per-agent samples present |
//! | 4 | n_agents (u32) |
//! | 8 | dt (f64) |
//! | 8 | seed (u64) |
//! | 8 | gamma (f64) |
//! | 8 | body_radius (f64) |
//! | 8 | window_fraction (f64) |
//! | 8 | min_window_ticks (u64) |
//! | 8 | mill_threshold (f64) |
//! | 8 | ellipse_threshold (f64) |
//!
//! Then one record per tick until end of file: tick (u64), circliness,
//! diffusion, min_pairwise_distance (f64 each), n_components and
//! collisions (u32 each), followed, when flag bit 0 is set, by `n_agents`
//! samples of id (u32), x, y, heading (f64 each), sensor (u8) and
//! controller code (u8; 0 milling, 1 diffusing, 2 self-centering).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};
use crate::metrics::{classify_trace, summarize_window, ClassifierConfig, MetricTrace, PhaseLabel, WindowSummary};
use crate::model::{AgentState, ControllerKind};
use crate::world::World;

pub const RECORD_SCHEMA: &str = "swarm-record/1";
pub const BINARY_MAGIC: &[u8; 8] = b"SWTRACE\0";
pub const BINARY_VERSION: u16 = 1;
const FLAG_AGENTS: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub schema: String,
    pub n_agents: u32,
    pub dt: f64,
    pub seed: u64,
    /// Mean vision distance used by the metrics, m.
    pub gamma: f64,
    pub body_radius: f64,
    pub classifier: ClassifierConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSample {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub sensor: u8,
    pub controller: ControllerKind,
}

impl From<&AgentState> for AgentSample {
    fn from(a: &AgentState) -> Self {
        AgentSample {
            id: a.id,
            x: a.x,
            y: a.y,
            heading: a.heading,
            sensor: a.last_sensor as u8,
            controller: a.controller.kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub agents: Vec<AgentSample>,
    pub metrics: MetricTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: RecordHeader,
    pub ticks: Vec<TickRecord>,
    pub summary: Option<WindowSummary>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(RecordHeader),
    Tick(TickRecord),
    Summary(WindowSummary),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    JsonLines,
    Binary,
}

impl TraceFormat {
    /// `.bin` is binary; anything else is JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => TraceFormat::Binary,
            _ => TraceFormat::JsonLines,
        }
    }
}

impl RunRecord {
    pub fn new(world: &World, classifier: ClassifierConfig) -> Self {
        RunRecord {
            header: RecordHeader {
                schema: RECORD_SCHEMA.into(),
                n_agents: world.agents().len() as u32,
                dt: world.config().dt,
                seed: world.config().seed,
                gamma: world.gamma(),
                body_radius: world.config().body_radius,
                classifier,
            },
            ticks: Vec::new(),
            summary: None,
        }
    }

    /// Appends the world's current tick.
    pub fn capture(&mut self, world: &World, with_agents: bool) {
        self.ticks.push(TickRecord {
            tick: world.tick(),
            agents: if with_agents {
                world.agents().iter().map(AgentSample::from).collect()
            } else {
                Vec::new()
            },
            metrics: world.measure(),
        });
    }

    pub fn metric_traces(&self) -> Vec<MetricTrace> {
        self.ticks.iter().map(|t| t.metrics).collect()
    }

    /// Classifies the run with the classifier settings in the header.
    pub fn classify(&self) -> Result<WindowSummary> {
        classify_trace(&self.metric_traces(), &self.header.classifier)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = |l: &Line| -> Result<()> {
            serde_json::to_writer(&mut w, l)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&Line::Header(self.header.clone()))?;
        for t in &self.ticks {
            line(&Line::Tick(t.clone()))?;
        }
        if let Some(s) = self.summary {
            line(&Line::Summary(s))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut ticks = Vec::new();
        let mut summary = None;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| SwarmError::Parse(format!("record line {}: {e}", n + 1)))?;
            match parsed {
                Line::Header(h) if header.is_none() && n == 0 => header = Some(h),
                Line::Header(_) => return Err(SwarmError::Parse(format!("unexpected header on line {}", n + 1))),
                Line::Tick(t) => ticks.push(t),
                Line::Summary(s) => summary = Some(s),
            }
        }
        let header = header.ok_or_else(|| SwarmError::Parse("record has no header line".into()))?;
        if header.schema != RECORD_SCHEMA {
            return Err(SwarmError::Schema(format!("unsupported record schema {:?}", header.schema)));
        }
        Ok(RunRecord { header, ticks, summary })
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let with_agents = self.ticks.iter().any(|t| !t.agents.is_empty());
        if with_agents && self.ticks.iter().any(|t| t.agents.len() != self.header.n_agents as usize) {
            return Err(SwarmError::Schema("binary traces need every tick to carry all agents".into()));
        }
        let h = &self.header;
        w.write_all(BINARY_MAGIC)?;
        w.write_u16::<LE>(BINARY_VERSION)?;
        w.write_u16::<LE>(if with_agents { FLAG_AGENTS } else { 0 })?;
        w.write_u32::<LE>(h.n_agents)?;
        w.write_f64::<LE>(h.dt)?;
        w.write_u64::<LE>(h.seed)?;
        w.write_f64::<LE>(h.gamma)?;
        w.write_f64::<LE>(h.body_radius)?;
        w.write_f64::<LE>(h.classifier.window_fraction)?;
        w.write_u64::<LE>(h.classifier.min_window_ticks as u64)?;
        w.write_f64::<LE>(h.classifier.mill_threshold)?;
        w.write_f64::<LE>(h.classifier.ellipse_threshold)?;
        for t in &self.ticks {
            let m = &t.metrics;
            w.write_u64::<LE>(t.tick)?;
            w.write_f64::<LE>(m.circliness)?;
            w.write_f64::<LE>(m.diffusion)?;
            w.write_f64::<LE>(m.min_pairwise_distance)?;
            w.write_u32::<LE>(m.n_components)?;
            w.write_u32::<LE>(m.collisions)?;
            for a in &t.agents {
                w.write_u32::<LE>(a.id)?;
                w.write_f64::<LE>(a.x)?;
                w.write_f64::<LE>(a.y)?;
                w.write_f64::<LE>(a.heading)?;
                w.write_u8(a.sensor)?;
                w.write_u8(a.controller.code())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(SwarmError::Parse("not a binary swarm trace".into()));
        }
        let version = r.read_u16::<LE>()?;
        if version != BINARY_VERSION {
            return Err(SwarmError::Schema(format!("unsupported binary trace version {version}")));
        }
        let flags = r.read_u16::<LE>()?;
        let n_agents = r.read_u32::<LE>()?;
        let header = RecordHeader {
            schema: RECORD_SCHEMA.into(),
            n_agents,
            dt: r.read_f64::<LE>()?,
            seed: r.read_u64::<LE>()?,
            gamma: r.read_f64::<LE>()?,
            body_radius: r.read_f64::<LE>()?,
            classifier: ClassifierConfig {
                window_fraction: r.read_f64::<LE>()?,
                min_window_ticks: r.read_u64::<LE>()? as usize,
                mill_threshold: r.read_f64::<LE>()?,
                ellipse_threshold: r.read_f64::<LE>()?,
            },
        };
        let with_agents = flags & FLAG_AGENTS != 0;
        let mut ticks = Vec::new();
        loop {
            let tick = match r.read_u64::<LE>() {
                Ok(t) => t,
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(e.into()),
            };
            let metrics = MetricTrace {
                tick,
                circliness: r.read_f64::<LE>()?,
                diffusion: r.read_f64::<LE>()?,
                min_pairwise_distance: r.read_f64::<LE>()?,
                n_components: r.read_u32::<LE>()?,
                collisions: r.read_u32::<LE>()?,
            };
            let mut agents = Vec::new();
            if with_agents {
                agents.reserve(n_agents as usize);
                for _ in 0..n_agents {
                    let id = r.read_u32::<LE>()?;
                    let (x, y, heading) = (r.read_f64::<LE>()?, r.read_f64::<LE>()?, r.read_f64::<LE>()?);
                    let sensor = r.read_u8()?;
                    let code = r.read_u8()?;
                    let controller = ControllerKind::from_code(code)
                        .ok_or_else(|| SwarmError::Parse(format!("bad controller code {code}")))?;
                    agents.push(AgentSample {
                        id,
                        x,
                        y,
                        heading,
                        sensor,
                        controller,
                    });
                }
            }
            ticks.push(TickRecord { tick, agents, metrics });
        }
        Ok(RunRecord {
            header,
            ticks,
            summary: None,
        })
    }

    pub fn save(&self, path: &Path, format: TraceFormat) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        match format {
            TraceFormat::JsonLines => self.write_jsonl(w),
            TraceFormat::Binary => self.write_binary(w),
        }
    }

    /// Reads either encoding, detected from the leading bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let head = r.fill_buf()?;
        if head.starts_with(BINARY_MAGIC) {
            Self::read_binary(r)
        } else {
            Self::read_jsonl(r)
        }
    }
}

/// Simulates `ticks` ticks, capturing the initial state and every tick after it.
pub fn record_run(world: &mut World, ticks: u64, classifier: ClassifierConfig, with_agents: bool) -> Result<RunRecord> {
    let mut record = RunRecord::new(world, classifier);
    record.ticks.reserve(ticks as usize + 1);
    record.capture(world, with_agents);
    for _ in 0..ticks {
        world.step()?;
        record.capture(world, with_agents);
    }
    record.summary = record.classify().ok();
    Ok(record)
}

/// Phase label of a recorded run under the given thresholds.
pub fn classify_run(record: &RunRecord, thresholds: &ClassifierConfig) -> Result<PhaseLabel> {
    Ok(classify_trace(&record.metric_traces(), thresholds)?.label)
}

/// Simulates `ticks` ticks and returns only the metric series, initial tick included.
pub fn simulate_trace(world: &mut World, ticks: u64) -> Result<Vec<MetricTrace>> {
    let mut trace = Vec::with_capacity(ticks as usize + 1);
    trace.push(world.measure());
    for _ in 0..ticks {
        world.step()?;
        trace.push(world.measure());
    }
    Ok(trace)
}

/// Simulates `ticks` ticks and summarizes the trailing window, measuring
/// only the ticks inside it. Equivalent to classifying [`simulate_trace`].
pub fn simulate_window(world: &mut World, ticks: u64, classifier: &ClassifierConfig) -> Result<WindowSummary> {
    let len = ticks as usize + 1;
    let window = classifier.window_len(len);
    if window > len {
        return Err(SwarmError::Argument(format!(
            "record has {len} ticks, the evaluation window needs {window}"
        )));
    }
    let first = len - window;
    let mut tail = Vec::with_capacity(window);
    if first == 0 {
        tail.push(world.measure());
    }
    for k in 1..len {
        world.step()?;
        if k >= first {
            tail.push(world.measure());
        }
    }
    summarize_window(&tail, classifier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ControllerMode;
    use crate::world::{NoiseSpec, WorldConfig};

    fn sample_record(with_agents: bool) -> RunRecord {
        let mut cfg = WorldConfig::new(4, ControllerMode::new(ControllerKind::Milling, 0.25, 0.8).unwrap());
        cfg.seed = 17;
        cfg.noise = NoiseSpec {
            actuation_std: 0.02,
            false_negative_rate: 0.05,
            false_positive_rate: 0.0,
        };
        let mut w = World::init(cfg).unwrap();
        record_run(&mut w, 150, ClassifierConfig::default(), with_agents).unwrap()
    }

    #[test]
    fn jsonl_round_trip() {
        let rec = sample_record(true);
        assert!(rec.summary.is_some());
        let mut buf = Vec::new();
        rec.write_jsonl(&mut buf).unwrap();
        let back = RunRecord::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn binary_round_trip() {
        for with_agents in [true, false] {
            let rec = sample_record(with_agents);
            let mut buf = Vec::new();
            rec.write_binary(&mut buf).unwrap();
            let per_tick = 8 + 24 + 8 + if with_agents { 4 * 30 } else { 0 };
            assert_eq!(buf.len(), 80 + per_tick * rec.ticks.len());
            let back = RunRecord::read_binary(&buf[..]).unwrap();
            assert_eq!(back.ticks, rec.ticks);
            assert_eq!(back.header, rec.header);
        }
    }

    #[test]
    fn load_detects_format() {
        let dir = tempfile::tempdir().unwrap();
        let rec = sample_record(true);
        for (name, fmt) in [("r.jsonl", TraceFormat::JsonLines), ("r.bin", TraceFormat::Binary)] {
            let p = dir.path().join(name);
            assert_eq!(TraceFormat::from_path(&p), fmt);
            rec.save(&p, fmt).unwrap();
            assert_eq!(RunRecord::load(&p).unwrap().ticks, rec.ticks);
        }
    }

    #[test]
    fn infinite_metrics_survive_jsonl() {
        let mut w = World::init(WorldConfig::new(
            1,
            ControllerMode::new(ControllerKind::Milling, 0.25, 0.8).unwrap(),
        ))
        .unwrap();
        let rec = record_run(&mut w, 3, ClassifierConfig::default(), true).unwrap();
        assert!(rec.ticks[0].metrics.diffusion.is_infinite());
        let mut buf = Vec::new();
        rec.write_jsonl(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\"inf\""));
        assert_eq!(RunRecord::read_jsonl(&buf[..]).unwrap(), rec);
    }

    #[test]
    fn metrics_only_matches_full_record() {
        let rec = sample_record(false);
        let mut cfg = WorldConfig::new(4, ControllerMode::new(ControllerKind::Milling, 0.25, 0.8).unwrap());
        cfg.seed = 17;
        cfg.noise = NoiseSpec {
            actuation_std: 0.02,
            false_negative_rate: 0.05,
            false_positive_rate: 0.0,
        };
        let trace = simulate_trace(&mut World::init(cfg).unwrap(), 150).unwrap();
        assert_eq!(trace, rec.metric_traces());
        assert_eq!(classify_run(&rec, &ClassifierConfig::default()).unwrap(), rec.summary.unwrap().label);
    }

    #[test]
    fn window_only_simulation_matches_full_trace() {
        let mode = ControllerMode::new(ControllerKind::Milling, 0.25, 0.8).unwrap();
        let classifier = ClassifierConfig::default();
        for ticks in [99, 120, 600] {
            let mut cfg = WorldConfig::new(5, mode);
            cfg.seed = 3;
            let trace = simulate_trace(&mut World::init(cfg.clone()).unwrap(), ticks).unwrap();
            let full = classify_trace(&trace, &classifier).unwrap();
            let fast = simulate_window(&mut World::init(cfg).unwrap(), ticks, &classifier).unwrap();
            assert_eq!(fast, full);
        }
        let mut w = World::init(WorldConfig::new(2, mode)).unwrap();
        assert!(simulate_window(&mut w, 50, &classifier).is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(RunRecord::read_jsonl(&b"{\"type\":\"tick\"}\n"[..]).is_err());
        assert!(RunRecord::read_jsonl(&b""[..]).is_err());
        assert!(RunRecord::read_binary(&b"NOTATRACE......."[..]).is_err());
    }
}
