//! World configuration, seeded initialization and the synchronous tick.
//!
//! Every random draw comes from a stream keyed by the world seed, a purpose
//! tag and the agent id (plus the tick for noise), so the sampling order is:
//!
//! * spawn: stream `(seed, SPAWN, id)` yields `x`, `y`, `heading` triples,
//!   repeated until the minimum separation to all lower ids holds;
//! * parameters: stream `(seed, PARAMS, id)` yields speed factor, turn
//!   factor, vision distance, vision half-angle, each resampled until in range;
//! * noise: SplitMix64 stream `(seed, NOISE, id, tick)` yields one uniform for the
//!   sensor flip, then standard normals for the speed and turn actuation
//!   noise (when enabled), then standard normals for the speed and turn
//!   factors (when they are redrawn every tick).

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};
use crate::metrics::{measure, MetricConfig, MetricTrace};
use crate::model::{
    apply_controller, default_vision_halfangle, step_agent_with_trig, ActuationDraws, ActuatorLimits, AgentState,
    ArenaSpec, ControlInput, ControllerKind, ControllerMode, DEFAULT_BODY_RADIUS, DEFAULT_DT,
    DEFAULT_VISION_DISTANCE,
};
use crate::rng::{stream, SplitMix64, STREAM_NOISE, STREAM_PARAMS, STREAM_SPAWN};
use crate::sensing::{sense_cones, Cone, SensingBackend};

const MAX_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Standard deviation of the per-tick multiplicative actuation factor.
    pub actuation_std: f64,
    pub false_negative_rate: f64,
    pub false_positive_rate: f64,
}

impl NoiseSpec {
    pub fn is_enabled(&self) -> bool {
        self.actuation_std > 0.0 || self.false_negative_rate > 0.0 || self.false_positive_rate > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.actuation_std.is_finite() && self.actuation_std >= 0.0)
            || !prob(self.false_negative_rate)
            || !prob(self.false_positive_rate)
        {
            return Err(SwarmError::Config(format!("noise parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Mean and standard deviation of a normal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mean: f64,
    pub std: f64,
}

impl NormalParams {
    pub const fn fixed(mean: f64) -> Self {
        NormalParams { mean, std: 0.0 }
    }

    /// Draws until the value lands in `(0, upper]`.
    pub fn sample_positive(&self, rng: &mut ChaCha8Rng, upper: f64, what: &str) -> Result<f64> {
        if !(self.mean > 0.0 && self.mean.is_finite()) {
            return Err(SwarmError::Config(format!("{what}: mean must be positive, got {}", self.mean)));
        }
        if self.std == 0.0 {
            return Ok(self.mean.min(upper));
        }
        let dist = Normal::new(self.mean, self.std)
            .map_err(|e| SwarmError::Config(format!("{what}: bad distribution: {e}")))?;
        for _ in 0..MAX_RESAMPLES {
            let v = dist.sample(rng);
            if v > 0.0 && v <= upper {
                return Ok(v);
            }
        }
        Err(SwarmError::Config(format!("{what}: could not draw a value in (0, {upper}]")))
    }
}

/// When the actuation factors are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorTiming {
    /// Once per agent at initialization; the agent keeps its factors.
    #[default]
    PerAgent,
    /// Afresh every tick. Agents store the population mean and each tick
    /// scales it by `1 + (std / mean) * z`, clamped at zero.
    PerTick,
}

/// Population distributions for the per-agent constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub speed_factor: NormalParams,
    pub turn_factor: NormalParams,
    /// m
    pub vision_distance: NormalParams,
    /// rad, half of the field-of-view opening
    pub vision_halfangle: NormalParams,
    #[serde(default)]
    pub factor_timing: FactorTiming,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            speed_factor: NormalParams::fixed(1.0),
            turn_factor: NormalParams::fixed(1.0),
            vision_distance: NormalParams::fixed(DEFAULT_VISION_DISTANCE),
            vision_halfangle: NormalParams::fixed(default_vision_halfangle()),
            factor_timing: FactorTiming::PerAgent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub speed_factor: f64,
    pub turn_factor: f64,
    pub vision_distance: f64,
    pub vision_halfangle: f64,
}

impl PopulationSpec {
    /// Parameters of agent `id`, drawn from its own keyed stream.
    pub fn sample_agent(&self, seed: u64, id: u32) -> Result<AgentParams> {
        let mut rng = stream(seed, &[STREAM_PARAMS, id as u64]);
        let (speed, turn) = match self.factor_timing {
            FactorTiming::PerAgent => (self.speed_factor, self.turn_factor),
            FactorTiming::PerTick => (
                NormalParams::fixed(self.speed_factor.mean),
                NormalParams::fixed(self.turn_factor.mean),
            ),
        };
        Ok(AgentParams {
            speed_factor: speed.sample_positive(&mut rng, f64::INFINITY, "speed_factor")?,
            turn_factor: turn.sample_positive(&mut rng, f64::INFINITY, "turn_factor")?,
            vision_distance: self
                .vision_distance
                .sample_positive(&mut rng, f64::INFINITY, "vision_distance")?,
            vision_halfangle: self.vision_halfangle.sample_positive(&mut rng, PI, "vision_halfangle")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdiosyncrasySource {
    Population(PopulationSpec),
    Explicit { agents: Vec<AgentParams> },
}

impl Default for IdiosyncrasySource {
    fn default() -> Self {
        IdiosyncrasySource::Population(PopulationSpec::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpawnSpec {
    /// Uniform positions in an axis-aligned box and uniform headings.
    Box {
        center_x: f64,
        center_y: f64,
        width: f64,
        height: f64,
        #[serde(default)]
        min_separation: f64,
    },
    Explicit { poses: Vec<Pose> },
}

impl Default for SpawnSpec {
    fn default() -> Self {
        SpawnSpec::Box {
            center_x: 0.0,
            center_y: 0.0,
            width: 2.0,
            height: 2.0,
            min_separation: 0.0,
        }
    }
}

/// Default controller plus per-agent overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerAssignment {
    pub default: ControllerMode,
    #[serde(default)]
    pub overrides: BTreeMap<u32, ControllerMode>,
}

impl ControllerAssignment {
    pub fn uniform(mode: ControllerMode) -> Self {
        ControllerAssignment {
            default: mode,
            overrides: BTreeMap::new(),
        }
    }

    pub fn mode_for(&self, id: u32) -> ControllerMode {
        self.overrides.get(&id).copied().unwrap_or(self.default)
    }
}

/// Parameters addressable by sweeps and live steering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldParam {
    V,
    Omega,
    NAgents,
    VisionDistance,
    VisionHalfangle,
    ActuationStd,
    FalseNegativeRate,
    FalsePositiveRate,
}

impl WorldParam {
    pub fn as_str(self) -> &'static str {
        match self {
            WorldParam::V => "v",
            WorldParam::Omega => "omega",
            WorldParam::NAgents => "n_agents",
            WorldParam::VisionDistance => "vision_distance",
            WorldParam::VisionHalfangle => "vision_halfangle",
            WorldParam::ActuationStd => "actuation_std",
            WorldParam::FalseNegativeRate => "false_negative_rate",
            WorldParam::FalsePositiveRate => "false_positive_rate",
        }
    }
}

impl std::str::FromStr for WorldParam {
    type Err = SwarmError;

    fn from_str(s: &str) -> Result<Self> {
        use WorldParam::*;
        [V, Omega, NAgents, VisionDistance, VisionHalfangle, ActuationStd, FalseNegativeRate, FalsePositiveRate]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SwarmError::Argument(format!("unknown parameter {s:?}")))
    }
}

impl std::fmt::Display for WorldParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_body_radius() -> f64 {
    DEFAULT_BODY_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n_agents: u32,
    /// s
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub arena: ArenaSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    pub controllers: ControllerAssignment,
    #[serde(default)]
    pub idiosyncrasy: IdiosyncrasySource,
    #[serde(default)]
    pub spawn: SpawnSpec,
    #[serde(default)]
    pub actuator_limits: ActuatorLimits,
    /// m; pairs closer than this count as a collision event.
    #[serde(default = "default_body_radius")]
    pub body_radius: f64,
    #[serde(default)]
    pub sensing: SensingBackend,
    #[serde(default)]
    pub metrics: MetricConfig,
}

impl WorldConfig {
    /// A uniform swarm with measured robot defaults.
    pub fn new(n_agents: u32, mode: ControllerMode) -> Self {
        WorldConfig {
            n_agents,
            dt: DEFAULT_DT,
            arena: ArenaSpec::default(),
            noise: NoiseSpec::default(),
            seed: 0,
            controllers: ControllerAssignment::uniform(mode),
            idiosyncrasy: IdiosyncrasySource::default(),
            spawn: SpawnSpec::default(),
            actuator_limits: ActuatorLimits::default(),
            body_radius: DEFAULT_BODY_RADIUS,
            sensing: SensingBackend::default(),
            metrics: MetricConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(SwarmError::Config("n_agents must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SwarmError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        self.arena.validate()?;
        self.noise.validate()?;
        self.controllers.default.validate()?;
        for (id, mode) in &self.controllers.overrides {
            if *id >= self.n_agents {
                return Err(SwarmError::Config(format!("controller override for unknown agent {id}")));
            }
            mode.validate()?;
        }
        if let IdiosyncrasySource::Explicit { agents } = &self.idiosyncrasy {
            if agents.len() != self.n_agents as usize {
                return Err(SwarmError::Config(format!(
                    "{} explicit agent parameter sets for {} agents",
                    agents.len(),
                    self.n_agents
                )));
            }
        }
        match &self.spawn {
            SpawnSpec::Explicit { poses } if poses.len() != self.n_agents as usize => {
                return Err(SwarmError::Config(format!(
                    "{} explicit poses for {} agents",
                    poses.len(),
                    self.n_agents
                )));
            }
            SpawnSpec::Box {
                width,
                height,
                min_separation,
                ..
            } if !(*width >= 0.0 && *height >= 0.0 && *min_separation >= 0.0) => {
                return Err(SwarmError::Config("spawn box dimensions must be non-negative".into()));
            }
            _ => {}
        }
        let limits = &self.actuator_limits;
        if !(limits.max_speed > 0.0 && limits.max_turn_rate > 0.0) {
            return Err(SwarmError::Config("actuator limits must be positive".into()));
        }
        if !(self.body_radius >= 0.0) {
            return Err(SwarmError::Config("body_radius must be non-negative".into()));
        }
        Ok(())
    }

    /// Returns a copy with one parameter replaced. Speed and turning rate
    /// apply to every controller; sensor values set the population mean (or
    /// every explicit agent).
    pub fn with_param(&self, param: WorldParam, value: f64) -> Result<WorldConfig> {
        if !value.is_finite() {
            return Err(SwarmError::Argument(format!("{param} must be finite")));
        }
        let mut cfg = self.clone();
        let all_modes = |cfg: &mut WorldConfig, f: &dyn Fn(&mut ControllerMode)| {
            f(&mut cfg.controllers.default);
            cfg.controllers.overrides.values_mut().for_each(f);
        };
        match param {
            WorldParam::V => all_modes(&mut cfg, &|m| m.v = value),
            WorldParam::Omega => all_modes(&mut cfg, &|m| m.omega = value),
            WorldParam::NAgents => {
                if value < 1.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(SwarmError::Argument(format!("n_agents must be a positive integer, got {value}")));
                }
                cfg.n_agents = value as u32;
                cfg.controllers.overrides.retain(|id, _| *id < cfg.n_agents);
                if let IdiosyncrasySource::Explicit { agents } = &mut cfg.idiosyncrasy {
                    let fill = agents.last().copied();
                    agents.resize(cfg.n_agents as usize, fill.ok_or_else(|| SwarmError::Config("empty agent list".into()))?);
                }
                if let SpawnSpec::Explicit { .. } = cfg.spawn {
                    return Err(SwarmError::Argument("n_agents cannot change with explicit poses".into()));
                }
            }
            WorldParam::VisionDistance | WorldParam::VisionHalfangle => match &mut cfg.idiosyncrasy {
                IdiosyncrasySource::Population(p) => {
                    let target = if param == WorldParam::VisionDistance {
                        &mut p.vision_distance
                    } else {
                        &mut p.vision_halfangle
                    };
                    target.mean = value;
                }
                IdiosyncrasySource::Explicit { agents } => agents.iter_mut().for_each(|a| {
                    if param == WorldParam::VisionDistance {
                        a.vision_distance = value
                    } else {
                        a.vision_halfangle = value
                    }
                }),
            },
            WorldParam::ActuationStd => cfg.noise.actuation_std = value,
            WorldParam::FalseNegativeRate => cfg.noise.false_negative_rate = value,
            WorldParam::FalsePositiveRate => cfg.noise.false_positive_rate = value,
        }
        cfg.validate()?;
        if param == WorldParam::VisionHalfangle && !(value > 0.0 && value <= PI) {
            return Err(SwarmError::Argument(format!("vision_halfangle must be in (0, pi], got {value}")));
        }
        if param == WorldParam::VisionDistance && value < 0.0 {
            return Err(SwarmError::Argument("vision_distance must be non-negative".into()));
        }
        Ok(cfg)
    }

    /// Relative spread of the speed and turn factors redrawn every tick, if any.
    pub fn per_tick_factor_spread(&self) -> Option<(f64, f64)> {
        match &self.idiosyncrasy {
            IdiosyncrasySource::Population(p) if p.factor_timing == FactorTiming::PerTick => Some((
                p.speed_factor.std / p.speed_factor.mean,
                p.turn_factor.std / p.turn_factor.mean,
            )),
            _ => None,
        }
    }

    /// Whether ticks draw from the noise streams at all.
    pub fn draws_noise(&self) -> bool {
        self.noise.is_enabled() || self.per_tick_factor_spread().is_some_and(|(s, t)| s > 0.0 || t > 0.0)
    }

    /// Per-agent constants in id order.
    pub fn agent_params(&self) -> Result<Vec<AgentParams>> {
        match &self.idiosyncrasy {
            IdiosyncrasySource::Explicit { agents } => Ok(agents.clone()),
            IdiosyncrasySource::Population(p) => (0..self.n_agents).map(|id| p.sample_agent(self.seed, id)).collect(),
        }
    }

    /// Initial poses in id order.
    pub fn spawn_poses(&self) -> Result<Vec<Pose>> {
        match &self.spawn {
            SpawnSpec::Explicit { poses } => Ok(poses.clone()),
            SpawnSpec::Box {
                center_x,
                center_y,
                width,
                height,
                min_separation,
            } => {
                let mut poses: Vec<Pose> = Vec::with_capacity(self.n_agents as usize);
                for id in 0..self.n_agents {
                    let mut rng = stream(self.seed, &[STREAM_SPAWN, id as u64]);
                    let mut placed = None;
                    for _ in 0..MAX_RESAMPLES {
                        let x = center_x + width * (rng.random::<f64>() - 0.5);
                        let y = center_y + height * (rng.random::<f64>() - 0.5);
                        let heading = rng.random::<f64>() * TAU;
                        let (x, y) = self.arena.apply(x, y);
                        let clear = poses.iter().all(|p| {
                            let (dx, dy) = self.arena.displacement((p.x, p.y), (x, y));
                            dx.hypot(dy) >= *min_separation
                        });
                        if clear {
                            placed = Some(Pose { x, y, heading });
                            break;
                        }
                    }
                    poses.push(placed.ok_or_else(|| {
                        SwarmError::Config(format!(
                            "spawn box {width} x {height} too small for {} agents {min_separation} m apart",
                            self.n_agents
                        ))
                    })?);
                }
                Ok(poses)
            }
        }
    }
}

/// Serializable runtime state: everything but the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub agents: Vec<AgentState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    config: WorldConfig,
    tick: u64,
    agents: Vec<AgentState>,
}

impl World {
    pub fn init(config: WorldConfig) -> Result<World> {
        config.validate()?;
        let params = config.agent_params()?;
        let poses = config.spawn_poses()?;
        let agents = (0..config.n_agents)
            .map(|id| {
                let (p, pose) = (params[id as usize], poses[id as usize]);
                AgentState {
                    id,
                    x: pose.x,
                    y: pose.y,
                    heading: crate::model::wrap_angle(pose.heading),
                    speed_factor: p.speed_factor,
                    turn_factor: p.turn_factor,
                    vision_distance: p.vision_distance,
                    vision_halfangle: p.vision_halfangle,
                    controller: config.controllers.mode_for(id),
                    last_sensor: false,
                    last_input: ControlInput::ZERO,
                }
            })
            .collect::<Vec<_>>();
        for a in &agents {
            a.validate()?;
        }
        Ok(World {
            config,
            tick: 0,
            agents,
        })
    }

    /// Rebuilds a world from a configuration and saved runtime state.
    pub fn from_state(config: WorldConfig, state: WorldState) -> Result<World> {
        config.validate()?;
        if state.agents.len() != config.n_agents as usize {
            return Err(SwarmError::Config(format!(
                "state has {} agents, config expects {}",
                state.agents.len(),
                config.n_agents
            )));
        }
        for a in &state.agents {
            a.validate()?;
        }
        Ok(World {
            config,
            tick: state.tick,
            agents: state.agents,
        })
    }

    pub fn state(&self) -> WorldState {
        WorldState {
            tick: self.tick,
            agents: self.agents.clone(),
        }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn sim_time(&self) -> f64 {
        self.tick as f64 * self.config.dt
    }

    /// Mean vision distance of the population.
    pub fn gamma(&self) -> f64 {
        self.agents.iter().map(|a| a.vision_distance).sum::<f64>() / self.agents.len() as f64
    }

    fn index_of(&self, id: u32) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| a.id == id)
            .ok_or(SwarmError::UnknownAgent(id))
    }

    pub fn agent(&self, id: u32) -> Result<&AgentState> {
        Ok(&self.agents[self.index_of(id)?])
    }

    /// Reading agent `id` takes on the next tick, noise included.
    pub fn sense(&self, id: u32) -> Result<bool> {
        let i = self.index_of(id)?;
        let cone = Cone::of(&self.agents[i]);
        let truth = self
            .agents
            .iter()
            .enumerate()
            .any(|(j, other)| j != i && cone.contains(other.position(), &self.config.arena));
        let mut noise = self.noise_stream(id);
        Ok(self.flip(truth, noise.as_mut()))
    }

    fn noise_stream(&self, id: u32) -> Option<SplitMix64> {
        self.config
            .draws_noise()
            .then(|| SplitMix64::keyed(self.config.seed, &[STREAM_NOISE, id as u64, self.tick]))
    }

    fn flip(&self, truth: bool, rng: Option<&mut SplitMix64>) -> bool {
        let Some(rng) = rng else { return truth };
        let u: f64 = rng.random();
        let noise = &self.config.noise;
        if truth {
            u >= noise.false_negative_rate
        } else {
            u < noise.false_positive_rate
        }
    }

    /// Advances every agent by one tick against the current snapshot. On
    /// error the world is left untouched.
    pub fn step(&mut self) -> Result<()> {
        let trig: Vec<(f64, f64)> = self.agents.iter().map(|a| a.heading.sin_cos()).collect();
        let cones: Vec<Cone> = self.agents.iter().zip(&trig).map(|(a, &t)| Cone::with_trig(a, t)).collect();
        let truth = sense_cones(&self.agents, &cones, &self.config.arena, self.config.sensing);
        let dt = self.config.dt;
        let std = self.config.noise.actuation_std;
        let spread = self.config.per_tick_factor_spread();
        let next = self
            .agents
            .iter()
            .zip(truth)
            .zip(trig)
            .map(|((agent, seen), trig)| {
                let mut rng = self.noise_stream(agent.id);
                let detected = self.flip(seen, rng.as_mut());
                let mut draws = ActuationDraws::ONE;
                if let Some(rng) = rng.as_mut() {
                    if std > 0.0 {
                        draws.speed *= scaled_draw(rng, std);
                        draws.turn *= scaled_draw(rng, std);
                    }
                    if let Some((speed_spread, turn_spread)) = spread {
                        draws.speed *= scaled_draw(rng, speed_spread);
                        draws.turn *= scaled_draw(rng, turn_spread);
                    }
                }
                let input = apply_controller(&agent.controller, detected).saturate(&self.config.actuator_limits);
                let mut next = step_agent_with_trig(agent, input, dt, draws, &self.config.arena, trig)?;
                next.last_sensor = detected;
                Ok(next)
            })
            .collect::<Result<Vec<_>>>()?;
        self.agents = next;
        self.tick += 1;
        Ok(())
    }

    pub fn measure(&self) -> MetricTrace {
        measure(
            self.tick,
            &self.agents,
            &self.config.arena,
            self.gamma(),
            self.config.dt,
            self.config.body_radius,
            &self.config.metrics,
        )
    }

    pub fn metric_config(&self) -> &MetricConfig {
        &self.config.metrics
    }

    /// Switches one agent to another controller law, keeping the shared
    /// speed and turning rate.
    pub fn assign_controller(&mut self, id: u32, kind: ControllerKind) -> Result<()> {
        self.assign_mode(id, ControllerMode { kind, ..self.config.controllers.default })
    }

    /// Gives one agent its own controller mode.
    pub fn assign_mode(&mut self, id: u32, mode: ControllerMode) -> Result<()> {
        let i = self.index_of(id)?;
        mode.validate()?;
        if mode == self.config.controllers.default {
            self.config.controllers.overrides.remove(&id);
        } else {
            self.config.controllers.overrides.insert(id, mode);
        }
        self.agents[i].controller = mode;
        Ok(())
    }

    /// Applies a parameter change to the running world. Changing the agent
    /// count re-initializes the world from the updated configuration.
    pub fn set_param(&mut self, param: WorldParam, value: f64) -> Result<()> {
        let cfg = self.config.with_param(param, value)?;
        match param {
            WorldParam::NAgents => {
                *self = World::init(cfg)?;
                return Ok(());
            }
            WorldParam::V | WorldParam::Omega => {
                for a in &mut self.agents {
                    a.controller = cfg.controllers.mode_for(a.id);
                }
            }
            WorldParam::VisionDistance => self.agents.iter_mut().for_each(|a| a.vision_distance = value),
            WorldParam::VisionHalfangle => self.agents.iter_mut().for_each(|a| a.vision_halfangle = value),
            WorldParam::ActuationStd | WorldParam::FalseNegativeRate | WorldParam::FalsePositiveRate => {}
        }
        self.config = cfg;
        Ok(())
    }
}

/// `max(0, 1 + spread * z)` for a standard normal `z`.
fn scaled_draw(rng: &mut SplitMix64, spread: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (1.0 + spread * z).max(0.0)
}
