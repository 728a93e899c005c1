//! One steerable world. Pure and synchronous: the server drives it from a
//! single task, so commands land strictly between ticks.

use swarm_core::config::RunConfig;
use swarm_core::metrics::ClassifierConfig;
use swarm_core::record::AgentSample;
use swarm_core::world::WorldParam;
use swarm_core::{ControllerMode, World};

use crate::protocol::{Command, CommandError, Frame, FrameMetrics};

/// Largest accepted speed multiplier.
pub const MAX_SPEED: f64 = 1000.0;
/// Largest single `step`.
pub const MAX_STEP: u64 = 100_000;
/// Ticks one `advance` may run; wall time beyond it is dropped rather than
/// caught up later.
pub const MAX_TICKS_PER_ADVANCE: u64 = 5_000;

/// What a command or an advance produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Output {
    /// Set when the world moved to a new tick or a new epoch.
    pub frame: Option<Frame>,
    /// Set when stepping failed; the session is then paused.
    pub sim_error: Option<String>,
    /// Reply payload of a `snapshot` command.
    pub snapshot: Option<RunConfig>,
}

pub struct Session {
    world: World,
    classifier: ClassifierConfig,
    ticks: u64,
    running: bool,
    speed: f64,
    epoch: u64,
    backlog: f64,
}

impl Session {
    /// Paused session on `config` (resumed from its state if present).
    pub fn new(config: RunConfig) -> Result<Session, CommandError> {
        config.validate()?;
        Ok(Session {
            world: config.build_world()?,
            classifier: config.classifier,
            ticks: config.ticks,
            running: false,
            speed: 1.0,
            epoch: 0,
            backlog: 0.0,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn tick(&self) -> u64 {
        self.world.tick()
    }

    pub fn frame(&self) -> Frame {
        let m = self.world.measure();
        Frame {
            epoch: self.epoch,
            tick: self.world.tick(),
            sim_time: self.world.sim_time(),
            running: self.running,
            agents: self.world.agents().iter().map(AgentSample::from).collect(),
            metrics: FrameMetrics {
                circliness: m.circliness,
                diffusion: m.diffusion,
                n_components: m.n_components,
            },
        }
    }

    /// Current configuration, without runtime state.
    pub fn config(&self) -> RunConfig {
        RunConfig {
            ticks: self.ticks,
            state: None,
            ..RunConfig::snapshot(&self.world, self.classifier)
        }
    }

    /// Configuration plus state; loading it continues this session exactly.
    pub fn snapshot(&self) -> RunConfig {
        RunConfig {
            ticks: self.ticks,
            ..RunConfig::snapshot(&self.world, self.classifier)
        }
    }

    /// Applies one command atomically: on error nothing has changed.
    pub fn apply(&mut self, command: Command) -> Result<Output, CommandError> {
        let mut out = Output::default();
        match command {
            Command::SetParam { name, value } => {
                self.world.set_param(name, value)?;
                if name == WorldParam::NAgents {
                    self.restarted(&mut out);
                }
            }
            Command::AssignController { agent_id, kind, v, omega } => {
                let current = self.world.agent(agent_id)?.controller;
                let mode = ControllerMode {
                    kind,
                    v: v.unwrap_or(current.v),
                    omega: omega.unwrap_or(current.omega),
                };
                self.world.assign_mode(agent_id, mode)?;
            }
            Command::Pause => self.running = false,
            Command::Resume => {
                self.running = true;
                self.backlog = 0.0;
            }
            Command::Step { k } => {
                if self.running {
                    return Err(CommandError::Rejected("step requires a paused session".into()));
                }
                if k == 0 || k > MAX_STEP {
                    return Err(CommandError::Rejected(format!("step count must be in 1..={MAX_STEP}")));
                }
                return Ok(self.run_ticks(k));
            }
            Command::Reset { seed } => {
                let mut cfg = self.world.config().clone();
                if let Some(seed) = seed {
                    cfg.seed = seed;
                }
                self.world = World::init(cfg)?;
                self.restarted(&mut out);
            }
            Command::SetSpeed { multiplier } => {
                if !(multiplier.is_finite() && multiplier > 0.0 && multiplier <= MAX_SPEED) {
                    return Err(CommandError::Rejected(format!(
                        "speed multiplier must be in (0, {MAX_SPEED}], got {multiplier}"
                    )));
                }
                self.speed = multiplier;
            }
            Command::LoadConfig { config } => {
                config.validate()?;
                self.world = config.build_world()?;
                self.classifier = config.classifier;
                self.ticks = config.ticks;
                self.restarted(&mut out);
            }
            Command::Snapshot => out.snapshot = Some(self.snapshot()),
        }
        Ok(out)
    }

    fn restarted(&mut self, out: &mut Output) {
        self.epoch += 1;
        self.backlog = 0.0;
        out.frame = Some(self.frame());
    }

    /// Runs the ticks `wall_seconds` of real time buys at the current speed.
    pub fn advance(&mut self, wall_seconds: f64) -> Output {
        if !self.running {
            self.backlog = 0.0;
            return Output::default();
        }
        self.backlog += wall_seconds.max(0.0) * self.speed / self.world.config().dt;
        let due = self.backlog.floor();
        self.backlog -= due;
        let n = (due as u64).min(MAX_TICKS_PER_ADVANCE);
        if n == 0 {
            return Output::default();
        }
        self.run_ticks(n)
    }

    fn run_ticks(&mut self, n: u64) -> Output {
        let start = self.world.tick();
        let mut out = Output::default();
        for _ in 0..n {
            if let Err(e) = self.world.step() {
                self.running = false;
                out.sim_error = Some(e.to_string());
                break;
            }
        }
        if self.world.tick() > start {
            out.frame = Some(self.frame());
        }
        out
    }
}
