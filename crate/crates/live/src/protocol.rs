//! Wire messages. Every message is one JSON text frame carrying `"v": 1`.
//! Clients send commands tagged by `"cmd"`; the server answers with
//! messages tagged by `"type"`. See `docs/protocol.md`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use swarm_core::config::RunConfig;
use swarm_core::record::AgentSample;
use swarm_core::world::WorldParam;
use swarm_core::ControllerKind;
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
pub const SCHEMA: &str = "swarm-live/1";

fn one() -> u64 {
    1
}

/// Steering commands, applied between ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetParam {
        name: WorldParam,
        value: f64,
    },
    /// Omitted magnitudes keep the agent's current ones.
    AssignController {
        agent_id: u32,
        kind: ControllerKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    Pause,
    Resume,
    /// Advances `k` ticks while paused.
    Step {
        #[serde(default = "one")]
        k: u64,
    },
    /// Restarts from tick 0, optionally under a new seed.
    Reset {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    SetSpeed {
        multiplier: f64,
    },
    /// Replaces the session; a config carrying a `state` resumes from it.
    LoadConfig {
        config: Box<RunConfig>,
    },
    Snapshot,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SetParam { .. } => "set_param",
            Command::AssignController { .. } => "assign_controller",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Step { .. } => "step",
            Command::Reset { .. } => "reset",
            Command::SetSpeed { .. } => "set_speed",
            Command::LoadConfig { .. } => "load_config",
            Command::Snapshot => "snapshot",
        }
    }
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("malformed command: {0}")]
    Malformed(String),

    #[error("unsupported protocol version {0} (expected {PROTOCOL_VERSION})")]
    Version(Value),

    #[error("{0}")]
    Rejected(String),

    #[error(transparent)]
    Core(#[from] swarm_core::SwarmError),
}

/// A command as received: the client's correlation id, if any, and the
/// parsed command.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: Option<Value>,
    pub command: Command,
}

/// Parses one client message. On failure the correlation id is still
/// returned when it could be read.
pub fn parse_request(text: &str) -> Result<Request, (Option<Value>, CommandError)> {
    let value: Value = serde_json::from_str(text).map_err(|e| (None, CommandError::Malformed(e.to_string())))?;
    let Value::Object(mut obj) = value else {
        return Err((None, CommandError::Malformed("expected a JSON object".into())));
    };
    let id = obj.remove("id");
    match obj.remove("v") {
        None => {}
        Some(v) if v.as_u64() == Some(PROTOCOL_VERSION as u64) => {}
        Some(v) => return Err((id, CommandError::Version(v))),
    }
    let n_fields = obj.len();
    match serde_json::from_value(Value::Object(obj)) {
        // serde ignores extra fields on unit variants
        Ok(Command::Pause | Command::Resume | Command::Snapshot) if n_fields > 1 => {
            Err((id, CommandError::Malformed("unexpected fields".into())))
        }
        Ok(command) => Ok(Request { id, command }),
        Err(e) => Err((id, CommandError::Malformed(e.to_string()))),
    }
}

/// Serializes a request the way [`parse_request`] reads it.
pub fn encode_request(id: Option<Value>, command: &Command) -> String {
    let mut v = serde_json::to_value(command).expect("commands serialize");
    let obj = v.as_object_mut().expect("commands are objects");
    obj.insert("v".into(), PROTOCOL_VERSION.into());
    if let Some(id) = id {
        obj.insert("id".into(), id);
    }
    v.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    #[serde(with = "swarm_core::serde_ext")]
    pub circliness: f64,
    #[serde(with = "swarm_core::serde_ext")]
    pub diffusion: f64,
    pub n_components: u32,
}

/// World state after one tick. `epoch` counts restarts (reset, load,
/// agent-count changes); ticks strictly increase within an epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub epoch: u64,
    pub tick: u64,
    pub sim_time: f64,
    pub running: bool,
    pub agents: Vec<AgentSample>,
    pub metrics: FrameMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message on every connection.
    Hello {
        schema: String,
        dt: f64,
        speed: f64,
        frame: Frame,
    },
    Frame(Frame),
    /// Command applied; `epoch`/`tick` are the world position right after.
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<Value>,
        cmd: String,
        epoch: u64,
        tick: u64,
    },
    Snapshot {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<Value>,
        config: Box<RunConfig>,
    },
    /// Command rejected; nothing was applied.
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<Value>,
        reason: String,
        echo: String,
    },
    /// The simulation failed and has been paused.
    SimError {
        epoch: u64,
        tick: u64,
        reason: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    v: u32,
    #[serde(flatten)]
    msg: T,
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            v: PROTOCOL_VERSION,
            msg: self,
        })
        .expect("server messages serialize")
    }

    pub fn from_json(text: &str) -> Result<ServerMessage, CommandError> {
        let env: Envelope<ServerMessage> =
            serde_json::from_str(text).map_err(|e| CommandError::Malformed(e.to_string()))?;
        if env.v != PROTOCOL_VERSION {
            return Err(CommandError::Version(env.v.into()));
        }
        Ok(env.msg)
    }
}
