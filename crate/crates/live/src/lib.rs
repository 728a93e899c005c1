//! Live steering service: one simulation per process, streamed to any
//! number of WebSocket viewers and steered by JSON commands.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{Command, CommandError, Frame, FrameMetrics, ServerMessage, PROTOCOL_VERSION, SCHEMA};
pub use server::{router, serve, spawn_session, ServeOptions, SessionHandle};
pub use session::{Output, Session};
