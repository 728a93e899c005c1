//! HTTP and WebSocket front end. A single task owns the [`Session`]; socket
//! handlers talk to it over a command queue and receive frames from a
//! broadcast channel, so slow viewers drop frames instead of stalling the
//! simulation.

use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use swarm_core::config::RunConfig;
use swarm_core::sweep::{self, PhaseFormat};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::{Instant, MissedTickBehavior};

use crate::protocol::{parse_request, CommandError, ServerMessage, SCHEMA};
use crate::session::{Output, Session};

/// Hard ceiling on broadcast frames per wall second.
pub const MAX_FRAME_RATE: f64 = 60.0;
/// Frames buffered per viewer before the oldest are dropped.
const FRAME_BUFFER: usize = 64;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Frames per wall second while running, capped at [`MAX_FRAME_RATE`].
    pub frame_rate: f64,
    /// Directory `/phase-diagram` may read from.
    pub data_dir: PathBuf,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            frame_rate: MAX_FRAME_RATE,
            data_dir: PathBuf::from("."),
        }
    }
}

enum Request {
    /// Subscribe to frames and get the greeting, atomically with respect to
    /// ticks: the first broadcast frame follows the greeting's frame.
    Join(oneshot::Sender<(ServerMessage, broadcast::Receiver<Utf8Bytes>)>),
    /// A raw client message; the reply goes back to that client only.
    Command(String, oneshot::Sender<ServerMessage>),
    Config(oneshot::Sender<RunConfig>),
}

/// Cloneable handle to a running session task.
#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Request>,
}

impl SessionHandle {
    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Request) -> Option<T> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(make(reply)).await.ok()?;
        rx.await.ok()
    }

    /// Applies a raw client message and returns the reply to that client.
    pub async fn command(&self, text: String) -> Option<ServerMessage> {
        self.ask(|r| Request::Command(text, r)).await
    }

    pub async fn config(&self) -> Option<RunConfig> {
        self.ask(Request::Config).await
    }

    async fn join(&self) -> Option<(ServerMessage, broadcast::Receiver<Utf8Bytes>)> {
        self.ask(Request::Join).await
    }
}

/// Starts the simulation loop on the current runtime. It ends once every
/// handle is dropped.
pub fn spawn_session(session: Session, frame_rate: f64) -> SessionHandle {
    let (tx, rx) = mpsc::channel(64);
    let rate = if frame_rate.is_finite() && frame_rate > 0.0 {
        frame_rate.min(MAX_FRAME_RATE)
    } else {
        MAX_FRAME_RATE
    };
    tokio::spawn(run_loop(session, rx, rate));
    SessionHandle { tx }
}

async fn run_loop(mut session: Session, mut rx: mpsc::Receiver<Request>, rate: f64) {
    let (frames, _) = broadcast::channel::<Utf8Bytes>(FRAME_BUFFER);
    let mut timer = tokio::time::interval(Duration::from_secs_f64(1.0 / rate));
    timer.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut last = Instant::now();
    loop {
        tokio::select! {
            now = timer.tick() => {
                let out = session.advance(now.duration_since(last).as_secs_f64());
                last = now;
                publish(&frames, &session, out);
            }
            req = rx.recv() => match req {
                None => break,
                Some(Request::Join(reply)) => {
                    let hello = ServerMessage::Hello {
                        schema: SCHEMA.into(),
                        dt: session.world().config().dt,
                        speed: session.speed(),
                        frame: session.frame(),
                    };
                    let _ = reply.send((hello, frames.subscribe()));
                }
                Some(Request::Config(reply)) => {
                    let _ = reply.send(session.config());
                }
                Some(Request::Command(text, reply)) => {
                    let msg = apply_text(&mut session, &frames, &text);
                    let _ = reply.send(msg);
                }
            },
        }
    }
}

fn apply_text(session: &mut Session, frames: &broadcast::Sender<Utf8Bytes>, text: &str) -> ServerMessage {
    let rejected = |id, e: CommandError| ServerMessage::Error {
        id,
        reason: e.to_string(),
        echo: text.to_string(),
    };
    let req = match parse_request(text) {
        Ok(req) => req,
        Err((id, e)) => return rejected(id, e),
    };
    let cmd = req.command.name().to_string();
    match session.apply(req.command) {
        Err(e) => rejected(req.id, e),
        Ok(mut out) => {
            let snapshot = out.snapshot.take();
            publish(frames, session, out);
            match snapshot {
                Some(config) => ServerMessage::Snapshot {
                    id: req.id,
                    config: Box::new(config),
                },
                None => ServerMessage::Ack {
                    id: req.id,
                    cmd,
                    epoch: session.epoch(),
                    tick: session.tick(),
                },
            }
        }
    }
}

fn publish(frames: &broadcast::Sender<Utf8Bytes>, session: &Session, out: Output) {
    // sending fails only when nobody is listening
    if let Some(frame) = out.frame {
        let _ = frames.send(ServerMessage::Frame(frame).to_json().into());
    }
    if let Some(reason) = out.sim_error {
        let msg = ServerMessage::SimError {
            epoch: session.epoch(),
            tick: session.tick(),
            reason,
        };
        let _ = frames.send(msg.to_json().into());
    }
}

#[derive(Clone)]
struct AppState {
    session: SessionHandle,
    data_dir: Arc<PathBuf>,
}

pub fn router(session: SessionHandle, data_dir: PathBuf) -> Router {
    Router::new()
        .route("/session", get(ws_upgrade))
        .route("/health", get(health))
        .route("/config", get(config))
        .route("/phase-diagram", get(phase_diagram))
        .with_state(AppState {
            session,
            data_dir: Arc::new(data_dir),
        })
}

/// Serves `session` on `listener` until the process ends.
pub async fn serve(listener: TcpListener, session: Session, options: ServeOptions) -> std::io::Result<()> {
    let handle = spawn_session(session, options.frame_rate);
    axum::serve(listener, router(handle, options.data_dir)).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "schema": SCHEMA }))
}

async fn config(State(app): State<AppState>) -> Response {
    match app.session.config().await {
        Some(cfg) => Json(cfg).into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, "session stopped").into_response(),
    }
}

#[derive(Deserialize)]
struct PhaseQuery {
    file: String,
}

/// Resolves `file` inside `dir`, refusing anything that could escape it.
fn resolve_data_file(dir: &Path, file: &str) -> Result<PathBuf, (StatusCode, String)> {
    let rel = Path::new(file);
    if file.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err((StatusCode::BAD_REQUEST, format!("invalid file name {file:?}")));
    }
    let not_found = || (StatusCode::NOT_FOUND, format!("no such phase diagram {file:?}"));
    let root = dir.canonicalize().map_err(|_| not_found())?;
    let path = root.join(rel).canonicalize().map_err(|_| not_found())?;
    if !path.starts_with(&root) || !path.is_file() {
        return Err(not_found());
    }
    Ok(path)
}

fn phase_csv(path: &Path) -> Result<String, (StatusCode, String)> {
    let unreadable = |e: swarm_core::SwarmError| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string());
    match PhaseFormat::from_path(path) {
        PhaseFormat::Csv => {
            let text = std::fs::read_to_string(path).map_err(|e| unreadable(e.into()))?;
            sweep::read_csv(text.as_bytes()).map_err(unreadable)?;
            Ok(text)
        }
        PhaseFormat::Jsonl => {
            let file = std::fs::File::open(path).map_err(|e| unreadable(e.into()))?;
            let cells = sweep::read_jsonl(std::io::BufReader::new(file)).map_err(unreadable)?;
            let mut out = Vec::new();
            sweep::write_csv(&cells, &mut out).map_err(unreadable)?;
            Ok(String::from_utf8(out).expect("csv output is utf-8"))
        }
    }
}

async fn phase_diagram(State(app): State<AppState>, Query(q): Query<PhaseQuery>) -> Response {
    let result = resolve_data_file(&app.data_dir, &q.file).and_then(|path| phase_csv(&path));
    match result {
        Ok(csv) => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn ws_upgrade(State(app): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| viewer(socket, app.session))
}

async fn viewer(mut socket: WebSocket, session: SessionHandle) {
    let Some((hello, mut frames)) = session.join().await else {
        return;
    };
    if socket.send(Message::Text(hello.to_json().into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Binary(_))) => {
                        let err = ServerMessage::Error {
                            id: None,
                            reason: "binary messages are not supported".into(),
                            echo: String::new(),
                        };
                        if socket.send(Message::Text(err.to_json().into())).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => continue,
                };
                let Some(reply) = session.command(text).await else { break };
                if socket.send(Message::Text(reply.to_json().into())).await.is_err() {
                    break;
                }
            }
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if socket.send(Message::Text(text)).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_files_stay_inside_the_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("grid.csv"), "x").unwrap();
        assert!(resolve_data_file(dir.path(), "grid.csv").is_ok());
        for bad in ["../grid.csv", "/etc/passwd", "", "./grid.csv", "a/../../x"] {
            let e = resolve_data_file(dir.path(), bad).unwrap_err();
            assert_eq!(e.0, StatusCode::BAD_REQUEST, "{bad}");
        }
        assert_eq!(resolve_data_file(dir.path(), "missing.csv").unwrap_err().0, StatusCode::NOT_FOUND);
    }
}
