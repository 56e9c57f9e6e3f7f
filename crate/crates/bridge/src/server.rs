//! HTTP side: `/ws` upgrades to a live session, `/health` reports the
//! server version and how many sessions are open.
//!
//! Each connection gets three tasks. The reader forwards text frames into a
//! channel, the simulation task owns the [`Session`] and paces it against the
//! wall clock, and the writer drains the outbound queue. They share nothing
//! else.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use negotiate_core::harness::RecordLevel;
use negotiate_core::intent::LdaModel;
use negotiate_core::{HumanSide, RobotRole, TrialConfig};
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, Notify};

use crate::queue::OutboundQueue;
use crate::session::Session;
use crate::wire::WIRE_SCHEMA_VERSION;
use crate::BridgeError;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Wall-clock pacing multiplier for new sessions.
    pub speed: f64,
    /// How often the simulation task wakes up.
    pub server_tick: Duration,
    /// Outbound messages held for a slow client before snapshots are shed.
    pub queue_capacity: usize,
    /// Trial template for new sessions; the human side is always live.
    pub template: TrialConfig,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            speed: 1.0,
            server_tick: Duration::from_millis(5),
            queue_capacity: 64,
            template: TrialConfig {
                robot: RobotRole::Follower,
                human: HumanSide::Live,
                seed: 1,
                record: RecordLevel::Summary,
                profile: Default::default(),
            },
        }
    }
}

struct AppState {
    model: LdaModel,
    options: ServerOptions,
    active: AtomicUsize,
    next_id: AtomicU64,
}

#[derive(Debug, Serialize)]
struct Health {
    version: &'static str,
    schema_version: u32,
    sessions: usize,
}

/// Routes for a server using `model` for every session.
pub fn router(model: LdaModel, options: ServerOptions) -> Router {
    let state = Arc::new(AppState { model, options, active: AtomicUsize::new(0), next_id: AtomicU64::new(1) });
    Router::new().route("/health", get(health)).route("/ws", get(upgrade)).with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, model: LdaModel, options: ServerOptions) -> Result<(), BridgeError> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(model, options)).await?;
    Ok(())
}

async fn health(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(Health {
        version: env!("CARGO_PKG_VERSION"),
        schema_version: WIRE_SCHEMA_VERSION,
        sessions: state.active.load(Ordering::SeqCst),
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_connection(socket, state))
}

/// Decrements the session count however the connection ends.
struct ActiveGuard(Arc<AppState>);

impl Drop for ActiveGuard {
    fn drop(&mut self) {
        self.0.active.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn run_connection(socket: WebSocket, state: Arc<AppState>) {
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst));
    let mut session = match Session::with_config(id.clone(), state.options.template.clone(), state.model.clone()) {
        Ok(s) => s,
        Err(e) => {
            tracing::error!(%e, "cannot start session");
            return;
        }
    };
    session.set_speed(state.options.speed);
    state.active.fetch_add(1, Ordering::SeqCst);
    let _guard = ActiveGuard(state.clone());
    tracing::debug!(session = %id, "opened");

    let (mut sink, mut stream) = socket.split();
    let (in_tx, in_rx) = mpsc::channel::<String>(256);
    let queue = Arc::new(Mutex::new(OutboundQueue::new(state.options.queue_capacity)));
    let wake = Arc::new(Notify::new());

    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = stream.next().await {
            let text = match msg {
                Message::Text(t) => t.to_string(),
                Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
                Message::Close(_) => break,
                _ => continue,
            };
            if in_tx.send(text).await.is_err() {
                break;
            }
        }
    });

    let writer = {
        let queue = queue.clone();
        let wake = wake.clone();
        tokio::spawn(async move {
            loop {
                wake.notified().await;
                let batch = queue.lock().expect("queue poisoned").drain();
                for m in batch {
                    if sink.send(Message::Text(m.to_json().into())).await.is_err() {
                        return;
                    }
                }
            }
        })
    };

    simulate(&mut session, in_rx, &queue, &wake, state.options.server_tick).await;
    reader.abort();
    // let the writer flush what is left
    wake.notify_one();
    tokio::time::sleep(Duration::from_millis(20)).await;
    writer.abort();
    tracing::debug!(session = %id, "closed");
}

/// Runs until the client goes away. Inbound messages are applied before the
/// tick that follows their arrival.
async fn simulate(
    session: &mut Session,
    mut inbound: mpsc::Receiver<String>,
    queue: &Mutex<OutboundQueue>,
    wake: &Notify,
    server_tick: Duration,
) {
    let mut interval = tokio::time::interval(server_tick);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut last = Instant::now();
    loop {
        interval.tick().await;
        let mut out = Vec::new();
        loop {
            match inbound.try_recv() {
                Ok(text) => out.extend(session.handle_text(&text)),
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        let now = Instant::now();
        // after a stall, resume rather than race to catch up
        let wall = (now - last).as_secs_f64().min(0.1);
        last = now;
        match session.tick_session(wall * session.speed()) {
            Ok(msgs) => out.extend(msgs),
            Err(e) => {
                tracing::error!(%e, "simulation failed");
                return;
            }
        }
        if !out.is_empty() {
            let mut q = queue.lock().expect("queue poisoned");
            for m in out {
                q.push(m);
            }
            drop(q);
            wake.notify_one();
        }
    }
}
