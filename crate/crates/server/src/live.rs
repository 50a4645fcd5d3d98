use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use coilstack_core::forcemap::ForceMapGrid;
use coilstack_core::magnetics::{CoilStack, CurrentVector};
use coilstack_core::protocol::{ClientMessage, ServerMessage, StateMessage};
use coilstack_core::scan::field_slice;
use coilstack_core::scene::Scene;
use coilstack_core::simloop::{Command, LoopConfig, Simulator};
use coilstack_core::{Error, Result, Vec3};
use futures::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::time::{interval, MissedTickBehavior};

use crate::AppState;

pub const DEFAULT_BROADCAST_HZ: f64 = 50.0;

/// Where the finger starts: on the axis near the top of the workspace.
const START_POSITION: Vec3 = Vec3::new(0.0, 0.0, 0.2);

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub scene: Scene,
    pub loop_config: LoopConfig,
    pub broadcast_hz: f64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            scene: Scene::demo(),
            loop_config: LoopConfig::default(),
            broadcast_hz: DEFAULT_BROADCAST_HZ,
        }
    }
}

type Reply = oneshot::Sender<Result<()>>;

/// Cloneable handle on the running loop.
#[derive(Debug, Clone)]
pub struct LiveHandle {
    commands: mpsc::Sender<(Command, Reply)>,
    states: broadcast::Sender<Utf8Bytes>,
    currents: watch::Receiver<CurrentVector>,
    stack: CoilStack,
}

impl LiveHandle {
    /// Spawns the stepper task on the current runtime.
    pub fn spawn(stack: CoilStack, map: Arc<ForceMapGrid>, config: LiveConfig) -> Result<Self> {
        if !(config.broadcast_hz > 0.0 && config.broadcast_hz <= config.loop_config.force_rate) {
            return Err(Error::InvalidInput(format!(
                "broadcast rate must be in (0, force_rate], got {}",
                config.broadcast_hz
            )));
        }
        let mut sim = Simulator::new(stack, map, config.scene, config.loop_config)?;
        sim.apply(Command::SetPosition(START_POSITION))?;

        let (cmd_tx, cmd_rx) = mpsc::channel(64);
        let (state_tx, _) = broadcast::channel(256);
        let (cur_tx, cur_rx) = watch::channel(CurrentVector::ZERO);
        let every = (config.loop_config.force_rate / config.broadcast_hz).round().max(1.0) as u64;
        tokio::spawn(run_loop(sim, every, cmd_rx, state_tx.clone(), cur_tx));
        Ok(Self {
            commands: cmd_tx,
            states: state_tx,
            currents: cur_rx,
            stack,
        })
    }

    /// Queues a command for the next tick and waits for its outcome.
    pub async fn send(&self, command: Command) -> Result<()> {
        let (tx, rx) = oneshot::channel();
        let stopped = || Error::InvalidInput("live loop has stopped".into());
        self.commands.send((command, tx)).await.map_err(|_| stopped())?;
        rx.await.map_err(|_| stopped())?
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Utf8Bytes> {
        self.states.subscribe()
    }

    pub fn currents(&self) -> CurrentVector {
        *self.currents.borrow()
    }
}

async fn run_loop(
    mut sim: Simulator,
    every: u64,
    mut commands: mpsc::Receiver<(Command, Reply)>,
    states: broadcast::Sender<Utf8Bytes>,
    currents: watch::Sender<CurrentVector>,
) {
    let mut ticker = interval(Duration::from_secs_f64(sim.config().dt()));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut tick: u64 = 0;
    loop {
        ticker.tick().await;
        loop {
            match commands.try_recv() {
                Ok((command, reply)) => {
                    let _ = reply.send(sim.apply(command));
                }
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        let record = sim.step();
        currents.send_replace(record.currents_actual);
        if tick.is_multiple_of(every) {
            let text = ServerMessage::State(StateMessage::from(&record)).to_json();
            // No subscribers is fine.
            let _ = states.send(Utf8Bytes::from(text));
        }
        tick += 1;
    }
}

pub async fn ws_handler(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    match state.live.clone() {
        Some(live) => ws.on_upgrade(move |socket| session(socket, live)),
        None => (StatusCode::SERVICE_UNAVAILABLE, "live loop not running").into_response(),
    }
}

async fn session(socket: WebSocket, live: LiveHandle) {
    let (mut sink, mut stream) = socket.split();
    let mut states = live.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::channel::<String>(32);

    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                state = states.recv() => match state {
                    Ok(text) => text,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                reply = reply_rx.recv() => match reply {
                    Some(text) => Utf8Bytes::from(text),
                    None => break,
                },
            };
            if sink.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => {
                for line in text.as_str().lines().filter(|l| !l.trim().is_empty()) {
                    if let Some(reply) = handle_line(&live, line).await {
                        if reply_tx.send(reply.to_json()).await.is_err() {
                            break;
                        }
                    }
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    writer.abort();
}

async fn handle_line(live: &LiveHandle, line: &str) -> Option<ServerMessage> {
    let error = |message: String| Some(ServerMessage::Error { message });
    let msg: ClientMessage = match serde_json::from_str(line) {
        Ok(msg) => msg,
        Err(e) => return error(format!("bad message: {e}")),
    };
    if let ClientMessage::FieldSlice { plane, n } = msg {
        let (stack, currents) = (live.stack, live.currents());
        let slice = tokio::task::spawn_blocking(move || field_slice(&stack, &currents, plane, n)).await;
        return match slice {
            Ok(Ok(s)) => Some(ServerMessage::FieldSliceData { n: s.n, values: s.values }),
            Ok(Err(e)) => error(e.to_string()),
            Err(e) => error(format!("slice worker failed: {e}")),
        };
    }
    let command = msg.into_command()?;
    match live.send(command).await {
        Ok(()) => None,
        Err(e) => error(e.to_string()),
    }
}
