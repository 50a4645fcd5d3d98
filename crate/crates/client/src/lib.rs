//! Typed client for the coilstack service.
//!
//! [`Client`] wraps the stateless `/api/*` endpoints; [`LiveSession`] speaks
//! the line-delimited JSON protocol of `/ws`. [`spawn_embedded`] starts an
//! in-process server so the command line can run without a remote one.

use std::net::SocketAddr;
use std::sync::Arc;

use coilstack_core::allocator::AllocationResult;
use coilstack_core::forcemap::{build_map, ForceMapGrid, GridSpec};
use coilstack_core::protocol::{ClientMessage, ServerMessage};
use coilstack_core::scan::{FieldSlice, Plane, ScanMode, ScanResult};
use coilstack_core::{CoilStack, CurrentVector, MagnetSpec, Vec3};
use coilstack_server::{
    AllocateRequest, AppState, BuildMapRequest, CapacityRequest, CapacityResponse, ErrorBody,
    FieldRequest, FieldResponse, FieldSliceRequest, LiveConfig, ScanRequest, SimulateRequest,
};
use futures::{SinkExt, StreamExt};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::{self, Message};
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server rejected the request ({status}): {}", .body.message)]
    Api { status: u16, body: ErrorBody },
    #[error("server answered {status}: {text}")]
    Status { status: u16, text: String },
    #[error("websocket: {0}")]
    Ws(#[from] tungstenite::Error),
    #[error("bad message: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] coilstack_core::Error),
}

impl ClientError {
    /// The structured error body, when the server sent one.
    pub fn body(&self) -> Option<&ErrorBody> {
        match self {
            Self::Api { body, .. } => Some(body),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_owned(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn checked(res: reqwest::Response) -> Result<reqwest::Response> {
        let status = res.status();
        if status.is_success() {
            return Ok(res);
        }
        let text = res.text().await?;
        Err(match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => ClientError::Api { status: status.as_u16(), body },
            Err(_) => ClientError::Status { status: status.as_u16(), text },
        })
    }

    async fn post_raw(&self, path: &str, body: &impl Serialize) -> Result<reqwest::Response> {
        let res = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        Self::checked(res).await
    }

    async fn post<T: DeserializeOwned>(&self, path: &str, body: &impl Serialize) -> Result<T> {
        Ok(self.post_raw(path, body).await?.json().await?)
    }

    pub async fn health(&self) -> Result<()> {
        let res = self.http.get(format!("{}/api/health", self.base)).send().await?;
        Self::checked(res).await.map(drop)
    }

    pub async fn field(&self, currents: CurrentVector, point: Vec3) -> Result<FieldResponse> {
        self.post("/api/field", &FieldRequest { currents, point }).await
    }

    pub async fn field_slice(&self, currents: CurrentVector, plane: Plane, n: usize) -> Result<FieldSlice> {
        self.post("/api/field-slice", &FieldSliceRequest { currents, plane, n }).await
    }

    pub async fn allocate(&self, force: f64, position: Vec3, tolerance: Option<f64>) -> Result<AllocationResult> {
        self.post("/api/allocate", &AllocateRequest { force, position, tolerance }).await
    }

    pub async fn capacity(&self, position: Vec3) -> Result<CapacityResponse> {
        self.post("/api/capacity", &CapacityRequest { position }).await
    }

    pub async fn scan_max(&self, mode: ScanMode, currents: CurrentVector) -> Result<ScanResult> {
        self.post("/api/scan-max", &ScanRequest { mode, currents }).await
    }

    /// Runs a batch simulation and returns the CSV log.
    pub async fn simulate(&self, req: &SimulateRequest) -> Result<String> {
        Ok(self.post_raw("/api/simulate", req).await?.text().await?)
    }

    /// Builds a force map server side and returns it verified.
    pub async fn build_map(&self, dr: Option<f64>, dz: Option<f64>) -> Result<ForceMapGrid> {
        let bytes = self.post_raw("/api/build-map", &BuildMapRequest { dr, dz }).await?.bytes().await?;
        Ok(ForceMapGrid::from_bytes(&bytes)?)
    }

    pub async fn live(&self) -> Result<LiveSession> {
        let ws = self
            .base
            .replacen("https://", "wss://", 1)
            .replacen("http://", "ws://", 1);
        LiveSession::connect(&format!("{ws}/ws")).await
    }
}

/// One connection to the shared live loop.
pub struct LiveSession {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl LiveSession {
    pub async fn connect(url: &str) -> Result<Self> {
        let (ws, _) = connect_async(url).await?;
        Ok(Self { ws })
    }

    pub async fn send(&mut self, msg: &ClientMessage) -> Result<()> {
        let text = serde_json::to_string(msg)?;
        self.ws.send(Message::Text(text.into())).await?;
        Ok(())
    }

    /// Next server message, or `None` once the server closes.
    pub async fn next(&mut self) -> Option<Result<ServerMessage>> {
        while let Some(msg) = self.ws.next().await {
            match msg {
                Ok(Message::Text(t)) => return Some(serde_json::from_str(t.as_str()).map_err(Into::into)),
                Ok(Message::Close(_)) => return None,
                Ok(_) => continue,
                Err(e) => return Some(Err(e.into())),
            }
        }
        None
    }

    pub async fn close(mut self) -> Result<()> {
        self.ws.close(None).await?;
        Ok(())
    }
}

/// Device model served by [`spawn_embedded`] when no map is given.
pub fn device_map() -> coilstack_core::Result<ForceMapGrid> {
    build_map(&CoilStack::device().coil, &MagnetSpec::n35(), GridSpec::device())
}

/// Starts a server on an ephemeral loopback port. The live loop runs only
/// when `live` is given.
pub async fn spawn_embedded(
    map: ForceMapGrid,
    live: Option<LiveConfig>,
) -> anyhow::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let mut state = AppState::new(CoilStack::device(), MagnetSpec::n35(), Arc::new(map));
    if let Some(config) = live {
        state = state.with_live(config)?;
    }
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    Ok((addr, tokio::spawn(coilstack_server::serve(listener, state))))
}
