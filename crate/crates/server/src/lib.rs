//! HTTP/JSON and WebSocket front end for `coilstack-core`.
//!
//! Stateless computations live under `/api/*`. A single live haptic loop,
//! shared by every connected client, is exposed at `/ws`.

mod api;
mod error;
mod live;

use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use coilstack_core::forcemap::ForceMapGrid;
use coilstack_core::magnet::MagnetSpec;
use coilstack_core::magnetics::CoilStack;
use tokio::net::TcpListener;

pub use api::{
    AllocateRequest, BuildMapRequest, CapacityRequest, CapacityResponse, FieldRequest, FieldResponse,
    FieldSliceRequest, ScanRequest, SimulateRequest,
};
pub use error::{ApiError, ErrorBody};
pub use live::{LiveConfig, LiveHandle, DEFAULT_BROADCAST_HZ};

/// Shared, read-only model plus the optional live loop.
#[derive(Debug, Clone)]
pub struct AppState {
    pub stack: CoilStack,
    pub magnet: MagnetSpec,
    pub map: Arc<ForceMapGrid>,
    pub live: Option<LiveHandle>,
}

impl AppState {
    pub fn new(stack: CoilStack, magnet: MagnetSpec, map: Arc<ForceMapGrid>) -> Self {
        Self {
            stack,
            magnet,
            map,
            live: None,
        }
    }

    /// Starts the live loop. Must be called inside a Tokio runtime.
    pub fn with_live(mut self, config: LiveConfig) -> coilstack_core::Result<Self> {
        self.live = Some(LiveHandle::spawn(self.stack, self.map.clone(), config)?);
        Ok(self)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(api::health))
        .route("/api/field", post(api::field))
        .route("/api/field-slice", post(api::field_slice))
        .route("/api/allocate", post(api::allocate))
        .route("/api/capacity", post(api::capacity))
        .route("/api/scan-max", post(api::scan_max))
        .route("/api/simulate", post(api::simulate))
        .route("/api/build-map", post(api::build_map))
        .route("/ws", get(live::ws_handler))
        .with_state(Arc::new(state))
}

pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
