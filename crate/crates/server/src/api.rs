use std::sync::Arc;

use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::Json;
use coilstack_core::allocator::{self, AllocationResult, DEFAULT_TOLERANCE};
use coilstack_core::forcemap::{build_map as build_force_map, GridSpec};
use coilstack_core::scan::{self, FieldSlice, Plane, ScanMode, ScanResult};
use coilstack_core::scene::Scene;
use coilstack_core::simloop::{self, LoopConfig, Trajectory};
use coilstack_core::{stack_field, CurrentVector, Error, Vec3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::AppState;

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldRequest {
    pub currents: CurrentVector,
    pub point: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldResponse {
    pub b_r: f64,
    pub b_z: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSliceRequest {
    pub currents: CurrentVector,
    pub plane: Plane,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocateRequest {
    pub force: f64,
    pub position: Vec3,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityRequest {
    pub position: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityResponse {
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRequest {
    pub mode: ScanMode,
    #[serde(default)]
    pub currents: CurrentVector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub scene: Scene,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub config: LoopConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BuildMapRequest {
    #[serde(default)]
    pub dr: Option<f64>,
    #[serde(default)]
    pub dz: Option<f64>,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> coilstack_core::Result<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Error::InvalidInput(format!("worker failed: {e}")))?
        .map_err(ApiError)
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

pub async fn field(State(s): Shared, Json(req): Json<FieldRequest>) -> ApiResult<Json<FieldResponse>> {
    let p = req.point;
    if !p.is_finite() {
        return Err(Error::InvalidInput("point must be finite".into()).into());
    }
    let b = stack_field(&s.stack, &req.currents, p.radial(), p.z)?;
    Ok(Json(FieldResponse {
        b_r: b.b_r,
        b_z: b.b_z,
        magnitude: b.magnitude(),
    }))
}

pub async fn field_slice(
    State(s): Shared,
    Json(req): Json<FieldSliceRequest>,
) -> ApiResult<Json<FieldSlice>> {
    let stack = s.stack;
    let slice = blocking(move || scan::field_slice(&stack, &req.currents, req.plane, req.n)).await?;
    Ok(Json(slice))
}

pub async fn allocate(
    State(s): Shared,
    Json(req): Json<AllocateRequest>,
) -> ApiResult<Json<AllocationResult>> {
    let tol = req.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")).into());
    }
    let res = allocator::allocate(req.force, req.position, &s.map, &s.stack, tol)?;
    Ok(Json(res))
}

pub async fn capacity(
    State(s): Shared,
    Json(req): Json<CapacityRequest>,
) -> ApiResult<Json<CapacityResponse>> {
    let (f_min, f_max) = allocator::capacity(req.position, &s.map, &s.stack)?;
    Ok(Json(CapacityResponse { f_min, f_max }))
}

pub async fn scan_max(State(s): Shared, Json(req): Json<ScanRequest>) -> ApiResult<Json<ScanResult>> {
    let (stack, magnet) = (s.stack, s.magnet);
    let res = blocking(move || scan::scan_max(req.mode, &stack, &magnet, &req.currents)).await?;
    Ok(Json(res))
}

pub async fn simulate(
    State(s): Shared,
    Json(req): Json<SimulateRequest>,
) -> ApiResult<impl IntoResponse> {
    let (stack, map) = (s.stack, s.map.clone());
    let csv = blocking(move || {
        let records = simloop::run(&stack, map, &req.scene, &req.trajectory, &req.config)?;
        Ok(simloop::csv_string(&records))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv))
}

pub async fn build_map(
    State(s): Shared,
    Json(req): Json<BuildMapRequest>,
) -> ApiResult<impl IntoResponse> {
    let grid = match (req.dr, req.dz) {
        (None, None) => GridSpec::device(),
        (dr, dz) => GridSpec::with_steps(dr.unwrap_or(0.005), dz.unwrap_or(0.005))?,
    };
    let (coil, magnet) = (s.stack.coil, s.magnet);
    let bytes = blocking(move || Ok(build_force_map(&coil, &magnet, grid)?.to_bytes())).await?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes))
}
