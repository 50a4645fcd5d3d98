//! Grid scans for peak flux density and peak force, plus field slices.

use std::str::FromStr;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{
    dipole_force_z, max_single_coil_force, MagnetPose, MagnetSpec, MAGNET_CENTER_MAX_R, SCAN_STEP,
};
use crate::magnetics::{stack_field, CoilStack, CurrentVector, WORKSPACE_RADIUS};

/// Radial reach of flux scans: the bore-side edge of the field plots, just
/// beyond the finger workspace.
pub const FLUX_SCAN_MAX_R: f64 = 0.110;

/// Largest field-slice resolution served.
pub const MAX_SLICE_N: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    Flux,
    Force,
    SingleCoil,
}

impl FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flux" => Ok(Self::Flux),
            "force" => Ok(Self::Force),
            "single-coil" | "single" => Ok(Self::SingleCoil),
            other => Err(Error::InvalidInput(format!("unknown scan mode {other:?}"))),
        }
    }
}

impl ScanMode {
    pub fn unit(self) -> &'static str {
        match self {
            Self::Flux => "T",
            Self::Force | Self::SingleCoil => "N",
        }
    }
}

/// One scan node. For single-coil scans `z` is the offset from the coil
/// midplane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub r: f64,
    pub z: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub mode: ScanMode,
    /// Node with the largest `|value|`.
    pub max: ScanPoint,
    /// Largest `|value|` node of each radial column, by increasing `r`.
    pub column_max: Vec<ScanPoint>,
}

/// Heights of the scan rows: the workspace span on a grid aligned to the
/// stack midpoint.
pub fn scan_heights(stack: &CoilStack) -> Vec<f64> {
    let mid = stack.midpoint();
    let (lo, _) = stack.workspace_z();
    let k = ((mid - lo) / SCAN_STEP + 1e-9).floor() as i64;
    (-k..=k).map(|i| mid + i as f64 * SCAN_STEP).collect()
}

fn radii(max_r: f64) -> Vec<f64> {
    let n = (max_r / SCAN_STEP).round() as usize;
    (0..=n).map(|i| i as f64 * SCAN_STEP).collect()
}

fn by_magnitude(a: &ScanPoint, b: &ScanPoint) -> std::cmp::Ordering {
    a.value.abs().total_cmp(&b.value.abs())
}

/// Evaluates `f` on the `radii × heights` grid, one radial column per task.
fn grid_scan<F>(rs: &[f64], zs: &[f64], f: F) -> Result<Vec<Vec<ScanPoint>>>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(rs.len().max(1));
    let chunk = rs.len().div_ceil(workers).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = rs
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || {
                    part.iter()
                        .map(|&r| {
                            zs.iter()
                                .map(|&z| Ok(ScanPoint { r, z, value: f(r, z)? }))
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut columns = Vec::with_capacity(rs.len());
        for h in handles {
            columns.extend(h.join().expect("scan worker panicked")?);
        }
        Ok(columns)
    })
}

fn summarize(mode: ScanMode, columns: Vec<Vec<ScanPoint>>) -> ScanResult {
    let column_max: Vec<ScanPoint> = columns
        .iter()
        .map(|c| *c.iter().max_by(|a, b| by_magnitude(a, b)).expect("non-empty column"))
        .collect();
    let max = *column_max
        .iter()
        .max_by(|a, b| by_magnitude(a, b))
        .expect("non-empty scan");
    ScanResult {
        mode,
        max,
        column_max,
    }
}

/// Peak `|B|` over `r ∈ [0, 110 mm]` and the workspace height.
pub fn flux_scan(stack: &CoilStack, currents: &CurrentVector) -> Result<ScanResult> {
    let columns = grid_scan(&radii(FLUX_SCAN_MAX_R), &scan_heights(stack), |r, z| {
        Ok(stack_field(stack, currents, r, z)?.magnitude())
    })?;
    Ok(summarize(ScanMode::Flux, columns))
}

/// Peak dipole `F_z` over magnet-centre radii `r ∈ [0, 90 mm]` and the
/// workspace height.
pub fn force_scan(
    stack: &CoilStack,
    magnet: &MagnetSpec,
    currents: &CurrentVector,
) -> Result<ScanResult> {
    let columns = grid_scan(&radii(MAGNET_CENTER_MAX_R), &scan_heights(stack), |r, z| {
        dipole_force_z(magnet, &MagnetPose::at(r, z), stack, currents)
    })?;
    Ok(summarize(ScanMode::Force, columns))
}

/// Peak force of one coil at its maximum current.
pub fn single_coil_scan(stack: &CoilStack, magnet: &MagnetSpec) -> Result<ScanResult> {
    let peak = max_single_coil_force(magnet, &stack.coil)?;
    let max = ScanPoint {
        r: peak.r,
        z: peak.dz,
        value: peak.force,
    };
    Ok(ScanResult {
        mode: ScanMode::SingleCoil,
        max,
        column_max: vec![max],
    })
}

pub fn scan_max(
    mode: ScanMode,
    stack: &CoilStack,
    magnet: &MagnetSpec,
    currents: &CurrentVector,
) -> Result<ScanResult> {
    match mode {
        ScanMode::Flux => flux_scan(stack, currents),
        ScanMode::Force => force_scan(stack, magnet, currents),
        ScanMode::SingleCoil => single_coil_scan(stack, magnet),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xz,
    Yz,
}

impl FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xz" => Ok(Self::Xz),
            "yz" => Ok(Self::Yz),
            other => Err(Error::InvalidInput(format!("unknown plane {other:?}"))),
        }
    }
}

/// `|B|` on an `n × n` raster of a vertical plane through the axis.
///
/// Columns span the horizontal coordinate over `±105 mm`, rows span the
/// workspace height bottom to top; values are row-major. The field is
/// axisymmetric so both planes give the same raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSlice {
    pub plane: Plane,
    pub n: usize,
    pub u_range: (f64, f64),
    pub z_range: (f64, f64),
    pub values: Vec<f64>,
}

impl FieldSlice {
    pub fn u_at(&self, col: usize) -> f64 {
        lerp(self.u_range, col, self.n)
    }

    pub fn z_at(&self, row: usize) -> f64 {
        lerp(self.z_range, row, self.n)
    }
}

// Centred form so that symmetric ranges give exactly mirrored nodes.
fn lerp((lo, hi): (f64, f64), i: usize, n: usize) -> f64 {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    if n == 1 {
        return mid;
    }
    mid + half * (2.0 * i as f64 - (n - 1) as f64) / (n - 1) as f64
}

pub fn field_slice(
    stack: &CoilStack,
    currents: &CurrentVector,
    plane: Plane,
    n: usize,
) -> Result<FieldSlice> {
    if n == 0 || n > MAX_SLICE_N {
        return Err(Error::InvalidInput(format!("slice size must be in 1..={MAX_SLICE_N}, got {n}")));
    }
    let mut slice = FieldSlice {
        plane,
        n,
        u_range: (-WORKSPACE_RADIUS, WORKSPACE_RADIUS),
        z_range: stack.workspace_z(),
        values: Vec::with_capacity(n * n),
    };
    for row in 0..n {
        let z = slice.z_at(row);
        for col in 0..n {
            let r = slice.u_at(col).abs();
            slice.values.push(stack_field(stack, currents, r, z)?.magnitude());
        }
    }
    Ok(slice)
}
