//! Axial force on the fingertip disk magnet.
//!
//! The magnet is uniformly magnetized along +Z. The fast path treats it as a
//! point dipole, `F_z = m · dB_z/dz`; the volumetric path splits the disk
//! into cells and sums the dipole force of each.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetics::{
    gradient_z, CoilDrive, CoilSpec, CoilStack, CurrentVector, FieldSource, StackDrive,
    GRADIENT_STEP,
};
use crate::vec3::Vec3;

/// Largest radial distance of the magnet centre from the stack axis.
pub const MAGNET_CENTER_MAX_R: f64 = 0.090;

/// Grid step of the force scans.
pub const SCAN_STEP: f64 = 0.005;

/// Axial half-range of the single-coil scans.
pub const SINGLE_COIL_SCAN_DZ: f64 = 0.215;

/// Uniformly magnetized disk magnet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetSpec {
    pub radius: f64,
    pub thickness: f64,
    /// A/m.
    pub magnetization: f64,
}

impl MagnetSpec {
    /// N35 disk, 40 mm diameter, 4 mm thick. Magnetization is set to the
    /// quoted coercivity.
    pub const fn n35() -> Self {
        Self {
            radius: 0.020,
            thickness: 0.004,
            magnetization: 8.59e5,
        }
    }

    pub fn volume(&self) -> f64 {
        PI * self.radius * self.radius * self.thickness
    }

    /// Dipole moment, A·m².
    pub fn moment(&self) -> f64 {
        self.magnetization * self.volume()
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius > 0.0 && self.thickness > 0.0 && self.magnetization > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid magnet: {self:?}")))
        }
    }
}

impl Default for MagnetSpec {
    fn default() -> Self {
        Self::n35()
    }
}

/// Magnet centre. The magnetization axis is always +Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetPose {
    pub position: Vec3,
}

impl MagnetPose {
    pub fn new(position: Vec3) -> Self {
        Self { position }
    }

    /// Pose at radial distance `r` on the +Y side, height `z`.
    pub fn at(r: f64, z: f64) -> Self {
        Self::new(Vec3::new(0.0, r, z))
    }

    fn check(&self) -> Result<()> {
        let p = self.position;
        if !p.is_finite() || p.radial() > MAGNET_CENTER_MAX_R + 1e-12 {
            Err(Error::OutOfWorkspace { r: p.radial(), z: p.z })
        } else {
            Ok(())
        }
    }
}

/// Cell counts for the volumetric model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagnetCells {
    pub radial: usize,
    pub azimuthal: usize,
    pub axial: usize,
}

impl MagnetCells {
    pub const fn new(radial: usize, azimuthal: usize, axial: usize) -> Self {
        Self {
            radial,
            azimuthal,
            axial,
        }
    }

    pub const fn doubled(self) -> Self {
        Self::new(self.radial * 2, self.azimuthal * 2, self.axial * 2)
    }
}

impl Default for MagnetCells {
    fn default() -> Self {
        Self::new(4, 12, 2)
    }
}

/// Dipole-approximation axial force (N) from an arbitrary field source.
pub fn dipole_force_in(
    magnet: &MagnetSpec,
    pose: &MagnetPose,
    source: &impl FieldSource,
) -> Result<f64> {
    pose.check()?;
    let p = pose.position;
    Ok(magnet.moment() * gradient_z(source, p.radial(), p.z, GRADIENT_STEP)?)
}

/// Volumetric axial force (N): each cell is a point dipole of moment
/// `M · cell_volume` at its area centroid.
pub fn volumetric_force_in(
    magnet: &MagnetSpec,
    pose: &MagnetPose,
    source: &impl FieldSource,
    cells: MagnetCells,
) -> Result<f64> {
    pose.check()?;
    let p = pose.position;
    let (nr, nt, nz) = (cells.radial, cells.azimuthal, cells.axial);
    let dt = magnet.thickness / nz as f64;
    let mut total = 0.0;
    for i in 0..nr {
        let r_in = magnet.radius * i as f64 / nr as f64;
        let r_out = magnet.radius * (i + 1) as f64 / nr as f64;
        let area = PI * (r_out * r_out - r_in * r_in) / nt as f64;
        let rho = 2.0 / 3.0 * (r_out.powi(3) - r_in.powi(3)) / (r_out * r_out - r_in * r_in);
        let cell_moment = magnet.magnetization * area * dt;
        for j in 0..nt {
            let theta = 2.0 * PI * (j as f64 + 0.5) / nt as f64;
            let x = p.x + rho * theta.cos();
            let y = p.y + rho * theta.sin();
            let r = x.hypot(y);
            for k in 0..nz {
                let z = p.z - 0.5 * magnet.thickness + (k as f64 + 0.5) * dt;
                total += cell_moment * gradient_z(source, r, z, GRADIENT_STEP)?;
            }
        }
    }
    Ok(total)
}

/// Dipole force on the magnet from the stack under `currents`.
pub fn dipole_force_z(
    magnet: &MagnetSpec,
    pose: &MagnetPose,
    stack: &CoilStack,
    currents: &CurrentVector,
) -> Result<f64> {
    dipole_force_in(magnet, pose, &StackDrive::new(stack, *currents))
}

pub fn volumetric_force_z(
    magnet: &MagnetSpec,
    pose: &MagnetPose,
    stack: &CoilStack,
    currents: &CurrentVector,
    cells: MagnetCells,
) -> Result<f64> {
    volumetric_force_in(magnet, pose, &StackDrive::new(stack, *currents), cells)
}

/// One node of a single-coil force scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcePoint {
    pub r: f64,
    pub dz: f64,
    pub force: f64,
}

/// Dipole force over the S1 quadrant of one coil: `r ∈ [0, 90 mm]`,
/// `dz ∈ [0, 215 mm]` on the 5 mm grid. Rows are ordered by `r`, then `dz`.
pub fn single_coil_force_scan(
    magnet: &MagnetSpec,
    coil: &CoilSpec,
    current: f64,
) -> Result<Vec<ForcePoint>> {
    let drive = CoilDrive::new(coil, 0.0, current);
    let nr = (MAGNET_CENTER_MAX_R / SCAN_STEP).round() as usize;
    let nz = (SINGLE_COIL_SCAN_DZ / SCAN_STEP).round() as usize;
    let mut out = Vec::with_capacity((nr + 1) * (nz + 1));
    for i in 0..=nr {
        let r = i as f64 * SCAN_STEP;
        for j in 0..=nz {
            let dz = j as f64 * SCAN_STEP;
            let force = dipole_force_in(magnet, &MagnetPose::at(r, dz), &drive)?;
            out.push(ForcePoint { r, dz, force });
        }
    }
    Ok(out)
}

/// Peak |F_z| of one coil at its maximum current, with its location.
pub fn max_single_coil_force(magnet: &MagnetSpec, coil: &CoilSpec) -> Result<ForcePoint> {
    let scan = single_coil_force_scan(magnet, coil, coil.max_current)?;
    Ok(scan
        .into_iter()
        .max_by(|a, b| a.force.abs().total_cmp(&b.force.abs()))
        .expect("scan grid is non-empty"))
}
