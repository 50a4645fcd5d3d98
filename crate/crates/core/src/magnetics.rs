//! Air-core magnetostatics for the six-coil stack.
//!
//! Each coil is a winding of rectangular cross-section, modelled as a grid of
//! circular current filaments. Filament fields use the complete elliptic
//! integral closed forms; the stack field is the plain sum over coils.
//! Coordinates are cylindrical `(r, z)` about the common stack axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::elliptic::ellip_ke;
use crate::error::{Error, Result};

/// Vacuum permeability, T·m/A.
pub const MU_0: f64 = 4.0e-7 * PI;

pub const COIL_COUNT: usize = 6;

/// Axial coordinate of P1, midway between EM3 and EM4.
pub const STACK_MIDPOINT_Z: f64 = 0.1125;

/// Centre-to-centre spacing of neighbouring coils.
pub const COIL_PITCH: f64 = 0.039;

/// Radius of the cylindrical finger workspace inside the coil bores.
pub const WORKSPACE_RADIUS: f64 = 0.105;

/// Height of the workspace cylinder, centred on P1.
pub const WORKSPACE_HEIGHT: f64 = 0.234;

/// Points closer than this to a winding are rejected; the filament model
/// diverges on the filaments themselves.
pub const WINDING_EXCLUSION: f64 = 1.0e-3;

/// Step for the central-difference axial gradient.
pub const GRADIENT_STEP: f64 = 0.5e-3;

const ON_FILAMENT_SQ: f64 = 1e-12;
const AXIS_EPS: f64 = 1e-9;
// Below this r/rho the on-axis series for B_r is more accurate than the
// elliptic expression, which cancels catastrophically.
const SMALL_R_RATIO: f64 = 1e-4;

/// Geometry and drive limits of one disk electromagnet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoilSpec {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub axial_length: f64,
    pub turns: u32,
    pub max_current: f64,
    pub resistance: f64,
    pub time_constant: f64,
}

impl CoilSpec {
    /// The device coil: R1 115 mm, R2 145 mm, 30 mm thick, 1500 turns, 1.6 A.
    pub const fn device() -> Self {
        Self {
            inner_radius: 0.115,
            outer_radius: 0.145,
            axial_length: 0.030,
            turns: 1500,
            max_current: 1.6,
            resistance: 17.6,
            time_constant: 0.0134,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.inner_radius > 0.0
            && self.inner_radius < self.outer_radius
            && self.axial_length > 0.0
            && self.turns >= 1
            && self.max_current > 0.0
            && self.time_constant >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid coil geometry: {self:?}")))
        }
    }

    /// Distance from `(r, dz)` to the winding cross-section, zero inside it.
    pub fn winding_distance(&self, r: f64, dz: f64) -> f64 {
        let half = 0.5 * self.axial_length;
        let dr = if r < self.inner_radius {
            self.inner_radius - r
        } else if r > self.outer_radius {
            r - self.outer_radius
        } else {
            0.0
        };
        let dzz = (dz.abs() - half).max(0.0);
        dr.hypot(dzz)
    }

    fn check_clear(&self, r: f64, dz: f64) -> Result<()> {
        if self.winding_distance(r, dz) < WINDING_EXCLUSION {
            Err(Error::InsideWinding { r, dz })
        } else {
            Ok(())
        }
    }
}

impl Default for CoilSpec {
    fn default() -> Self {
        Self::device()
    }
}

/// How finely a coil cross-section is split into filament loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filaments {
    pub radial: usize,
    pub axial: usize,
}

impl Filaments {
    pub const fn new(radial: usize, axial: usize) -> Self {
        Self { radial, axial }
    }

    pub const fn doubled(self) -> Self {
        Self::new(self.radial * 2, self.axial * 2)
    }
}

impl Default for Filaments {
    fn default() -> Self {
        Self::new(6, 7)
    }
}

/// Six identical coils on a common axis, EM1 lowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoilStack {
    pub coil: CoilSpec,
    pub centers_z: [f64; COIL_COUNT],
}

impl CoilStack {
    /// Device stack: 39 mm pitch, EM3/EM4 midpoint at P1.
    pub fn device() -> Self {
        Self::uniform(CoilSpec::device(), COIL_PITCH, STACK_MIDPOINT_Z)
    }

    pub fn uniform(coil: CoilSpec, pitch: f64, midpoint: f64) -> Self {
        let centers_z = std::array::from_fn(|i| midpoint + (i as f64 - 2.5) * pitch);
        Self { coil, centers_z }
    }

    pub fn validate(&self) -> Result<()> {
        self.coil.validate()?;
        let pitch = self.centers_z[1] - self.centers_z[0];
        let uniform = self
            .centers_z
            .windows(2)
            .all(|w| w[1] > w[0] && ((w[1] - w[0]) - pitch).abs() < 1e-12);
        if !uniform {
            return Err(Error::InvalidInput(
                "coil centres must be strictly increasing with uniform pitch".into(),
            ));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.centers_z[2] + self.centers_z[3])
    }

    /// Axial span of the windings themselves.
    pub fn extent(&self) -> (f64, f64) {
        let half = 0.5 * self.coil.axial_length;
        (self.centers_z[0] - half, self.centers_z[COIL_COUNT - 1] + half)
    }

    /// Axial span of the finger workspace.
    pub fn workspace_z(&self) -> (f64, f64) {
        let mid = self.midpoint();
        (mid - 0.5 * WORKSPACE_HEIGHT, mid + 0.5 * WORKSPACE_HEIGHT)
    }

    pub fn in_workspace(&self, r: f64, z: f64) -> bool {
        let (lo, hi) = self.workspace_z();
        r.is_finite() && z.is_finite() && r <= WORKSPACE_RADIUS && (lo..=hi).contains(&z)
    }

    /// Smallest distance from `(r, z)` to any winding.
    pub fn winding_clearance(&self, r: f64, z: f64) -> f64 {
        self.centers_z
            .iter()
            .map(|c| self.coil.winding_distance(r, z - c))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Default for CoilStack {
    fn default() -> Self {
        Self::device()
    }
}

/// Axisymmetric flux density, T.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSample {
    pub b_r: f64,
    pub b_z: f64,
}

impl FieldSample {
    pub fn magnitude(&self) -> f64 {
        self.b_r.hypot(self.b_z)
    }

    fn scaled(self, s: f64) -> Self {
        Self {
            b_r: self.b_r * s,
            b_z: self.b_z * s,
        }
    }
}

impl std::ops::Add for FieldSample {
    type Output = FieldSample;
    fn add(self, o: FieldSample) -> FieldSample {
        FieldSample {
            b_r: self.b_r + o.b_r,
            b_z: self.b_z + o.b_z,
        }
    }
}

impl std::ops::AddAssign for FieldSample {
    fn add_assign(&mut self, o: FieldSample) {
        *self = *self + o;
    }
}

/// Coil currents I1..I6 in amperes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurrentVector(pub [f64; COIL_COUNT]);

impl CurrentVector {
    pub const ZERO: CurrentVector = CurrentVector([0.0; COIL_COUNT]);

    /// Checks every current against the coil limit.
    pub fn bounded(currents: [f64; COIL_COUNT], coil: &CoilSpec) -> Result<Self> {
        for (i, c) in currents.iter().enumerate() {
            if !c.is_finite() || c.abs() > coil.max_current * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "current {} = {c} A exceeds the {} A limit",
                    i + 1,
                    coil.max_current
                )));
            }
        }
        Ok(Self(currents))
    }

    /// EM1-EM3 at `+c`, EM4-EM6 at `-c`.
    pub fn antisymmetric(c: f64) -> Self {
        Self([c, c, c, -c, -c, -c])
    }

    pub fn single(index: usize, current: f64) -> Self {
        let mut v = [0.0; COIL_COUNT];
        v[index] = current;
        Self(v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|c| c * s))
    }
}

impl std::ops::Add for CurrentVector {
    type Output = CurrentVector;
    fn add(self, o: CurrentVector) -> CurrentVector {
        CurrentVector(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

/// Field of a single circular filament of radius `loop_radius` in the plane `z = 0`.
pub fn loop_field(loop_radius: f64, current: f64, r: f64, z: f64) -> Result<FieldSample> {
    let a = loop_radius;
    let r = r.abs();
    let near_sq = (a - r) * (a - r) + z * z;
    if near_sq <= ON_FILAMENT_SQ {
        return Err(Error::SingularPoint { r, z });
    }
    let far_sq = (a + r) * (a + r) + z * z;
    let far = far_sq.sqrt();
    let m = 4.0 * a * r / far_sq;
    let (k, e) = ellip_ke(m);
    let prefactor = MU_0 * current / (2.0 * PI * far);

    let b_z = prefactor * (k + (a * a - r * r - z * z) / near_sq * e);
    let b_r = if r < AXIS_EPS {
        0.0
    } else if r < SMALL_R_RATIO * (a * a + z * z).sqrt() {
        let rho2 = a * a + z * z;
        3.0 * MU_0 * current * a * a * z * r / (4.0 * rho2 * rho2 * rho2.sqrt())
    } else {
        prefactor * z / r * (-k + (a * a + r * r + z * z) / near_sq * e)
    };
    Ok(FieldSample { b_r, b_z })
}

/// Field of a whole coil at radial distance `r` and axial offset `dz` from
/// its midplane, with the default 6 × 7 filament split.
pub fn coil_field(coil: &CoilSpec, current: f64, r: f64, dz: f64) -> Result<FieldSample> {
    coil_field_with(coil, Filaments::default(), current, r, dz)
}

pub fn coil_field_with(
    coil: &CoilSpec,
    filaments: Filaments,
    current: f64,
    r: f64,
    dz: f64,
) -> Result<FieldSample> {
    let r = r.abs();
    coil.check_clear(r, dz)?;
    if current == 0.0 {
        return Ok(FieldSample::default());
    }
    let (nr, nz) = (filaments.radial, filaments.axial);
    let width = coil.outer_radius - coil.inner_radius;
    let per_filament = current * f64::from(coil.turns) / (nr * nz) as f64;

    let mut total = FieldSample::default();
    for i in 0..nr {
        let a = coil.inner_radius + (i as f64 + 0.5) * width / nr as f64;
        for j in 0..nz {
            // Centred index keeps the filament rows exactly mirror-symmetric.
            let zf = (j as f64 + 0.5 - 0.5 * nz as f64) * coil.axial_length / nz as f64;
            total += loop_field(a, 1.0, r, dz - zf)?;
        }
    }
    Ok(total.scaled(per_filament))
}

/// Exact on-axis `B_z` of a uniform-current-density coil of rectangular
/// cross-section. Independent of the filament model.
pub fn coil_field_on_axis(coil: &CoilSpec, current: f64, dz: f64) -> f64 {
    let (r1, r2, len) = (coil.inner_radius, coil.outer_radius, coil.axial_length);
    let density = f64::from(coil.turns) * current / ((r2 - r1) * len);
    let term = |zeta: f64| {
        zeta * ((r2 + (r2 * r2 + zeta * zeta).sqrt()) / (r1 + (r1 * r1 + zeta * zeta).sqrt())).ln()
    };
    0.5 * MU_0 * density * (term(dz + 0.5 * len) - term(dz - 0.5 * len))
}

/// Anything that can report `(B_r, B_z)` at a cylindrical point.
pub trait FieldSource {
    fn field(&self, r: f64, z: f64) -> Result<FieldSample>;
}

/// The full stack under a given drive.
#[derive(Debug, Clone, Copy)]
pub struct StackDrive<'a> {
    pub stack: &'a CoilStack,
    pub currents: CurrentVector,
    pub filaments: Filaments,
}

impl<'a> StackDrive<'a> {
    pub fn new(stack: &'a CoilStack, currents: CurrentVector) -> Self {
        Self {
            stack,
            currents,
            filaments: Filaments::default(),
        }
    }
}

impl FieldSource for StackDrive<'_> {
    fn field(&self, r: f64, z: f64) -> Result<FieldSample> {
        let coil = &self.stack.coil;
        let mut total = FieldSample::default();
        for (center, &current) in self.stack.centers_z.iter().zip(&self.currents.0) {
            total += coil_field_with(coil, self.filaments, current, r, z - center)?;
        }
        Ok(total)
    }
}

/// One coil with its midplane at `center_z`.
#[derive(Debug, Clone, Copy)]
pub struct CoilDrive<'a> {
    pub coil: &'a CoilSpec,
    pub center_z: f64,
    pub current: f64,
    pub filaments: Filaments,
}

impl<'a> CoilDrive<'a> {
    pub fn new(coil: &'a CoilSpec, center_z: f64, current: f64) -> Self {
        Self {
            coil,
            center_z,
            current,
            filaments: Filaments::default(),
        }
    }
}

impl FieldSource for CoilDrive<'_> {
    fn field(&self, r: f64, z: f64) -> Result<FieldSample> {
        coil_field_with(self.coil, self.filaments, self.current, r, z - self.center_z)
    }
}

/// Superposed field of all six coils at `(r, z)`.
pub fn stack_field(
    stack: &CoilStack,
    currents: &CurrentVector,
    r: f64,
    z: f64,
) -> Result<FieldSample> {
    StackDrive::new(stack, *currents).field(r, z)
}

/// Central-difference `dB_z/dz` with step `h`.
pub fn gradient_z(source: &impl FieldSource, r: f64, z: f64, h: f64) -> Result<f64> {
    let above = source.field(r, z + h)?.b_z;
    let below = source.field(r, z - h)?.b_z;
    Ok((above - below) / (2.0 * h))
}

/// `dB_z/dz` of the stack field, T/m.
pub fn field_gradient_z(stack: &CoilStack, currents: &CurrentVector, r: f64, z: f64) -> Result<f64> {
    gradient_z(&StackDrive::new(stack, *currents), r, z, GRADIENT_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn loop_center_closed_form() {
        let f = loop_field(0.13, 1.6, 0.0, 0.0).unwrap();
        let expected = MU_0 * 1.6 / (2.0 * 0.13);
        assert!(rel(f.b_z, expected) < 1e-14);
        assert!((f.b_z - 7.7332e-6).abs() < 1e-9);
        assert_eq!(f.b_r, 0.0);
    }

    #[test]
    fn loop_on_axis_closed_form() {
        let (a, z) = (0.13, 0.13);
        let f = loop_field(a, 1.6, 0.0, z).unwrap();
        let expected = MU_0 * 1.6 * a * a / (2.0 * (a * a + z * z).powf(1.5));
        assert!(rel(f.b_z, expected) < 1e-14);
        assert!((f.b_z - 2.7341e-6).abs() < 1e-9);
    }

    #[test]
    fn loop_small_r_branch_is_continuous() {
        let (a, z) = (0.13_f64, 0.04_f64);
        let rho = (a * a + z * z).sqrt();
        let r = SMALL_R_RATIO * rho;
        let inner = loop_field(a, 1.0, r * (1.0 - 1e-9), z).unwrap();
        let outer = loop_field(a, 1.0, r * (1.0 + 1e-9), z).unwrap();
        assert!(rel(inner.b_r, outer.b_r) < 1e-6, "{inner:?} vs {outer:?}");
    }

    #[test]
    fn on_filament_is_singular() {
        assert!(matches!(
            loop_field(0.1, 1.0, 0.1, 0.0),
            Err(Error::SingularPoint { .. })
        ));
    }

    #[test]
    fn winding_exclusion() {
        let coil = CoilSpec::device();
        assert!(matches!(
            coil_field(&coil, 1.0, 0.1145, 0.0),
            Err(Error::InsideWinding { .. })
        ));
        assert!(matches!(
            coil_field(&coil, 1.0, 0.13, 0.0155),
            Err(Error::InsideWinding { .. })
        ));
        assert!(coil_field(&coil, 1.0, 0.113, 0.0).is_ok());
        assert!(coil_field(&coil, 1.0, 0.13, 0.0165).is_ok());
    }

    #[test]
    fn zero_current_gives_zero_field() {
        let coil = CoilSpec::device();
        let f = coil_field(&coil, 0.0, 0.05, 0.03).unwrap();
        assert_eq!(f, FieldSample::default());
        let s = stack_field(&CoilStack::device(), &CurrentVector::ZERO, 0.08, 0.1).unwrap();
        assert_eq!(s, FieldSample::default());
        assert_eq!(coil_field_on_axis(&coil, 0.0, 0.02), 0.0);
    }

    #[test]
    fn coil_mirror_symmetry() {
        let coil = CoilSpec::device();
        for &(r, dz) in &[(0.0, 0.03), (0.05, 0.02), (0.1, 0.07), (0.09, 0.2)] {
            let up = coil_field(&coil, 1.6, r, dz).unwrap();
            let down = coil_field(&coil, 1.6, r, -dz).unwrap();
            assert!(rel(up.b_z, down.b_z) < 1e-12);
            assert!((up.b_r + down.b_r).abs() <= 1e-12 * up.b_r.abs().max(1e-15));
        }
    }

    #[test]
    fn on_axis_far_field_decays_monotonically() {
        let coil = CoilSpec::device();
        let mut prev = f64::INFINITY;
        let mut dz = coil.axial_length;
        while dz < 2.0 {
            let b = coil_field_on_axis(&coil, 1.6, dz).abs();
            assert!(b < prev, "not decreasing at dz={dz}");
            assert_eq!(b, coil_field_on_axis(&coil, 1.6, -dz).abs());
            prev = b;
            dz += 0.01;
        }
        // Far away the coil looks like a loop of its mean radius.
        let a2: f64 = 0.13 * 0.13;
        let loop_ratio = ((a2 + 1.0) / (a2 + 4.0)).powf(1.5);
        let ratio = coil_field_on_axis(&coil, 1.6, 2.0) / coil_field_on_axis(&coil, 1.6, 1.0);
        assert!((ratio / loop_ratio - 1.0).abs() < 1e-3, "{ratio} vs {loop_ratio}");
    }

    #[test]
    fn filament_model_converges() {
        let coil = CoilSpec::device();
        let coarse = Filaments::default();
        for &(r, dz) in &[(0.0, 0.0), (0.05, 0.02), (0.105, 0.0), (0.09, 0.05), (0.03, 0.2)] {
            let a = coil_field_with(&coil, coarse, 1.6, r, dz).unwrap().b_z;
            let b = coil_field_with(&coil, coarse.doubled(), 1.6, r, dz).unwrap().b_z;
            assert!(rel(a, b) < 5e-3, "({r}, {dz}): {a} vs {b}");
        }
    }

    #[test]
    fn single_coil_midplane_gradient_vanishes() {
        let coil = CoilSpec::device();
        let drive = CoilDrive::new(&coil, 0.0, 1.6);
        let g = gradient_z(&drive, 0.0, 0.0, GRADIENT_STEP).unwrap();
        let scale = coil_field(&coil, 1.6, 0.0, 0.0).unwrap().b_z / coil.axial_length;
        assert!(g.abs() < 1e-10 * scale, "{g}");
    }

    #[test]
    fn gradient_richardson_agreement() {
        let stack = CoilStack::device();
        let drive = StackDrive::new(&stack, CurrentVector::antisymmetric(1.6));
        for &(r, z) in &[(0.0, 0.1125), (0.06, 0.09), (0.09, 0.15), (0.03, 0.02)] {
            let g1 = gradient_z(&drive, r, z, GRADIENT_STEP).unwrap();
            let g2 = gradient_z(&drive, r, z, 0.5 * GRADIENT_STEP).unwrap();
            assert!(rel(g1, g2) < 1e-3, "({r}, {z}): {g1} vs {g2}");
        }
    }

    #[test]
    fn antisymmetric_gradient_is_twice_one_triplet() {
        let stack = CoilStack::device();
        let full = field_gradient_z(&stack, &CurrentVector::antisymmetric(1.6), 0.0, 0.1125).unwrap();
        let lower = CurrentVector([1.6, 1.6, 1.6, 0.0, 0.0, 0.0]);
        let upper = CurrentVector([0.0, 0.0, 0.0, -1.6, -1.6, -1.6]);
        let gl = field_gradient_z(&stack, &lower, 0.0, 0.1125).unwrap();
        let gu = field_gradient_z(&stack, &upper, 0.0, 0.1125).unwrap();
        assert!(rel(gl, gu) < 1e-9);
        assert!(rel(full, 2.0 * gl) < 1e-9);
        // Positive current below and negative above both weaken B_z going up.
        assert!(full < 0.0);
    }

    #[test]
    fn device_stack_geometry() {
        let stack = CoilStack::device();
        stack.validate().unwrap();
        assert!((stack.midpoint() - STACK_MIDPOINT_Z).abs() < 1e-15);
        let (lo, hi) = stack.workspace_z();
        assert!((hi - lo - WORKSPACE_HEIGHT).abs() < 1e-12);
        assert!(stack.in_workspace(0.1, 0.1125));
        assert!(!stack.in_workspace(0.106, 0.1125));
        let mut bad = stack;
        bad.centers_z[4] += 0.001;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn current_bounds() {
        let coil = CoilSpec::device();
        assert!(CurrentVector::bounded([1.6, -1.6, 0.0, 0.0, 0.0, 0.0], &coil).is_ok());
        assert!(CurrentVector::bounded([1.7, 0.0, 0.0, 0.0, 0.0, 0.0], &coil).is_err());
        assert!(CurrentVector::bounded([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0], &coil).is_err());
    }
}
