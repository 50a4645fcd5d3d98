//! Inverts the force model `F_z = Σ g_i · D_i · I_m` for the six duties.
//!
//! Coils are recruited nearest-first along Z. Each recruited coil is driven
//! as hard as the remaining force needs, saturating before the next coil is
//! brought in, so the fewest coils carry current.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcemap::ForceMapGrid;
use crate::magnetics::{CoilStack, CurrentVector, COIL_COUNT};
use crate::vec3::Vec3;

/// Default force tolerance, N.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Coils with less authority than this (N/A) are never recruited.
pub const MIN_AUTHORITY: f64 = 1e-6;

/// Signed PWM duty cycles D1..D6 in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DutyVector(pub [f64; COIL_COUNT]);

impl DutyVector {
    pub const ZERO: DutyVector = DutyVector([0.0; COIL_COUNT]);

    pub fn new(duties: [f64; COIL_COUNT]) -> Result<Self> {
        if duties.iter().all(|d| d.is_finite() && d.abs() <= 1.0) {
            Ok(Self(duties))
        } else {
            Err(Error::InvalidInput(format!("duties must lie in [-1, 1]: {duties:?}")))
        }
    }

    pub fn currents(&self, max_current: f64) -> CurrentVector {
        CurrentVector(self.0.map(|d| d * max_current))
    }

    pub fn from_currents(currents: &CurrentVector, max_current: f64) -> Self {
        Self(currents.0.map(|c| (c / max_current).clamp(-1.0, 1.0)))
    }

    pub fn nonzero(&self) -> usize {
        self.0.iter().filter(|d| **d != 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub duties: DutyVector,
    /// Force predicted by the table for `duties`, N.
    pub achieved: f64,
    /// Requested minus achieved, N.
    pub residual: f64,
    pub coils_used: usize,
}

/// Per-coil `g_i` (N/A) for a magnet at `position`.
pub fn authorities(
    position: Vec3,
    map: &ForceMapGrid,
    stack: &CoilStack,
) -> Result<[f64; COIL_COUNT]> {
    let r = position.radial();
    let mut g = [0.0; COIL_COUNT];
    for (i, slot) in g.iter_mut().enumerate() {
        *slot = map.coil_g(stack, i, r, position.z)?;
    }
    Ok(g)
}

/// Coil indices ordered by axial distance to `z`, nearest first; ties go to
/// the lower index.
pub fn priority_order(stack: &CoilStack, z: f64) -> [usize; COIL_COUNT] {
    // Distances are compared at nanometre resolution so that coils placed
    // symmetrically about `z` tie despite rounding in their centres.
    let key = |i: usize| ((stack.centers_z[i] - z).abs() * 1e9).round();
    let mut order: [usize; COIL_COUNT] = std::array::from_fn(|i| i);
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    order
}

/// Table-predicted axial force for `duties` at `position`, N.
pub fn forward_force(
    duties: &DutyVector,
    position: Vec3,
    map: &ForceMapGrid,
    stack: &CoilStack,
) -> Result<f64> {
    let g = authorities(position, map, stack)?;
    Ok(force_from(&g, duties, stack.coil.max_current))
}

fn force_from(g: &[f64; COIL_COUNT], duties: &DutyVector, max_current: f64) -> f64 {
    g.iter().zip(&duties.0).map(|(g, d)| g * d * max_current).sum()
}

/// Symmetric feasible force interval `(F_min, F_max)` at `position`.
pub fn capacity(position: Vec3, map: &ForceMapGrid, stack: &CoilStack) -> Result<(f64, f64)> {
    let g = authorities(position, map, stack)?;
    let f_max = g.iter().map(|g| g.abs() * stack.coil.max_current).sum::<f64>();
    Ok((-f_max, f_max))
}

/// Every coil saturated in the direction that pushes `+Z`.
pub fn saturated_duties(position: Vec3, map: &ForceMapGrid, stack: &CoilStack) -> Result<DutyVector> {
    let g = authorities(position, map, stack)?;
    Ok(DutyVector(g.map(|g| if g < 0.0 { -1.0 } else { 1.0 })))
}

/// Greedy nearest-first allocation of `f_desired` (N).
///
/// Fails with [`Error::Infeasible`] carrying the best-effort (fully
/// saturated) duties when the coils run out before the residual drops below
/// `tol`.
pub fn allocate(
    f_desired: f64,
    position: Vec3,
    map: &ForceMapGrid,
    stack: &CoilStack,
    tol: f64,
) -> Result<AllocationResult> {
    if !f_desired.is_finite() {
        return Err(Error::InvalidInput(format!("desired force {f_desired} is not finite")));
    }
    let g = authorities(position, map, stack)?;
    let max_current = stack.coil.max_current;
    let mut duties = [0.0; COIL_COUNT];
    let mut residual = f_desired;

    for i in priority_order(stack, position.z) {
        if residual.abs() <= tol {
            break;
        }
        if g[i].abs() < MIN_AUTHORITY {
            continue;
        }
        let current = (residual / g[i]).clamp(-max_current, max_current);
        duties[i] = current / max_current;
        residual -= g[i] * current;
    }

    let duties = DutyVector(duties);
    let achieved = force_from(&g, &duties, max_current);
    let residual = f_desired - achieved;
    if residual.abs() > tol {
        return Err(Error::Infeasible { residual, duties });
    }
    Ok(AllocationResult {
        duties,
        achieved,
        residual,
        coils_used: duties.nonzero(),
    })
}
