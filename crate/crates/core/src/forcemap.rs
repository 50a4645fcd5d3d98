//! Offline per-coil force tables and their `FMAP1` file format.
//!
//! All six coils are identical, so one table `g(r, dz)` of axial force per
//! ampere serves every coil: coil `i` reads it at `dz = z - centers_z[i]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{dipole_force_in, MagnetPose, MagnetSpec, MAGNET_CENTER_MAX_R};
use crate::magnetics::{CoilDrive, CoilSpec, CoilStack};

pub const MAGIC: &[u8; 6] = b"FMAP1\n";
pub const VERSION: u32 = 1;
/// Magic, version, r0, dr, nr, z0, dz_step, nz, moment.
pub const HEADER_LEN: usize = 6 + 4 + 8 + 8 + 4 + 8 + 8 + 4 + 8;

const NODE_SNAP: f64 = 1e-9;
const DOMAIN_EPS: f64 = 1e-12;

/// Node layout of a force table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r0: f64,
    pub dr: f64,
    pub nr: usize,
    pub z0: f64,
    pub dz_step: f64,
    pub nz: usize,
}

impl GridSpec {
    /// `r ∈ [0, 90 mm]`, `dz ∈ [-215, 215] mm`, both on a 5 mm step.
    pub const fn device() -> Self {
        Self {
            r0: 0.0,
            dr: 0.005,
            nr: 19,
            z0: -0.215,
            dz_step: 0.005,
            nz: 87,
        }
    }

    /// Same domain as [`GridSpec::device`] with custom steps. The axial range
    /// stays symmetric about the coil midplane.
    pub fn with_steps(dr: f64, dz_step: f64) -> Result<Self> {
        if !(dr > 0.0 && dz_step > 0.0 && dr.is_finite() && dz_step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid steps must be positive, got dr={dr}, dz={dz_step}"
            )));
        }
        let nr = (MAGNET_CENTER_MAX_R / dr + NODE_SNAP).floor() as usize + 1;
        let half = (0.215 / dz_step + NODE_SNAP).floor() as usize;
        Ok(Self {
            r0: 0.0,
            dr,
            nr,
            z0: -(half as f64) * dz_step,
            dz_step,
            nz: 2 * half + 1,
        })
    }

    pub fn r_at(&self, i: usize) -> f64 {
        self.r0 + i as f64 * self.dr
    }

    pub fn dz_at(&self, j: usize) -> f64 {
        self.z0 + j as f64 * self.dz_step
    }

    pub fn r_max(&self) -> f64 {
        self.r_at(self.nr - 1)
    }

    pub fn dz_max(&self) -> f64 {
        self.dz_at(self.nz - 1)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.dr > 0.0
            && self.dz_step > 0.0
            && self.nr >= 2
            && self.nz >= 2
            && self.r0.is_finite()
            && self.z0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid grid: {self:?}")))
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::device()
    }
}

/// Axial force per ampere (N/A) of one coil on the reference magnet,
/// sampled on a regular `(r, dz)` grid. Values are r-major, `dz` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceMapGrid {
    pub grid: GridSpec,
    pub magnet_moment: f64,
    pub values: Vec<f64>,
}

impl ForceMapGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nz + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bilinear `g(r, dz)`; exact at nodes.
    pub fn interpolate(&self, r: f64, dz: f64) -> Result<f64> {
        let g = &self.grid;
        let out = || Error::OutOfGrid { r, dz };
        let (i, tr) = locate(r, g.r0, g.dr, g.nr).ok_or_else(out)?;
        let (j, tz) = locate(dz, g.z0, g.dz_step, g.nz).ok_or_else(out)?;
        let i1 = (i + 1).min(g.nr - 1);
        let j1 = (j + 1).min(g.nz - 1);
        let lower = self.value(i, j) * (1.0 - tz) + self.value(i, j1) * tz;
        if tr == 0.0 {
            return Ok(lower);
        }
        let upper = self.value(i1, j) * (1.0 - tz) + self.value(i1, j1) * tz;
        Ok(lower * (1.0 - tr) + upper * tr)
    }

    /// `g` of coil `index` for a magnet at `(r, z)` in stack coordinates.
    ///
    /// Offsets beyond the table's axial range count as zero authority; a
    /// radius outside the table is an error.
    pub fn coil_g(&self, stack: &CoilStack, index: usize, r: f64, z: f64) -> Result<f64> {
        let dz = z - stack.centers_z[index];
        if dz < self.grid.z0 - DOMAIN_EPS || dz > self.grid.dz_max() + DOMAIN_EPS {
            if locate(r, self.grid.r0, self.grid.dr, self.grid.nr).is_none() {
                return Err(Error::OutOfGrid { r, dz });
            }
            return Ok(0.0);
        }
        self.interpolate(r, dz)
    }

    /// Encodes the map as `FMAP1` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&g.r0.to_le_bytes());
        out.extend_from_slice(&g.dr.to_le_bytes());
        out.extend_from_slice(&(g.nr as u32).to_le_bytes());
        out.extend_from_slice(&g.z0.to_le_bytes());
        out.extend_from_slice(&g.dz_step.to_le_bytes());
        out.extend_from_slice(&(g.nz as u32).to_le_bytes());
        out.extend_from_slice(&self.magnet_moment.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + 4 {
            return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..6] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut rd = Reader { buf: bytes, pos: 6 };
        let version = rd.u32();
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let r0 = rd.f64();
        let dr = rd.f64();
        let nr = rd.u32() as usize;
        let z0 = rd.f64();
        let dz_step = rd.f64();
        let nz = rd.u32() as usize;
        let magnet_moment = rd.f64();

        let count = nr
            .checked_mul(nz)
            .ok_or_else(|| Error::Format("grid size overflow".into()))?;
        let expected = count
            .checked_mul(8)
            .and_then(|n| n.checked_add(HEADER_LEN + 4))
            .ok_or_else(|| Error::Format("grid size overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} bytes for a {nr}x{nz} grid, found {}",
                bytes.len()
            )));
        }
        let body = &bytes[..expected - 4];
        let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::Format(format!(
                "checksum mismatch (stored {stored:#010x}, computed {actual:#010x})"
            )));
        }
        let values = (0..count).map(|_| rd.f64()).collect();
        let grid = GridSpec {
            r0,
            dr,
            nr,
            z0,
            dz_step,
            nz,
        };
        grid.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self {
            grid,
            magnet_moment,
            values,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.buf[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

/// Cell index and fractional offset of `x` on a regular axis.
fn locate(x: f64, start: f64, step: f64, n: usize) -> Option<(usize, f64)> {
    if !x.is_finite() {
        return None;
    }
    let mut u = (x - start) / step;
    let last = (n - 1) as f64;
    if u < -NODE_SNAP || u > last + NODE_SNAP {
        return None;
    }
    if (u - u.round()).abs() < NODE_SNAP {
        u = u.round();
    }
    let u = u.clamp(0.0, last);
    let i = (u.floor() as usize).min(n - 2);
    Some((i, u - i as f64))
}

/// Tabulates `g(r, dz)` for one coil at 1 A with the dipole force model.
pub fn build_map(coil: &CoilSpec, magnet: &MagnetSpec, grid: GridSpec) -> Result<ForceMapGrid> {
    grid.validate()?;
    let drive = CoilDrive::new(coil, 0.0, 1.0);
    let mut values = Vec::with_capacity(grid.nr * grid.nz);
    for i in 0..grid.nr {
        let r = grid.r_at(i);
        for j in 0..grid.nz {
            let pose = MagnetPose::at(r, grid.dz_at(j));
            values.push(dipole_force_in(magnet, &pose, &drive)?);
        }
    }
    Ok(ForceMapGrid {
        grid,
        magnet_moment: magnet.moment(),
        values,
    })
}

/// Bilinear interpolation of the per-ampere force table.
pub fn interpolate_g(map: &ForceMapGrid, r: f64, dz: f64) -> Result<f64> {
    map.interpolate(r, dz)
}

pub fn save_map(map: &ForceMapGrid, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, map.to_bytes())?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<ForceMapGrid> {
    ForceMapGrid::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::device_map;

    #[test]
    fn grid_steps() {
        assert_eq!(GridSpec::with_steps(0.005, 0.005).unwrap(), GridSpec::device());
        let fine = GridSpec::with_steps(0.0025, 0.0025).unwrap();
        assert_eq!((fine.nr, fine.nz), (37, 173));
        assert!(GridSpec::with_steps(0.0, 0.005).is_err());
    }

    #[test]
    fn midplane_row_is_zero() {
        let map = device_map();
        let mid = map.grid.nz / 2;
        assert!(map.grid.dz_at(mid).abs() < 1e-15);
        for i in 0..map.grid.nr {
            assert!(map.value(i, mid).abs() < 1e-12, "r index {i}");
        }
    }

    #[test]
    fn stored_values_are_antisymmetric() {
        let map = device_map();
        let nz = map.grid.nz;
        for i in 0..map.grid.nr {
            for j in 0..nz / 2 {
                let (a, b) = (map.value(i, j), map.value(i, nz - 1 - j));
                assert!((a + b).abs() <= 1e-9, "({i}, {j}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let again = build_map(&CoilSpec::device(), &MagnetSpec::n35(), GridSpec::device()).unwrap();
        let a: Vec<u64> = device_map().values.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = again.values.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn nodes_are_exact() {
        let map = device_map();
        for &(i, j) in &[(0, 0), (3, 17), (18, 86), (10, 43), (7, 60)] {
            let v = map.interpolate(map.grid.r_at(i), map.grid.dz_at(j)).unwrap();
            assert_eq!(v.to_bits(), map.value(i, j).to_bits(), "node ({i}, {j})");
        }
    }

    #[test]
    fn cell_center_is_corner_mean() {
        let map = device_map();
        for &(i, j) in &[(0, 0), (5, 50), (17, 85), (12, 30)] {
            let r = map.grid.r_at(i) + 0.5 * map.grid.dr;
            let dz = map.grid.dz_at(j) + 0.5 * map.grid.dz_step;
            let mean = 0.25
                * (map.value(i, j) + map.value(i + 1, j) + map.value(i, j + 1) + map.value(i + 1, j + 1));
            let v = map.interpolate(r, dz).unwrap();
            assert!((v - mean).abs() < 1e-14, "{v} vs {mean}");
        }
    }

    #[test]
    fn outside_domain_is_rejected() {
        let map = device_map();
        assert!(matches!(map.interpolate(0.091, 0.0), Err(Error::OutOfGrid { .. })));
        assert!(matches!(map.interpolate(-0.001, 0.0), Err(Error::OutOfGrid { .. })));
        assert!(matches!(map.interpolate(0.05, 0.22), Err(Error::OutOfGrid { .. })));
        assert!(map.interpolate(0.09, 0.215).is_ok());
        assert!(map.interpolate(0.0, -0.215).is_ok());
    }

    #[test]
    fn coil_g_beyond_axial_range_is_zero() {
        let map = device_map();
        let stack = CoilStack::device();
        assert_eq!(map.coil_g(&stack, 0, 0.0, 0.40).unwrap(), 0.0);
        assert!(map.coil_g(&stack, 5, 0.0, 0.40).unwrap() != 0.0);
        assert!(map.coil_g(&stack, 0, 0.10, 0.40).is_err());
    }

    #[test]
    fn byte_layout() {
        let map = device_map();
        let bytes = map.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 19 * 87 + 4);
        assert_eq!(&bytes[..6], b"FMAP1\n");
        assert_eq!(&bytes[6..10], &1u32.to_le_bytes());
        assert_eq!(&bytes[26..30], &19u32.to_le_bytes());
        assert_eq!(&bytes[46..50], &87u32.to_le_bytes());
        let first = f64::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 8].try_into().unwrap());
        assert_eq!(first.to_bits(), map.value(0, 0).to_bits());
    }

    #[test]
    fn rejects_truncated_and_corrupted() {
        let bytes = device_map().to_bytes();
        assert!(matches!(
            ForceMapGrid::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        assert!(matches!(ForceMapGrid::from_bytes(&bytes[..20]), Err(Error::Format(_))));

        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 100] ^= 0x01;
        let err = ForceMapGrid::from_bytes(&flipped).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(ForceMapGrid::from_bytes(&magic), Err(Error::Format(_))));

        let mut version = bytes;
        version[6] = 2;
        assert!(matches!(ForceMapGrid::from_bytes(&version), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.fmap");
        save_map(device_map(), &path).unwrap();
        let loaded = load_map(&path).unwrap();
        assert_eq!(loaded.to_bytes(), device_map().to_bytes());
        assert!(matches!(load_map(dir.path().join("missing")), Err(Error::Io(_))));
    }
}
