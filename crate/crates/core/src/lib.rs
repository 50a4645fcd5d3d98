//! Simulation core of a six-coil contactless magnetic haptic display.
//!
//! A fingertip-worn disk magnet moves inside a stack of six air-core disk
//! electromagnets. This crate models the stack's field, the axial force on
//! the magnet, the offline per-coil force tables, the real-time inversion of
//! desired force into coil duty cycles, virtual-object contact, and the
//! closed haptic loop that ties them together.

pub mod allocator;
pub mod elliptic;
pub mod error;
pub mod forcemap;
pub mod frame;
pub mod magnet;
pub mod magnetics;
pub mod protocol;
pub mod scan;
pub mod scene;
pub mod simloop;
pub mod vec3;

pub use allocator::{allocate, capacity, forward_force, AllocationResult, DutyVector};
pub use error::{Error, Result};
pub use forcemap::{build_map, interpolate_g, load_map, save_map, ForceMapGrid, GridSpec};
pub use magnet::{dipole_force_z, volumetric_force_z, MagnetPose, MagnetSpec};
pub use magnetics::{stack_field, CoilSpec, CoilStack, CurrentVector, FieldSample};
pub use scene::{SceneObject, Shape, Texture};
pub use simloop::{LoopConfig, LoopRecord, Simulator};
pub use vec3::Vec3;
