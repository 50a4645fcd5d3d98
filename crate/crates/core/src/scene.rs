//! Virtual objects and the penalty force law the loop renders.
//!
//! Contact is detected with exact signed distance functions. Penetration
//! depth times stiffness along the surface normal gives the force vector;
//! only its Z component can be produced by the device. Surface textures
//! perturb the top-facing surfaces with a small relief field.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

pub const DEFAULT_STIFFNESS: f64 = 300.0;
pub const DEFAULT_TEXTURE_GAIN: f64 = 0.0005;
pub const DEFAULT_SIZE: f64 = 0.100;

/// Step for the SDF gradient used as the contact normal.
pub const NORMAL_STEP: f64 = 1e-4;

const WOOD_PERIOD: f64 = 0.008;
const WOOD_AMPLITUDE: f64 = 0.3;
const STEEL_LATTICE: f64 = 0.012;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { diameter: f64 },
    /// Axis-aligned cube.
    Cube { edge: f64 },
    /// Capped cylinder with its axis along Z.
    Cylinder { diameter: f64, length: f64 },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { diameter } => diameter > 0.0,
            Shape::Cube { edge } => edge > 0.0,
            Shape::Cylinder { diameter, length } => diameter > 0.0 && length > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("object size must be positive: {self:?}")))
        }
    }

    /// Signed distance from `p`, relative to the shape centre.
    fn sdf(&self, p: Vec3) -> f64 {
        match *self {
            Shape::Sphere { diameter } => p.norm() - 0.5 * diameter,
            Shape::Cube { edge } => {
                let q = p.abs() - Vec3::new(0.5 * edge, 0.5 * edge, 0.5 * edge);
                q.max_scalar(0.0).norm() + q.max_component().min(0.0)
            }
            Shape::Cylinder { diameter, length } => {
                let dr = p.radial() - 0.5 * diameter;
                let dz = p.z.abs() - 0.5 * length;
                dr.max(dz).min(0.0) + dr.max(0.0).hypot(dz.max(0.0))
            }
        }
    }
}

/// Surface finish levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Texture {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "L1_glass")]
    Glass,
    #[serde(rename = "L2_wood")]
    Wood,
    #[serde(rename = "L3_steel")]
    Steel,
}

impl Texture {
    /// Unitless relief in `[-1, 1]` at lateral position `(x, y)`.
    pub fn height(self, x: f64, y: f64) -> f64 {
        match self {
            Texture::None | Texture::Glass => 0.0,
            Texture::Wood => (2.0 * PI * x / WOOD_PERIOD).sin() * WOOD_AMPLITUDE,
            Texture::Steel => {
                let phase = (x / STEEL_LATTICE + y / STEEL_LATTICE).rem_euclid(1.0) - 0.5;
                (1.0 - phase * phase * 8.0).max(0.0)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Texture::None => "none",
            Texture::Glass => "L1_glass",
            Texture::Wood => "L2_wood",
            Texture::Steel => "L3_steel",
        }
    }
}

impl std::str::FromStr for Texture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Texture::None),
            "L1_glass" | "L1" => Ok(Texture::Glass),
            "L2_wood" | "L2" => Ok(Texture::Wood),
            "L3_steel" | "L3" => Ok(Texture::Steel),
            other => Err(Error::InvalidInput(format!("unknown texture {other:?}"))),
        }
    }
}

pub fn texture_height(level: Texture, x: f64, y: f64) -> f64 {
    level.height(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawObject", into = "RawObject")]
pub struct SceneObject {
    pub shape: Shape,
    pub center: Vec3,
    /// N/m.
    pub stiffness: f64,
    pub texture: Texture,
    /// Relief amplitude, m.
    pub texture_gain: f64,
}

impl SceneObject {
    pub fn new(shape: Shape, center: Vec3) -> Self {
        Self {
            shape,
            center,
            stiffness: DEFAULT_STIFFNESS,
            texture: Texture::None,
            texture_gain: DEFAULT_TEXTURE_GAIN,
        }
    }

    pub fn sphere(center: Vec3) -> Self {
        Self::new(Shape::Sphere { diameter: DEFAULT_SIZE }, center)
    }

    pub fn cube(center: Vec3) -> Self {
        Self::new(Shape::Cube { edge: DEFAULT_SIZE }, center)
    }

    pub fn cylinder(center: Vec3) -> Self {
        Self::new(
            Shape::Cylinder {
                diameter: DEFAULT_SIZE,
                length: DEFAULT_SIZE,
            },
            center,
        )
    }

    pub fn with_texture(mut self, texture: Texture) -> Self {
        self.texture = texture;
        self
    }

    pub fn with_stiffness(mut self, stiffness: f64) -> Self {
        self.stiffness = stiffness;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "stiffness must be positive, got {}",
                self.stiffness
            )));
        }
        if !(self.texture_gain >= 0.0 && self.texture_gain.is_finite() && self.center.is_finite()) {
            return Err(Error::InvalidInput("texture gain and centre must be finite".into()));
        }
        Ok(())
    }

    pub fn sdf(&self, p: Vec3) -> f64 {
        self.shape.sdf(p - self.center)
    }

    /// Unit outward normal from the central-difference SDF gradient.
    pub fn normal(&self, p: Vec3) -> Vec3 {
        let h = NORMAL_STEP;
        let d = |dx: Vec3| self.sdf(p + dx) - self.sdf(p - dx);
        Vec3::new(
            d(Vec3::new(h, 0.0, 0.0)),
            d(Vec3::new(0.0, h, 0.0)),
            d(Vec3::new(0.0, 0.0, h)),
        )
        .normalized()
        .unwrap_or(Vec3::Z)
    }
}

// Wire form: `{"kind":"sphere","center":[..],"size":0.1,...}`, with
// `"size":[diameter, length]` for cylinders.
#[derive(Serialize, Deserialize)]
struct RawObject {
    kind: RawKind,
    center: Vec3,
    #[serde(default)]
    size: Option<RawSize>,
    #[serde(default)]
    stiffness: Option<f64>,
    #[serde(default)]
    texture: Option<Texture>,
    #[serde(default)]
    texture_gain: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Sphere,
    Cube,
    Cylinder,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSize {
    Scalar(f64),
    Pair([f64; 2]),
}

impl TryFrom<RawObject> for SceneObject {
    type Error = Error;

    fn try_from(raw: RawObject) -> Result<Self> {
        let shape = match (raw.kind, raw.size) {
            (RawKind::Sphere, None) => Shape::Sphere { diameter: DEFAULT_SIZE },
            (RawKind::Sphere, Some(RawSize::Scalar(d))) => Shape::Sphere { diameter: d },
            (RawKind::Cube, None) => Shape::Cube { edge: DEFAULT_SIZE },
            (RawKind::Cube, Some(RawSize::Scalar(e))) => Shape::Cube { edge: e },
            (RawKind::Cylinder, None) => Shape::Cylinder {
                diameter: DEFAULT_SIZE,
                length: DEFAULT_SIZE,
            },
            (RawKind::Cylinder, Some(RawSize::Scalar(d))) => Shape::Cylinder {
                diameter: d,
                length: d,
            },
            (RawKind::Cylinder, Some(RawSize::Pair([d, l]))) => Shape::Cylinder {
                diameter: d,
                length: l,
            },
            (_, Some(RawSize::Pair(_))) => {
                return Err(Error::InvalidInput(
                    "only cylinders take a [diameter, length] size".into(),
                ))
            }
        };
        let object = SceneObject {
            shape,
            center: raw.center,
            stiffness: raw.stiffness.unwrap_or(DEFAULT_STIFFNESS),
            texture: raw.texture.unwrap_or_default(),
            texture_gain: raw.texture_gain.unwrap_or(DEFAULT_TEXTURE_GAIN),
        };
        object.validate()?;
        Ok(object)
    }
}

impl From<SceneObject> for RawObject {
    fn from(o: SceneObject) -> Self {
        let (kind, size) = match o.shape {
            Shape::Sphere { diameter } => (RawKind::Sphere, RawSize::Scalar(diameter)),
            Shape::Cube { edge } => (RawKind::Cube, RawSize::Scalar(edge)),
            Shape::Cylinder { diameter, length } => {
                (RawKind::Cylinder, RawSize::Pair([diameter, length]))
            }
        };
        RawObject {
            kind,
            center: o.center,
            size: Some(size),
            stiffness: Some(o.stiffness),
            texture: Some(o.texture),
            texture_gain: Some(o.texture_gain),
        }
    }
}

/// The set of objects the finger can touch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>) -> Self {
        Self { objects }
    }

    /// A 100 mm sphere on the axis whose top pole sits 5 mm above P1.
    pub fn demo() -> Self {
        Self::new(vec![SceneObject::sphere(Vec3::new(0.0, 0.0, 0.0675))])
    }

    /// Accepts a bare object list or `{"objects": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            List(Vec<SceneObject>),
            Wrapped { objects: Vec<SceneObject> },
        }
        let objects = match serde_json::from_str::<Doc>(text) {
            Ok(Doc::List(objects) | Doc::Wrapped { objects }) => objects,
            // Re-parse as a list to surface a useful error message.
            Err(_) => serde_json::from_str::<Vec<SceneObject>>(text)?,
        };
        let scene = Self::new(objects);
        for object in &scene.objects {
            object.validate()?;
        }
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn contact(&self, point: Vec3) -> ContactState {
        contact_force(&self.objects, point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub in_contact: bool,
    /// Penetration below the (textured) surface, m.
    pub depth: f64,
    pub normal: Vec3,
    /// Axial force to render, N.
    pub f_desired_z: f64,
}

impl ContactState {
    pub const FREE: ContactState = ContactState {
        in_contact: false,
        depth: 0.0,
        normal: Vec3::Z,
        f_desired_z: 0.0,
    };
}

pub fn sdf(object: &SceneObject, point: Vec3) -> f64 {
    object.sdf(point)
}

/// Penalty contact against the nearest object.
///
/// Texture relief raises or lowers the surface by `gain · h(x, y)`, weighted
/// by how much the surface faces +Z, so the effective depth stays
/// continuous across the contact boundary.
pub fn contact_force(objects: &[SceneObject], point: Vec3) -> ContactState {
    let Some((object, distance)) = objects
        .iter()
        .map(|o| (o, o.sdf(point)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
    else {
        return ContactState::FREE;
    };
    let normal = object.normal(point);
    let facing_up = normal.z.max(0.0);
    let relief = object.texture_gain * object.texture.height(point.x, point.y) * facing_up;
    let depth = -distance + relief;
    if depth.is_nan() || depth <= 0.0 {
        return ContactState {
            normal,
            ..ContactState::FREE
        };
    }
    ContactState {
        in_contact: true,
        depth,
        normal,
        f_desired_z: object.stiffness * depth * normal.z,
    }
}
