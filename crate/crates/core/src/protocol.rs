//! JSON messages of the live session channel.

use serde::{Deserialize, Serialize};

use crate::allocator::DutyVector;
use crate::magnetics::CurrentVector;
use crate::scan::Plane;
use crate::scene::{Scene, SceneObject, Texture};
use crate::simloop::{Command, LoopRecord};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetPosition {
        p: Vec3,
    },
    LoadScene {
        objects: Vec<SceneObject>,
    },
    SetParams {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stiffness: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        texture: Option<Texture>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
    },
    FieldSlice {
        plane: Plane,
        n: usize,
    },
}

impl ClientMessage {
    /// The loop command this message carries, if any. Field slices are
    /// answered directly and never reach the loop.
    pub fn into_command(self) -> Option<Command> {
        match self {
            Self::SetPosition { p } => Some(Command::SetPosition(p)),
            Self::LoadScene { objects } => Some(Command::LoadScene(Scene::new(objects))),
            Self::SetParams {
                stiffness,
                texture,
                tau,
            } => Some(Command::SetParams {
                stiffness,
                texture,
                tau,
            }),
            Self::FieldSlice { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub t: f64,
    pub finger: Vec3,
    pub f_desired: f64,
    pub f_achieved: f64,
    pub duty: DutyVector,
    pub currents: CurrentVector,
    pub contact: bool,
    pub infeasible: bool,
}

impl From<&LoopRecord> for StateMessage {
    fn from(r: &LoopRecord) -> Self {
        Self {
            t: r.t,
            finger: r.finger,
            f_desired: r.f_desired,
            f_achieved: r.f_achieved,
            duty: r.duties,
            currents: r.currents_actual,
            contact: r.in_contact,
            infeasible: r.infeasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateMessage),
    FieldSliceData { n: usize, values: Vec<f64> },
    Error { message: String },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}
