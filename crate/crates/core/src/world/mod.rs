//! Simulated environment and world-model construction.
//!
//! A [`WorldSpec`] holds the latent objects of a site, the robot trajectory
//! and the scene co-occurrence table. [`simulate`] turns it into a replayable
//! stream of [`Observation`]s, each already labeled by the scene classifier.
//! [`build_world_model`] then runs a chosen subset of perceptual classifiers
//! over a chosen subset of observations and charges every invocation to a
//! cost ledger.

mod log;
mod model;
mod registry;
mod scene;
mod sim;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use log::{read_observation_log, write_observation_log, OBSERVATION_LOG_VERSION};
pub use model::{
    build_world_model, dedup_detections, run_classifier, ClassifierRun, DetectedObject, Detection,
    LedgerEntry, WorldModel, DEDUP_RADIUS,
};
pub use registry::{ClassifierRegistry, CostModel, REGISTRY_SCHEMA};
pub use scene::{scene_classify, CooccurrenceModel, SceneScores};
pub use sim::{simulate, LatentObject, WorldSpec, WORLD_SPEC_SCHEMA};

/// Sensing range of the simulated RGB-D pipeline, in meters.
pub const SENSING_RANGE: f64 = 3.5;

/// Planar pose in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Expresses a world-frame pose in this pose's frame.
    pub fn relative(&self, world: &Pose) -> Pose {
        let (s, c) = self.theta.sin_cos();
        let dx = world.x - self.x;
        let dy = world.y - self.y;
        Pose {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            theta: world.theta - self.theta,
        }
    }

    /// Inverse of [`Pose::relative`].
    pub fn compose(&self, local: &Pose) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: self.x + c * local.x - s * local.y,
            y: self.y + s * local.x + c * local.y,
            theta: self.theta + local.theta,
        }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Identifier of an object in a [`WorldModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.0)
    }
}

impl FromStr for ObjectId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(ObjectId)
    }
}

/// Observation identifier; equal to the observation's timestamp.
pub type ObservationId = u32;

/// One detection as produced by the always-on sensing front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    /// Ground-truth source; `None` for spurious returns. Only used for
    /// auditing, never by inference.
    pub latent: Option<u32>,
    pub relative: Pose,
    pub class: String,
    pub color: String,
    #[serde(default)]
    pub noisy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: ObservationId,
    pub robot_pose: Pose,
    pub sensed: Vec<RawDetection>,
    pub scene_label: crate::SceneLabel,
    pub scene_scores: SceneScores,
}

impl Observation {
    pub fn id(&self) -> ObservationId {
        self.t
    }
}
