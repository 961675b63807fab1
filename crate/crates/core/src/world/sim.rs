use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{scene_classify, CooccurrenceModel, SceneScores};
use super::{ClassifierRegistry, Observation, Pose, RawDetection, SENSING_RANGE};
use crate::symbols::SceneLabel;
use crate::Error;

pub const WORLD_SPEC_SCHEMA: u32 = 1;

/// A ground-truth object of the simulated site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentObject {
    pub id: u32,
    pub class: String,
    pub color: String,
    pub region: SceneLabel,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

impl LatentObject {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.theta)
    }
}

fn default_range() -> f64 {
    SENSING_RANGE
}

/// Everything needed to replay a site deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub schema: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_range")]
    pub sensing_range: f64,
    /// Probability that a detection reports a uniformly drawn class (and,
    /// independently, color) instead of the true one.
    #[serde(default)]
    pub confusion_rate: f64,
    /// Per-observation probability of one spurious, noise-flagged return.
    #[serde(default)]
    pub spurious_rate: f64,
    /// Half-width of the uniform jitter added to relative positions.
    #[serde(default)]
    pub position_jitter: f64,
    pub waypoints: Vec<Pose>,
    pub objects: Vec<LatentObject>,
    pub cooccurrence: CooccurrenceModel,
}

impl WorldSpec {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        WorldSpec::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        let spec: WorldSpec = toml::from_str(text).map_err(|e| Error::Format {
            what: "world spec",
            message: e.to_string(),
        })?;
        if spec.schema != WORLD_SPEC_SCHEMA {
            return Err(Error::UnsupportedSchema {
                what: "world spec",
                found: spec.schema,
                expected: WORLD_SPEC_SCHEMA,
            });
        }
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("world spec serializes")
    }

    pub fn validate(&self, registry: &ClassifierRegistry) -> Result<(), Error> {
        let invalid = |m: String| Err(Error::InvalidSpec(m));
        if self.schema != WORLD_SPEC_SCHEMA {
            return invalid(format!("unsupported schema {}", self.schema));
        }
        if self.waypoints.is_empty() {
            return invalid("trajectory has no waypoints".into());
        }
        if !(self.sensing_range.is_finite() && self.sensing_range > 0.0) {
            return invalid(format!(
                "sensing range {} must be positive",
                self.sensing_range
            ));
        }
        for (name, rate) in [
            ("confusion_rate", self.confusion_rate),
            ("spurious_rate", self.spurious_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return invalid(format!("{name} {rate} outside [0, 1]"));
            }
        }
        if !(self.position_jitter.is_finite() && self.position_jitter >= 0.0) {
            return invalid("position_jitter must be non-negative".into());
        }
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return invalid(format!("duplicate latent object id {}", o.id));
            }
            if !registry.has_class(&o.class) {
                return invalid(format!("object {} has unknown class {}", o.id, o.class));
            }
            if !registry.has_color(&o.color) {
                return invalid(format!("object {} has unknown color {}", o.id, o.color));
            }
            if !(o.x.is_finite() && o.y.is_finite()) {
                return invalid(format!("object {} has a non-finite pose", o.id));
            }
        }
        self.cooccurrence.validate()
    }
}

/// Drives the robot along the trajectory and emits one labeled observation
/// per waypoint. Deterministic given `spec.seed`.
pub fn simulate(
    spec: &WorldSpec,
    registry: &ClassifierRegistry,
) -> Result<Vec<Observation>, Error> {
    spec.validate(registry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut objects: Vec<&LatentObject> = spec.objects.iter().collect();
    objects.sort_by_key(|o| o.id);

    let mut out: Vec<Observation> = Vec::with_capacity(spec.waypoints.len());
    for (t, robot) in spec.waypoints.iter().enumerate() {
        let mut sensed = Vec::new();
        for o in &objects {
            if robot.distance(&o.pose()) > spec.sensing_range {
                continue;
            }
            let mut relative = robot.relative(&o.pose());
            if spec.position_jitter > 0.0 {
                let j = spec.position_jitter;
                relative.x += rng.random_range(-j..=j);
                relative.y += rng.random_range(-j..=j);
            }
            let class = confuse(&mut rng, spec.confusion_rate, &o.class, registry.classes());
            let color = confuse(&mut rng, spec.confusion_rate, &o.color, registry.colors());
            sensed.push(RawDetection {
                latent: Some(o.id),
                relative,
                class,
                color,
                noisy: false,
            });
        }
        if spec.spurious_rate > 0.0 && rng.random::<f64>() < spec.spurious_rate {
            let r = spec.sensing_range * rng.random::<f64>().sqrt();
            let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            sensed.push(RawDetection {
                latent: None,
                relative: Pose::new(r * a.cos(), r * a.sin(), 0.0),
                class: pick(&mut rng, registry.classes()),
                color: pick(&mut rng, registry.colors()),
                noisy: true,
            });
        }

        let mut obs = Observation {
            t: t as u32,
            robot_pose: *robot,
            sensed,
            scene_label: SceneLabel::Hallway,
            scene_scores: SceneScores::default(),
        };
        let (label, scores) = scene_classify(&obs, &spec.cooccurrence, out.last());
        obs.scene_label = label;
        obs.scene_scores = scores;
        out.push(obs);
    }
    Ok(out)
}

fn confuse(rng: &mut ChaCha8Rng, rate: f64, truth: &str, vocabulary: &[String]) -> String {
    if rate > 0.0 && rng.random::<f64>() < rate {
        pick(rng, vocabulary)
    } else {
        truth.to_string()
    }
}

fn pick(rng: &mut ChaCha8Rng, vocabulary: &[String]) -> String {
    vocabulary[rng.random_range(0..vocabulary.len())].clone()
}
