//! Built-in sites, reference worlds and the benchmark manifest.
//!
//! `site1` holds 37 detectable objects seen along a 60-observation trajectory
//! (hallway, kitchen, office); `site2` holds 36 objects seen along 50
//! observations (parking lot, office, laboratory, lounge). Rooms are far
//! enough apart that observations only see their own room, except for four
//! balls between the site-2 office and laboratory that both can see.

use std::collections::BTreeMap;

use crate::symbols::SceneLabel;
use crate::world::{
    ClassifierRegistry, CooccurrenceModel, DetectedObject, LatentObject, ObjectId, Pose,
    WorldModel, WorldSpec, SENSING_RANGE, WORLD_SPEC_SCHEMA,
};

/// [`BENCHMARK_CASES`] as a manifest file.
pub const DEFAULT_MANIFEST: &str = include_str!("../data/manifest.toml");

/// The six benchmark instructions and the site each one is run against.
pub const BENCHMARK_CASES: [(&str, &str); 6] = [
    ("go to the farthest umbrella in the hallway", "site1"),
    ("go to the nearest suitcase in the parking lot", "site2"),
    ("go to the farthest cup in the kitchen", "site1"),
    ("go to the nearest keyboard in the office", "site2"),
    ("go to the nearest ball in the hallway", "site1"),
    ("go to the farthest ball in the lab", "site2"),
];

pub fn default_cooccurrence() -> CooccurrenceModel {
    let rows: [(SceneLabel, &[(&str, f64)]); 8] = [
        (
            SceneLabel::Hallway,
            &[
                ("umbrella", 20.0),
                ("chair", 2.0),
                ("ball", 2.0),
                ("couch", 1.0),
            ],
        ),
        (
            SceneLabel::Kitchen,
            &[
                ("cup", 30.0),
                ("bottle", 25.0),
                ("chair", 10.0),
                ("couch", 3.0),
            ],
        ),
        (
            SceneLabel::Laboratory,
            &[
                ("ball", 20.0),
                ("keyboard", 8.0),
                ("laptop", 8.0),
                ("bottle", 3.0),
            ],
        ),
        (
            SceneLabel::Lounge,
            &[("couch", 20.0), ("chair", 8.0), ("cup", 4.0)],
        ),
        (
            SceneLabel::Office,
            &[
                ("keyboard", 25.0),
                ("laptop", 20.0),
                ("chair", 15.0),
                ("cup", 6.0),
                ("bottle", 3.0),
                ("suitcase", 2.0),
            ],
        ),
        (
            SceneLabel::ParkingLot,
            &[("car", 25.0), ("cone", 20.0), ("suitcase", 10.0)],
        ),
        (
            SceneLabel::Warehouse,
            &[
                ("suitcase", 2.0),
                ("cone", 2.0),
                ("chair", 6.0),
                ("couch", 2.0),
            ],
        ),
        (
            SceneLabel::Workshop,
            &[
                ("chair", 6.0),
                ("bottle", 4.0),
                ("laptop", 2.0),
                ("car", 2.0),
            ],
        ),
    ];
    let counts: BTreeMap<SceneLabel, BTreeMap<String, f64>> = rows
        .iter()
        .map(|(label, row)| {
            (
                *label,
                row.iter().map(|(c, n)| (c.to_string(), *n)).collect(),
            )
        })
        .collect();
    CooccurrenceModel {
        classes: [
            "ball", "cup", "umbrella", "suitcase", "keyboard", "cone", "bottle", "chair", "laptop",
            "couch", "car",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        non_characteristic: ["person".to_string()].into(),
        counts,
        prior: None,
    }
}

struct Builder {
    objects: Vec<LatentObject>,
    waypoints: Vec<Pose>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            objects: Vec::new(),
            waypoints: Vec::new(),
        }
    }

    fn object(&mut self, class: &str, color: &str, region: SceneLabel, x: f64, y: f64) {
        let id = self.objects.len() as u32;
        self.objects.push(LatentObject {
            id,
            class: class.to_string(),
            color: color.to_string(),
            region,
            x,
            y,
            theta: 0.0,
        });
    }

    /// `n` waypoints on a small circle around a room center.
    fn orbit(&mut self, cx: f64, cy: f64, radius: f64, n: usize) {
        for k in 0..n {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            self.waypoints
                .push(Pose::new(cx + radius * a.cos(), cy + radius * a.sin(), a));
        }
    }

    /// `n` waypoints on a short vertical segment.
    fn segment(&mut self, x: f64, y0: f64, y1: f64, n: usize) {
        for k in 0..n {
            let y = y0 + (y1 - y0) * k as f64 / (n - 1).max(1) as f64;
            self.waypoints
                .push(Pose::new(x, y, std::f64::consts::FRAC_PI_2));
        }
    }

    fn finish(self, name: &str, seed: u64) -> WorldSpec {
        WorldSpec {
            schema: WORLD_SPEC_SCHEMA,
            name: name.to_string(),
            seed,
            sensing_range: SENSING_RANGE,
            confusion_rate: 0.0,
            spurious_rate: 0.0,
            position_jitter: 0.0,
            waypoints: self.waypoints,
            objects: self.objects,
            cooccurrence: default_cooccurrence(),
        }
    }
}

const COLORS: [&str; 6] = ["red", "blue", "green", "yellow", "black", "white"];

/// Hallway, kitchen and office; 37 objects, 60 observations.
pub fn site1() -> WorldSpec {
    use SceneLabel::*;
    let mut b = Builder::new();

    // Hallway around (0, 0): 10 observations.
    b.object("umbrella", "black", Hallway, 1.0, 1.0);
    b.object("umbrella", "blue", Hallway, -1.5, 0.5);
    b.object("ball", "red", Hallway, 0.5, -1.5);
    b.object("person", "white", Hallway, -1.0, -1.0);
    for k in 0..10 {
        b.waypoints.push(Pose::new(-0.9 + 0.2 * k as f64, 0.1, 0.0));
    }

    // Kitchen around (20, 0): 29 objects on a 0.8 m lattice, 22 observations.
    let mut kitchen_classes = Vec::new();
    kitchen_classes.extend(["cup"; 9]);
    kitchen_classes.extend(["bottle"; 8]);
    kitchen_classes.extend(["chair"; 6]);
    kitchen_classes.extend(["person"; 4]);
    kitchen_classes.extend(["couch"; 2]);
    let mut cells = Vec::new();
    for i in -3i32..=3 {
        for j in -3i32..=3 {
            if i * i + j * j <= 9 {
                cells.push((i, j));
            }
        }
    }
    assert_eq!(cells.len(), kitchen_classes.len());
    // Interleave classes across the lattice so every part of the room mixes them.
    for (k, &(i, j)) in cells.iter().enumerate() {
        let class = kitchen_classes[(k * 7) % kitchen_classes.len()];
        let color = COLORS[k % COLORS.len()];
        b.object(class, color, Kitchen, 20.0 + 0.8 * i as f64, 0.8 * j as f64);
    }
    b.orbit(20.0, 0.0, 0.3, 22);

    // Office around (40, 0): 28 observations; the last one is the grounding pose.
    b.object("cup", "white", Office, 39.0, 1.0);
    b.object("cup", "red", Office, 41.0, -1.0);
    b.object("keyboard", "black", Office, 40.8, 0.9);
    b.object("laptop", "black", Office, 39.2, -0.8);
    b.orbit(40.0, 0.0, 0.4, 27);
    b.waypoints.push(Pose::new(40.3, 0.7, 0.0));

    b.finish("site1", 11)
}

/// Parking lot, office, laboratory and lounge; 36 objects, 50 observations.
pub fn site2() -> WorldSpec {
    use SceneLabel::*;
    let mut b = Builder::new();

    // Parking lot around (0, 0): 20 observations.
    b.object("suitcase", "black", ParkingLot, 1.0, 0.5);
    b.object("suitcase", "blue", ParkingLot, -1.0, -0.5);
    b.object("cone", "yellow", ParkingLot, 0.0, 1.5);
    b.orbit(0.0, 0.0, 0.3, 20);

    // Office: 25 objects on a 5x5 lattice around (19, 0), observed from x = 20.
    let mut office_classes = Vec::new();
    office_classes.extend(["keyboard"; 3]);
    office_classes.extend(["suitcase"; 1]);
    office_classes.extend(["laptop"; 6]);
    office_classes.extend(["chair"; 8]);
    office_classes.extend(["bottle"; 3]);
    office_classes.extend(["cup"; 2]);
    office_classes.extend(["person"; 2]);
    let mut k = 0;
    for i in -2i32..=2 {
        for j in -2i32..=2 {
            let class = office_classes[(k * 7) % office_classes.len()];
            let color = COLORS[(k + 1) % COLORS.len()];
            b.object(class, color, Office, 19.0 + 0.8 * i as f64, 0.8 * j as f64);
            k += 1;
        }
    }
    b.segment(20.0, -0.2, 0.2, 12);

    // Laboratory around (26, 0): seven balls, four of them near the office door.
    for (n, y) in [-1.2, -0.4, 0.4, 1.2].into_iter().enumerate() {
        b.object("ball", COLORS[n], Laboratory, 23.0, y);
    }
    for (n, y) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        b.object("ball", COLORS[n + 3], Laboratory, 28.0, y);
    }
    b.segment(26.0, -0.2, 0.2, 14);

    // Lounge around (40, 0): 4 observations; the last one is the grounding pose.
    b.object("couch", "green", Lounge, 40.5, 0.5);
    b.orbit(40.0, 0.0, 0.3, 3);
    b.waypoints.push(Pose::new(40.2, 0.3, 0.0));

    b.finish("site2", 22)
}

pub fn site(name: &str) -> Option<WorldSpec> {
    match name {
        "site1" => Some(site1()),
        "site2" => Some(site2()),
        _ => None,
    }
}

/// World used to resolve gold actions for the generated corpus: two objects
/// for every (class, region) pair, in different colors, at pairwise distinct
/// distances from the robot at the origin.
pub fn reference_world(registry: &ClassifierRegistry) -> WorldModel {
    let mut world = WorldModel::default();
    let colors = registry.colors();
    let mut id = 0;
    for (ri, region) in SceneLabel::ALL.into_iter().enumerate() {
        for (ci, class) in registry.classes().iter().enumerate() {
            for k in 0..2 {
                let color = &colors[(ci + ri + 3 * k) % colors.len()];
                let pose = Pose::new(30.0 * ri as f64 + k as f64, 2.0 * ci as f64, 0.0);
                world.insert_object(
                    DetectedObject::new(ObjectId(id), class, pose)
                        .with_color(color)
                        .with_region(region),
                );
                id += 1;
            }
        }
    }
    world
}

/// Small world whose object symbols give the grounding model negative
/// examples for per-object and per-action symbols during training.
pub fn training_world(registry: &ClassifierRegistry) -> WorldModel {
    let mut world = WorldModel::default();
    let colors = registry.colors();
    for (ci, class) in registry.classes().iter().enumerate() {
        let region = SceneLabel::ALL[ci % SceneLabel::ALL.len()];
        let pose = Pose::new(1.0 + ci as f64, (ci % 3) as f64, 0.0);
        world.insert_object(
            DetectedObject::new(ObjectId(ci as u32), class, pose)
                .with_color(&colors[ci % colors.len()])
                .with_region(region),
        );
    }
    world
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn fixture_sizes() {
        let s1 = site1();
        let s2 = site2();
        assert_eq!(s1.objects.len(), 37);
        assert_eq!(s1.waypoints.len(), 60);
        assert_eq!(s2.objects.len(), 36);
        assert_eq!(s2.waypoints.len(), 50);
        let reg = ClassifierRegistry::default();
        s1.validate(&reg).unwrap();
        s2.validate(&reg).unwrap();
        default_cooccurrence().validate().unwrap();
    }

    #[test]
    fn same_class_objects_are_separable() {
        for spec in [site1(), site2()] {
            for a in &spec.objects {
                for b in &spec.objects {
                    if a.id < b.id && a.class == b.class {
                        assert!(a.pose().distance(&b.pose()) > 0.5, "{a:?} {b:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn reference_world_distances_are_distinct() {
        let reg = ClassifierRegistry::default();
        let world = reference_world(&reg);
        assert_eq!(world.len(), 12 * 8 * 2);
        let d: BTreeSet<u64> = world
            .objects()
            .map(|o| o.pose.distance(&world.robot_pose).to_bits())
            .collect();
        assert_eq!(d.len(), world.len());
    }
}
