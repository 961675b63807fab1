use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{ClassifierRegistry, ObjectId, Observation, ObservationId, Pose, RawDetection};
use crate::symbols::{PerceptionSymbol, SceneLabel};
use crate::Error;

/// Detections of the same apparent class closer than this are one object.
pub const DEDUP_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub id: ObjectId,
    pub class: String,
    pub color: Option<String>,
    pub pose: Pose,
    pub region: SceneLabel,
    pub provenance: BTreeSet<ObservationId>,
    /// Number of detections merged into this object.
    pub sightings: usize,
    /// Ground-truth sources of the merged detections; audit only.
    #[serde(default)]
    pub latent_ids: BTreeSet<u32>,
    #[serde(default)]
    color_votes: BTreeMap<String, usize>,
    #[serde(default)]
    region_votes: BTreeMap<SceneLabel, usize>,
}

impl DetectedObject {
    pub fn new(id: ObjectId, class: &str, pose: Pose) -> Self {
        DetectedObject {
            id,
            class: class.to_string(),
            color: None,
            pose,
            region: SceneLabel::Hallway,
            provenance: BTreeSet::new(),
            sightings: 1,
            latent_ids: BTreeSet::new(),
            color_votes: BTreeMap::new(),
            region_votes: [(SceneLabel::Hallway, 1)].into(),
        }
    }

    pub fn with_color(mut self, color: &str) -> Self {
        self.color = Some(color.to_string());
        self.color_votes = [(color.to_string(), self.sightings)].into();
        self
    }

    pub fn with_region(mut self, region: SceneLabel) -> Self {
        self.region = region;
        self.region_votes = [(region, self.sightings)].into();
        self
    }

    /// Same class and within the dedup radius.
    pub fn matches(&self, other: &DetectedObject) -> bool {
        self.class == other.class && self.pose.distance(&other.pose) <= DEDUP_RADIUS + 1e-9
    }
}

/// One charged classifier invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub classifier: PerceptionSymbol,
    pub items: usize,
    pub cost: f64,
}

/// The detected-object set together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldModel {
    objects: BTreeMap<ObjectId, DetectedObject>,
    pub built_from: BTreeSet<ObservationId>,
    pub classifiers_used: BTreeSet<PerceptionSymbol>,
    pub total_cost: f64,
    pub ledger: Vec<LedgerEntry>,
    /// Robot pose at grounding time; reference point for nearest/farthest.
    pub robot_pose: Pose,
}

impl WorldModel {
    pub fn objects(&self) -> impl Iterator<Item = &DetectedObject> {
        self.objects.values()
    }

    pub fn object(&self, id: ObjectId) -> Option<&DetectedObject> {
        self.objects.get(&id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Inserts or replaces an object by id.
    pub fn insert_object(&mut self, object: DetectedObject) {
        self.objects.insert(object.id, object);
    }

    pub fn with_robot_pose(mut self, pose: Pose) -> Self {
        self.robot_pose = pose;
        self
    }

    /// True when every object of `self` has a counterpart in `other`.
    pub fn objects_subset_of(&self, other: &WorldModel) -> bool {
        self.objects()
            .all(|o| other.objects().any(|p| p.matches(o)))
    }

    fn next_id(&self) -> u32 {
        self.objects.keys().next_back().map_or(0, |id| id.0 + 1)
    }
}

/// Intermediate product of the perception pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub observation: ObservationId,
    pub scene_label: SceneLabel,
    pub robot_pose: Pose,
    pub raw: RawDetection,
    pub color: Option<String>,
    pub has_bbox: bool,
    pub world_pose: Option<Pose>,
}

impl Detection {
    fn from_raw(obs: &Observation, raw: &RawDetection) -> Self {
        Detection {
            observation: obs.t,
            scene_label: obs.scene_label,
            robot_pose: obs.robot_pose,
            raw: raw.clone(),
            color: None,
            has_bbox: false,
            world_pose: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierRun {
    pub detections: Vec<Detection>,
    /// `None` when there was nothing to process and the classifier was not invoked.
    pub entry: Option<LedgerEntry>,
}

impl ClassifierRun {
    pub fn cost(&self) -> f64 {
        self.entry.as_ref().map_or(0.0, |e| e.cost)
    }
}

/// Runs one classifier over a set of observations.
///
/// An object detector returns the raw detections of its class; the other
/// stages process every raw detection. Either way the charge is
/// `base + per_item * raw detections scanned`, and nothing is charged for an
/// empty observation set.
pub fn run_classifier(
    registry: &ClassifierRegistry,
    classifier: &PerceptionSymbol,
    observations: &[&Observation],
) -> Result<ClassifierRun, Error> {
    let cost = registry.cost(classifier)?;
    if observations.is_empty() {
        return Ok(ClassifierRun {
            detections: Vec::new(),
            entry: None,
        });
    }
    let scanned: usize = observations.iter().map(|o| o.sensed.len()).sum();
    let entry = Some(LedgerEntry {
        classifier: classifier.clone(),
        items: scanned,
        cost: cost.charge(scanned),
    });
    let all = observations
        .iter()
        .flat_map(|o| o.sensed.iter().map(move |r| Detection::from_raw(o, r)));
    let detections = match classifier {
        PerceptionSymbol::ObjectDetector(class) => all.filter(|d| &d.raw.class == class).collect(),
        other => {
            let mut ds: Vec<Detection> = all.collect();
            apply_stage(other, &mut ds);
            ds
        }
    };
    Ok(ClassifierRun { detections, entry })
}

fn apply_stage(stage: &PerceptionSymbol, detections: &mut Vec<Detection>) {
    match stage {
        PerceptionSymbol::ObjectDetector(_) => {}
        PerceptionSymbol::NoiseFilter => detections.retain(|d| !d.raw.noisy),
        PerceptionSymbol::ColorDetector(color) => {
            for d in detections.iter_mut() {
                if &d.raw.color == color {
                    d.color = Some(color.clone());
                }
            }
        }
        PerceptionSymbol::BboxEstimator => {
            for d in detections.iter_mut() {
                d.has_bbox = true;
            }
        }
        PerceptionSymbol::PoseEstimator => {
            for d in detections.iter_mut() {
                d.world_pose = Some(d.robot_pose.compose(&d.raw.relative));
            }
        }
    }
}

fn run_stage(
    registry: &ClassifierRegistry,
    stage: &PerceptionSymbol,
    detections: &mut Vec<Detection>,
    ledger: &mut Vec<LedgerEntry>,
) -> Result<(), Error> {
    let cost = registry.cost(stage)?;
    if detections.is_empty() {
        return Ok(());
    }
    ledger.push(LedgerEntry {
        classifier: stage.clone(),
        items: detections.len(),
        cost: cost.charge(detections.len()),
    });
    apply_stage(stage, detections);
    Ok(())
}

/// Builds a world model from `observations` using only `classifiers`,
/// merging the result into `prior`.
///
/// Detectors run over the observations; the noise, color, bbox and pose
/// stages then run over the detector output. Detections become objects only
/// when the noise filter and both geometry stages ran.
pub fn build_world_model(
    observations: &[&Observation],
    classifiers: &BTreeSet<PerceptionSymbol>,
    prior: &WorldModel,
    registry: &ClassifierRegistry,
) -> Result<WorldModel, Error> {
    for c in classifiers {
        if !registry.contains(c) {
            return Err(Error::UnknownClassifier(c.canonical()));
        }
    }
    if classifiers.is_empty() {
        return Ok(prior.clone());
    }

    let mut ordered: Vec<&PerceptionSymbol> = classifiers.iter().collect();
    ordered.sort_by_key(|c| c.canonical());

    let mut ledger = Vec::new();
    let mut detections = Vec::new();
    for c in ordered
        .iter()
        .filter(|c| matches!(c, PerceptionSymbol::ObjectDetector(_)))
    {
        let run = run_classifier(registry, c, observations)?;
        ledger.extend(run.entry);
        detections.extend(run.detections);
    }
    let has = |s: &PerceptionSymbol| classifiers.contains(s);
    if has(&PerceptionSymbol::NoiseFilter) {
        run_stage(
            registry,
            &PerceptionSymbol::NoiseFilter,
            &mut detections,
            &mut ledger,
        )?;
    }
    for c in ordered
        .iter()
        .filter(|c| matches!(c, PerceptionSymbol::ColorDetector(_)))
    {
        run_stage(registry, c, &mut detections, &mut ledger)?;
    }
    for stage in [
        PerceptionSymbol::BboxEstimator,
        PerceptionSymbol::PoseEstimator,
    ] {
        if has(&stage) {
            run_stage(registry, &stage, &mut detections, &mut ledger)?;
        }
    }

    let forms_objects = PerceptionSymbol::structural().iter().all(has);
    let usable: Vec<Detection> = if forms_objects {
        detections
            .into_iter()
            .filter(|d| d.has_bbox && d.world_pose.is_some())
            .collect()
    } else {
        Vec::new()
    };

    let mut world = merge(prior, &usable);
    world.built_from.extend(observations.iter().map(|o| o.t));
    world.classifiers_used.extend(classifiers.iter().cloned());
    world.total_cost += ledger.iter().map(|e| e.cost).sum::<f64>();
    world.ledger.extend(ledger);
    Ok(world)
}

struct Member {
    class: String,
    x: f64,
    y: f64,
    weight: usize,
}

/// Single-linkage clustering of same-class points within [`DEDUP_RADIUS`].
///
/// Returns, for every point, the index of the lowest-indexed point of its
/// cluster.
pub fn dedup_detections(points: &[(&str, f64, f64)]) -> Vec<usize> {
    let cell = |v: f64| (v / DEDUP_RADIUS).floor() as i64;
    let mut grid: HashMap<(&str, i64, i64), Vec<usize>> = HashMap::new();
    for (k, &(class, x, y)) in points.iter().enumerate() {
        grid.entry((class, cell(x), cell(y))).or_default().push(k);
    }
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut k: usize) -> usize {
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    for (k, &(class, x, y)) in points.iter().enumerate() {
        let (cx, cy) = (cell(x), cell(y));
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(class, cx + dx, cy + dy)) else {
                    continue;
                };
                for &m in bucket {
                    if m <= k {
                        continue;
                    }
                    let (_, mx, my) = points[m];
                    if (x - mx).hypot(y - my) <= DEDUP_RADIUS {
                        let (a, b) = (find(&mut parent, k), find(&mut parent, m));
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        parent[hi] = lo;
                    }
                }
            }
        }
    }
    (0..points.len()).map(|k| find(&mut parent, k)).collect()
}

fn merge(prior: &WorldModel, detections: &[Detection]) -> WorldModel {
    let prior_objects: Vec<&DetectedObject> = prior.objects().collect();
    let mut members: Vec<Member> = prior_objects
        .iter()
        .map(|o| Member {
            class: o.class.clone(),
            x: o.pose.x,
            y: o.pose.y,
            weight: o.sightings.max(1),
        })
        .collect();
    for d in detections {
        let p = d.world_pose.expect("usable detections carry a pose");
        members.push(Member {
            class: d.raw.class.clone(),
            x: p.x,
            y: p.y,
            weight: 1,
        });
    }
    let points: Vec<(&str, f64, f64)> = members
        .iter()
        .map(|m| (m.class.as_str(), m.x, m.y))
        .collect();
    let roots = dedup_detections(&points);

    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, r) in roots.into_iter().enumerate() {
        clusters.entry(r).or_default().push(k);
    }

    let n_prior = prior_objects.len();
    let mut fresh: Vec<DetectedObject> = Vec::new();
    let mut world = WorldModel {
        objects: BTreeMap::new(),
        built_from: prior.built_from.clone(),
        classifiers_used: prior.classifiers_used.clone(),
        total_cost: prior.total_cost,
        ledger: prior.ledger.clone(),
        robot_pose: prior.robot_pose,
    };
    for indices in clusters.values() {
        let total: usize = indices.iter().map(|&k| members[k].weight).sum();
        let cx = indices
            .iter()
            .map(|&k| members[k].x * members[k].weight as f64)
            .sum::<f64>()
            / total as f64;
        let cy = indices
            .iter()
            .map(|&k| members[k].y * members[k].weight as f64)
            .sum::<f64>()
            / total as f64;
        let mut obj = DetectedObject {
            id: ObjectId(u32::MAX),
            class: members[indices[0]].class.clone(),
            color: None,
            pose: Pose::new(cx, cy, 0.0),
            region: SceneLabel::Hallway,
            provenance: BTreeSet::new(),
            sightings: total,
            latent_ids: BTreeSet::new(),
            color_votes: BTreeMap::new(),
            region_votes: BTreeMap::new(),
        };
        for &k in indices {
            if k < n_prior {
                let p = prior_objects[k];
                obj.id = obj.id.min(p.id);
                obj.provenance.extend(p.provenance.iter().copied());
                obj.latent_ids.extend(p.latent_ids.iter().copied());
                for (c, n) in &p.color_votes {
                    *obj.color_votes.entry(c.clone()).or_default() += n;
                }
                for (l, n) in &p.region_votes {
                    *obj.region_votes.entry(*l).or_default() += n;
                }
            } else {
                let d = &detections[k - n_prior];
                obj.provenance.insert(d.observation);
                obj.latent_ids.extend(d.raw.latent);
                if let Some(c) = &d.color {
                    *obj.color_votes.entry(c.clone()).or_default() += 1;
                }
                *obj.region_votes.entry(d.scene_label).or_default() += 1;
            }
        }
        obj.color = majority(&obj.color_votes).cloned();
        obj.region = majority(&obj.region_votes)
            .copied()
            .unwrap_or(SceneLabel::Hallway);
        if obj.id.0 == u32::MAX {
            fresh.push(obj);
        } else {
            world.objects.insert(obj.id, obj);
        }
    }

    fresh.sort_by(|a, b| {
        a.class
            .cmp(&b.class)
            .then(a.pose.x.total_cmp(&b.pose.x))
            .then(a.pose.y.total_cmp(&b.pose.y))
    });
    for (next, mut obj) in (prior.next_id()..).zip(fresh) {
        obj.id = ObjectId(next);
        world.objects.insert(obj.id, obj);
    }
    world
}

/// Most frequent key; ties go to the smallest key.
fn majority<K: Ord>(votes: &BTreeMap<K, usize>) -> Option<&K> {
    let mut best: Option<(&K, usize)> = None;
    for (k, &n) in votes {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((k, n));
        }
    }
    best.map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::SceneScores;

    fn raw(class: &str, rel: (f64, f64)) -> RawDetection {
        RawDetection {
            latent: None,
            relative: Pose::new(rel.0, rel.1, 0.0),
            class: class.into(),
            color: "red".into(),
            noisy: false,
        }
    }

    fn obs(t: u32, robot: Pose, sensed: Vec<RawDetection>) -> Observation {
        Observation {
            t,
            robot_pose: robot,
            sensed,
            scene_label: SceneLabel::Laboratory,
            scene_scores: SceneScores::default(),
        }
    }

    fn all_classifiers(reg: &ClassifierRegistry) -> BTreeSet<PerceptionSymbol> {
        reg.classifiers().into_iter().collect()
    }

    #[test]
    fn detector_cost_counts_every_scanned_detection() {
        let reg = ClassifierRegistry::default();
        let mut sensed: Vec<RawDetection> = (0..3).map(|k| raw("ball", (k as f64, 0.0))).collect();
        sensed.extend((0..5).map(|k| raw("cup", (0.0, k as f64))));
        let o = obs(0, Pose::default(), sensed);
        let det = PerceptionSymbol::ObjectDetector("ball".into());
        let run = run_classifier(&reg, &det, &[&o]).unwrap();
        assert_eq!(run.detections.len(), 3);
        let c = reg.cost(&det).unwrap();
        assert!((run.cost() - (c.base_cost + 8.0 * c.per_item_cost)).abs() < 1e-12);
    }

    #[test]
    fn empty_observation_set_is_free() {
        let reg = ClassifierRegistry::default();
        let det = PerceptionSymbol::ObjectDetector("ball".into());
        let run = run_classifier(&reg, &det, &[]).unwrap();
        assert!(run.detections.is_empty());
        assert_eq!(run.cost(), 0.0);
        assert!(run.entry.is_none());
    }

    #[test]
    fn unknown_classifier_is_an_error() {
        let reg = ClassifierRegistry::default();
        let det = PerceptionSymbol::ObjectDetector("giraffe".into());
        assert!(matches!(
            run_classifier(&reg, &det, &[]),
            Err(Error::UnknownClassifier(_))
        ));
        let set: BTreeSet<_> = [det].into();
        assert!(matches!(
            build_world_model(&[], &set, &WorldModel::default(), &reg),
            Err(Error::UnknownClassifier(_))
        ));
    }

    #[test]
    fn one_ball_from_three_waypoints_is_one_object() {
        let reg = ClassifierRegistry::default();
        let ball = Pose::new(2.0, 1.0, 0.0);
        let robots = [
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(1.0, 0.0, 0.5),
            Pose::new(3.0, 2.0, -2.0),
        ];
        let observations: Vec<Observation> = robots
            .iter()
            .enumerate()
            .map(|(t, r)| {
                let rel = r.relative(&ball);
                obs(t as u32, *r, vec![raw("ball", (rel.x, rel.y))])
            })
            .collect();
        let refs: Vec<&Observation> = observations.iter().collect();
        let world =
            build_world_model(&refs, &all_classifiers(&reg), &WorldModel::default(), &reg).unwrap();
        assert_eq!(world.len(), 1);
        let o = world.objects().next().unwrap();
        assert_eq!(o.provenance.len(), 3);
        assert_eq!(o.sightings, 3);
        assert!(o.pose.distance(&ball) < 1e-9);
        assert_eq!(o.color.as_deref(), Some("red"));
        assert_eq!(o.region, SceneLabel::Laboratory);
    }

    #[test]
    fn no_classifiers_returns_prior() {
        let reg = ClassifierRegistry::default();
        let mut prior = WorldModel::default();
        prior.insert_object(DetectedObject::new(
            ObjectId(4),
            "cup",
            Pose::new(1.0, 1.0, 0.0),
        ));
        let o = obs(0, Pose::default(), vec![raw("ball", (1.0, 0.0))]);
        let world = build_world_model(&[&o], &BTreeSet::new(), &prior, &reg).unwrap();
        assert_eq!(world, prior);
        assert_eq!(world.total_cost, 0.0);
    }

    #[test]
    fn objects_need_the_structural_stages() {
        let reg = ClassifierRegistry::default();
        let o = obs(0, Pose::default(), vec![raw("ball", (1.0, 0.0))]);
        let mut set: BTreeSet<PerceptionSymbol> = [
            PerceptionSymbol::ObjectDetector("ball".into()),
            PerceptionSymbol::BboxEstimator,
            PerceptionSymbol::PoseEstimator,
        ]
        .into();
        let world = build_world_model(&[&o], &set, &WorldModel::default(), &reg).unwrap();
        assert!(world.is_empty());
        assert!(world.total_cost > 0.0);
        set.insert(PerceptionSymbol::NoiseFilter);
        let world = build_world_model(&[&o], &set, &WorldModel::default(), &reg).unwrap();
        assert_eq!(world.len(), 1);
        assert_eq!(world.objects().next().unwrap().color, None);
    }

    #[test]
    fn noise_filter_drops_flagged_detections() {
        let reg = ClassifierRegistry::default();
        let mut noisy = raw("ball", (2.0, 0.0));
        noisy.noisy = true;
        let o = obs(0, Pose::default(), vec![raw("ball", (1.0, 0.0)), noisy]);
        let world =
            build_world_model(&[&o], &all_classifiers(&reg), &WorldModel::default(), &reg).unwrap();
        assert_eq!(world.len(), 1);
    }

    #[test]
    fn ledger_is_additive() {
        let reg = ClassifierRegistry::default();
        let o1 = obs(
            0,
            Pose::default(),
            vec![raw("ball", (1.0, 0.0)), raw("cup", (0.0, 1.0))],
        );
        let o2 = obs(1, Pose::new(1.0, 0.0, 0.0), vec![raw("ball", (0.0, 0.0))]);
        let world = build_world_model(
            &[&o1, &o2],
            &all_classifiers(&reg),
            &WorldModel::default(),
            &reg,
        )
        .unwrap();
        let sum: f64 = world.ledger.iter().map(|e| e.cost).sum();
        assert!((world.total_cost - sum).abs() < 1e-9);
        // 12 detectors + noise + 6 colors + bbox + pose
        assert_eq!(world.ledger.len(), 21);
        assert_eq!(world.len(), 2);
    }

    #[test]
    fn merging_into_prior_keeps_ids() {
        let reg = ClassifierRegistry::default();
        let mut prior = WorldModel::default();
        prior.insert_object(
            DetectedObject::new(ObjectId(9), "ball", Pose::new(1.2, 0.0, 0.0))
                .with_region(SceneLabel::Laboratory),
        );
        let o = obs(
            0,
            Pose::default(),
            vec![raw("ball", (1.0, 0.0)), raw("cup", (0.0, 1.0))],
        );
        let world = build_world_model(&[&o], &all_classifiers(&reg), &prior, &reg).unwrap();
        assert_eq!(world.len(), 2);
        let ball = world.object(ObjectId(9)).unwrap();
        assert_eq!(ball.sightings, 2);
        assert!((ball.pose.x - 1.1).abs() < 1e-9);
        assert!(world.object(ObjectId(10)).is_some());
    }

    fn naive_clusters(points: &[(&str, f64, f64)]) -> Vec<usize> {
        let n = points.len();
        let mut label: Vec<usize> = (0..n).collect();
        loop {
            let mut changed = false;
            for a in 0..n {
                for b in 0..n {
                    let (ca, xa, ya) = points[a];
                    let (cb, xb, yb) = points[b];
                    if ca == cb && (xa - xb).hypot(ya - yb) <= DEDUP_RADIUS && label[b] < label[a] {
                        label[a] = label[b];
                        changed = true;
                    }
                }
            }
            if !changed {
                return label;
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn grid_clustering_matches_pairwise_oracle(
            pts in proptest::collection::vec((0usize..3, -3.0f64..3.0, -3.0f64..3.0), 0..60)
        ) {
            let classes = ["ball", "cup", "cone"];
            let points: Vec<(&str, f64, f64)> = pts.iter().map(|&(c, x, y)| (classes[c], x, y)).collect();
            proptest::prop_assert_eq!(dedup_detections(&points), naive_clusters(&points));
        }
    }
}
