use std::collections::BTreeMap;
use std::sync::OnceLock;

use langworld_core::corpus::{self, CorpusConfig};
use langworld_core::dcg::{infer, DEFAULT_REGULARIZATION};
use langworld_core::grammar::Grammar;
use langworld_core::pipeline::{benchmark, run, BenchmarkCase, Models, SiteLog};
use langworld_core::symbols::enumerate_grounding_space;
use langworld_core::world::DetectedObject;
use langworld_core::*;

fn registry() -> &'static ClassifierRegistry {
    static R: OnceLock<ClassifierRegistry> = OnceLock::new();
    R.get_or_init(ClassifierRegistry::default)
}

fn models() -> &'static Models {
    static M: OnceLock<Models> = OnceLock::new();
    M.get_or_init(|| {
        let c = corpus::generate(&CorpusConfig::from_registry(registry(), 7), registry()).unwrap();
        let (train, _) = corpus::split(&c, 0.8, 7).unwrap();
        corpus::train_models(&train, registry(), DEFAULT_REGULARIZATION)
            .unwrap()
            .0
    })
}

fn ground(text: &str, world: &WorldModel) -> Result<ObjectId, Error> {
    let tree = Grammar::new(registry()).parse_text(text)?;
    let space = enumerate_grounding_space(world, registry());
    let a = infer(&models().grounding, &tree, &space, Some(world))?;
    let actions: Vec<ObjectId> = a
        .root_symbols(&space)
        .into_iter()
        .filter_map(|s| match s.as_grounding() {
            Some(GroundingSymbol::NavigateTo(id)) => Some(*id),
            _ => None,
        })
        .collect();
    assert_eq!(actions.len(), 1);
    Ok(actions[0])
}

fn two_balls() -> WorldModel {
    let mut w = WorldModel::default();
    w.insert_object(DetectedObject::new(
        ObjectId(0),
        "ball",
        Pose::new(3.0, 0.0, 0.0),
    ));
    w.insert_object(DetectedObject::new(
        ObjectId(1),
        "ball",
        Pose::new(0.0, 1.0, 0.0),
    ));
    w.insert_object(DetectedObject::new(
        ObjectId(2),
        "cup",
        Pose::new(0.5, 0.5, 0.0),
    ));
    w
}

#[test]
fn nearest_and_farthest_ball() {
    assert_eq!(
        ground("go to the nearest ball", &two_balls()).unwrap(),
        ObjectId(1)
    );
    assert_eq!(
        ground("go to the farthest ball", &two_balls()).unwrap(),
        ObjectId(0)
    );
    assert_eq!(
        ground("walk to the closest ball", &two_balls()).unwrap(),
        ObjectId(1)
    );
}

#[test]
fn color_and_region_narrow_the_candidates() {
    let mut w = WorldModel::default();
    w.insert_object(
        DetectedObject::new(ObjectId(0), "ball", Pose::new(1.0, 0.0, 0.0))
            .with_color("red")
            .with_region(SceneLabel::Kitchen),
    );
    w.insert_object(
        DetectedObject::new(ObjectId(1), "ball", Pose::new(2.0, 0.0, 0.0))
            .with_color("blue")
            .with_region(SceneLabel::Hallway),
    );
    w.insert_object(
        DetectedObject::new(ObjectId(2), "ball", Pose::new(4.0, 0.0, 0.0))
            .with_color("blue")
            .with_region(SceneLabel::Kitchen),
    );
    assert_eq!(
        ground("go to the nearest blue ball", &w).unwrap(),
        ObjectId(1)
    );
    assert_eq!(
        ground("go to the nearest ball in the kitchen", &w).unwrap(),
        ObjectId(0)
    );
    assert_eq!(
        ground("go to the nearest blue ball in the kitchen", &w).unwrap(),
        ObjectId(2)
    );
}

#[test]
fn missing_target_is_reported() {
    assert!(matches!(
        ground("go to the nearest umbrella", &two_balls()),
        Err(Error::NoTargetObject)
    ));
}

#[test]
fn unknown_words_fail_before_grounding() {
    let site = SiteLog::simulate(&fixtures::site1(), registry()).unwrap();
    let r = run("paint the fence", &site, models(), registry(), Mode::OfAp);
    let e = r.error.unwrap();
    assert!(e.domain);
    assert!(e.message.contains("paint"), "{}", e.message);
    assert!(r.grounding.is_none());
}

#[test]
fn hallway_ball_on_site_one() {
    let site = SiteLog::simulate(&fixtures::site1(), registry()).unwrap();
    let text = "go to the nearest ball in the hallway";
    let b = run(text, &site, models(), registry(), Mode::B);
    let both = run(text, &site, models(), registry(), Mode::OfAp);
    assert_eq!(b.object_count, 37);
    assert_eq!(both.object_count, 1);
    assert_eq!(b.grounding_text(), both.grounding_text());
    let f = both.filter_decision.unwrap();
    assert_eq!(f.inferred_labels, [SceneLabel::Hallway].into());
    assert_eq!(f.kept.len(), 10);
    let selected = both.classifier_selection.unwrap().selected;
    assert!(selected.contains(&PerceptionSymbol::ObjectDetector("ball".into())));
    assert!(!selected.contains(&PerceptionSymbol::ObjectDetector("cup".into())));
}

#[test]
fn models_survive_a_save_and_load() {
    let dir = std::env::temp_dir().join(format!("langworld-models-{}", std::process::id()));
    models().save_dir(&dir).unwrap();
    let back = Models::load_dir(&dir).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(&back, models());
}

#[test]
fn benchmark_results_do_not_depend_on_thread_count() {
    let mut sites = BTreeMap::new();
    sites.insert(
        "site2".to_string(),
        SiteLog::simulate(&fixtures::site2(), registry()).unwrap(),
    );
    let cases = [
        BenchmarkCase::new("go to the farthest ball in the lab", "site2"),
        BenchmarkCase::new("go to the nearest keyboard in the office", "site2"),
    ];
    let one = benchmark(&cases, &sites, models(), registry(), 1);
    let many = benchmark(&cases, &sites, models(), registry(), 8);
    assert_eq!(one.to_csv(false), many.to_csv(false));
    assert_eq!(one.results.len(), 8);
}
