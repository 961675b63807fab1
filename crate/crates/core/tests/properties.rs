use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use langworld_core::adapt::filter_observations;
use langworld_core::corpus::{self, CorpusConfig, CorpusExample};
use langworld_core::dcg::{
    extract_features, infer_joint_oracle_given_children, infer_unresolved, resolve_constraints,
    DcgModel,
};
use langworld_core::grammar::{dump_tree, load_tree, Grammar};
use langworld_core::pipeline::SiteLog;
use langworld_core::symbols::{enumerate_perception_space, enumerate_semantic_space};
use langworld_core::world::{build_world_model, dedup_detections};
use langworld_core::*;

fn registry() -> &'static ClassifierRegistry {
    static R: OnceLock<ClassifierRegistry> = OnceLock::new();
    R.get_or_init(ClassifierRegistry::default)
}

fn corpus() -> &'static [CorpusExample] {
    static C: OnceLock<Vec<CorpusExample>> = OnceLock::new();
    C.get_or_init(|| {
        corpus::generate(&CorpusConfig::from_registry(registry(), 7), registry()).unwrap()
    })
}

fn sites() -> &'static [SiteLog] {
    static S: OnceLock<Vec<SiteLog>> = OnceLock::new();
    S.get_or_init(|| {
        [fixtures::site1(), fixtures::site2()]
            .iter()
            .map(|s| SiteLog::simulate(s, registry()).unwrap())
            .collect()
    })
}

/// Uniform weights on every feature the tree and space can fire.
fn random_model(tree: &ParseTree, space: &SymbolSpace, seed: u64, scale: f64) -> DcgModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DcgModel::new(space.domain(), 0.0);
    let every: Vec<&Symbol> = space.symbols().iter().collect();
    for p in tree.phrases() {
        for s in space.symbols() {
            for children in [&every[..], &[]] {
                for name in extract_features(p, s, children, None).names() {
                    m.weights
                        .entry(name.to_string())
                        .or_insert_with(|| rng.random_range(-scale..scale));
                }
            }
        }
    }
    m
}

fn space_for(n: usize) -> SymbolSpace {
    if n.is_multiple_of(2) {
        enumerate_semantic_space()
    } else {
        enumerate_perception_space(registry()).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_scaling_keeps_the_assignment(n in 0usize..500, seed: u64, c in 0.01f64..100.0) {
        let tree = &corpus()[n].parse;
        let space = space_for(n);
        let m = random_model(tree, &space, seed, 2.0);
        let mut scaled = m.clone();
        scaled.weights.values_mut().for_each(|w| *w *= c);
        let a = infer_unresolved(&m, tree, &space, None).unwrap();
        let b = infer_unresolved(&scaled, tree, &space, None).unwrap();
        prop_assert!(a.same_values(&b));
    }

    #[test]
    fn inference_is_deterministic_and_counts_factors(n in 0usize..500, seed: u64) {
        let tree = &corpus()[n].parse;
        let space = space_for(n);
        let m = random_model(tree, &space, seed, 1.0);
        let a = infer_unresolved(&m, tree, &space, None).unwrap();
        let b = infer_unresolved(&m, tree, &space, None).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.factor_evaluations, tree.len() * space.len());
    }

    #[test]
    fn thresholding_maximizes_each_row_given_children(n in 0usize..500, seed: u64) {
        let tree = &corpus()[n].parse;
        let base = space_for(n);
        let k = (16 / tree.len()).max(1);
        let space = SymbolSpace::new(base.domain(), base.symbols()[..k.min(base.len())].to_vec()).unwrap();
        let m = random_model(tree, &space, seed, 3.0);
        let greedy = infer_unresolved(&m, tree, &space, None).unwrap();
        let oracle = infer_joint_oracle_given_children(&m, tree, &space, None, &greedy).unwrap();
        prop_assert!(oracle.same_values(&greedy));
    }

    #[test]
    fn world_models_shrink_with_their_inputs(site in 0usize..2, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = &sites()[site].observations;
        let all: BTreeSet<PerceptionSymbol> = registry().classifiers().into_iter().collect();
        let every: Vec<&Observation> = log.iter().collect();
        let full = build_world_model(&every, &all, &WorldModel::default(), registry()).unwrap();
        let obs: Vec<&Observation> = every.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let mut cls: BTreeSet<PerceptionSymbol> = all.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        cls.extend(PerceptionSymbol::structural());
        let sub = build_world_model(&obs, &cls, &WorldModel::default(), registry()).unwrap();
        prop_assert!(sub.objects_subset_of(&full));
        prop_assert!(sub.total_cost <= full.total_cost);
        let ledger: f64 = sub.ledger.iter().map(|e| e.cost).sum();
        prop_assert!((ledger - sub.total_cost).abs() < 1e-9);
    }

    #[test]
    fn dedup_is_idempotent(points in prop::collection::vec((0usize..3, -5.0f64..5.0, -5.0f64..5.0), 0..40)) {
        let classes = ["ball", "cup", "chair"];
        let pts: Vec<(&str, f64, f64)> = points.iter().map(|&(c, x, y)| (classes[c], x, y)).collect();
        let reps = dedup_detections(&pts);
        let kept: BTreeSet<usize> = reps.iter().copied().collect();
        let again: Vec<(&str, f64, f64)> = kept.iter().map(|&k| pts[k]).collect();
        let reps2 = dedup_detections(&again);
        // Representatives of distinct clusters are more than the radius apart,
        // so each is its own cluster on a second pass.
        prop_assert_eq!(reps2, (0..again.len()).collect::<Vec<_>>());
    }
}

#[test]
fn corpus_file_round_trip() {
    let mut buf = Vec::new();
    corpus::write_corpus(&mut buf, corpus()).unwrap();
    let back = corpus::read_corpus(buf.as_slice()).unwrap();
    assert_eq!(back, corpus());
}

#[test]
fn every_corpus_parse_survives_dump_and_load() {
    let g = Grammar::new(registry());
    for ex in corpus() {
        let tree = load_tree(&dump_tree(&ex.parse)).unwrap();
        assert_eq!(tree, ex.parse);
        assert_eq!(g.parse_text(&ex.instruction).unwrap(), ex.parse);
    }
}

#[test]
fn annotations_follow_the_words() {
    let words_in = |ex: &CorpusExample| -> BTreeSet<String> {
        ex.instruction
            .split_whitespace()
            .map(str::to_string)
            .collect()
    };
    for ex in corpus() {
        assert_eq!(
            corpus::annotate(&ex.parse, registry()).unwrap(),
            (
                ex.semantic.clone(),
                ex.perception.clone(),
                ex.grounding.clone()
            )
        );
        let words = words_in(ex);
        let root = ex.gold_grounding();
        let class = root.iter().find_map(|g| match g {
            GroundingSymbol::ObjectType(c) => Some(c.clone()),
            _ => None,
        });
        assert!(words.contains(&class.unwrap()), "{}", ex.instruction);
        let has_color = root.iter().any(|g| matches!(g, GroundingSymbol::Color(_)));
        assert_eq!(has_color, ex.template.has_color(), "{}", ex.instruction);
        assert_eq!(!ex.gold_semantic().is_empty(), ex.template.has_region());
        assert!(root.iter().all(GroundingSymbol::is_constraint));
    }
}

#[test]
fn splits_depend_on_the_seed_and_keep_template_shares() {
    let (a, _) = corpus::split(corpus(), 0.8, 1).unwrap();
    let (b, test) = corpus::split(corpus(), 0.8, 2).unwrap();
    assert_eq!(a.len(), 400);
    assert_eq!(test.len(), 100);
    assert_ne!(a, b);
    for t in corpus::Template::ALL {
        assert_eq!(a.iter().filter(|e| e.template == t).count(), 100);
    }
    assert!(matches!(
        corpus::split(corpus(), 1.0, 1),
        Err(Error::InvalidFraction(_))
    ));
}

/// Filtering on the gold labels never loses the gold target: the filtered
/// world still has an object of the same class at the same place.
#[test]
fn gold_labels_keep_the_gold_target() {
    let all: BTreeSet<PerceptionSymbol> = registry().classifiers().into_iter().collect();
    let mut checked = 0;
    for site in sites() {
        let every: Vec<&Observation> = site.observations.iter().collect();
        let full = build_world_model(&every, &all, &WorldModel::default(), registry())
            .unwrap()
            .with_robot_pose(site.robot_pose());
        for ex in corpus().iter().filter(|e| e.template.has_region()) {
            let Ok(id) = resolve_constraints(ex.gold_grounding(), &full) else {
                continue;
            };
            let target = full.object(id).unwrap();
            let kept = filter_observations(&site.observations, ex.gold_semantic())
                .apply(&site.observations);
            let filtered =
                build_world_model(&kept, &all, &WorldModel::default(), registry()).unwrap();
            assert!(
                filtered.objects().any(|o| o.matches(target)),
                "{}",
                ex.instruction
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 48);
}
