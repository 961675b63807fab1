//! Instruction-driven reductions: which observations to keep and which
//! classifiers to run.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dcg::{infer, DcgModel};
use crate::grammar::ParseTree;
use crate::symbols::{enumerate_perception_space, enumerate_semantic_space, Symbol};
use crate::world::{ClassifierRegistry, Observation, ObservationId};
use crate::{PerceptionSymbol, SceneLabel};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterDecision {
    pub kept: BTreeSet<ObservationId>,
    pub dropped: BTreeSet<ObservationId>,
    pub inferred_labels: BTreeSet<SceneLabel>,
}

impl FilterDecision {
    /// Observations of `log` that were kept, in log order.
    pub fn apply<'a>(&self, log: &'a [Observation]) -> Vec<&'a Observation> {
        log.iter().filter(|o| self.kept.contains(&o.id())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassifierSelection {
    pub selected: BTreeSet<PerceptionSymbol>,
}

/// Scene labels true at the root of the semantic model's assignment.
pub fn infer_semantics(
    model: &DcgModel,
    tree: &ParseTree,
) -> Result<BTreeSet<SceneLabel>, crate::Error> {
    let space = enumerate_semantic_space();
    let a = infer(model, tree, &space, None)?;
    Ok(a.root_symbols(&space)
        .into_iter()
        .filter_map(|s| match s {
            Symbol::Semantic(l) => Some(*l),
            _ => None,
        })
        .collect())
}

/// Keeps observations labeled with one of `labels`. With no labels there is
/// no evidence to prune on, so everything is kept.
pub fn filter_observations(obs: &[Observation], labels: &BTreeSet<SceneLabel>) -> FilterDecision {
    let mut d = FilterDecision {
        inferred_labels: labels.clone(),
        ..Default::default()
    };
    for o in obs {
        if labels.is_empty() || labels.contains(&o.scene_label) {
            d.kept.insert(o.id());
        } else {
            d.dropped.insert(o.id());
        }
    }
    d
}

/// Classifiers true at the root of the perception model's assignment, plus
/// the stages every object needs.
pub fn infer_classifiers(
    model: &DcgModel,
    tree: &ParseTree,
    registry: &ClassifierRegistry,
) -> Result<ClassifierSelection, crate::Error> {
    let space = enumerate_perception_space(registry)?;
    let a = infer(model, tree, &space, None)?;
    let mut selected: BTreeSet<PerceptionSymbol> = a
        .root_symbols(&space)
        .into_iter()
        .filter_map(|s| match s {
            Symbol::Perception(p) => Some(p.clone()),
            _ => None,
        })
        .collect();
    selected.extend(PerceptionSymbol::structural());
    Ok(ClassifierSelection { selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::world::simulate;

    fn site1_log() -> Vec<Observation> {
        simulate(&fixtures::site1(), &ClassifierRegistry::default()).unwrap()
    }

    #[test]
    fn hallway_filter_keeps_ten_of_sixty() {
        let log = site1_log();
        let d = filter_observations(&log, &BTreeSet::from([SceneLabel::Hallway]));
        assert_eq!(log.len(), 60);
        assert_eq!(d.kept.len(), 10);
        assert_eq!(d.kept.len() + d.dropped.len(), 60);
        assert!(d.kept.is_disjoint(&d.dropped));
    }

    #[test]
    fn empty_labels_keep_everything() {
        let log = site1_log();
        let d = filter_observations(&log, &BTreeSet::new());
        assert_eq!(d.kept.len(), log.len());
        assert!(d.dropped.is_empty());
    }

    #[test]
    fn absent_label_keeps_nothing() {
        let log = site1_log();
        let d = filter_observations(&log, &BTreeSet::from([SceneLabel::ParkingLot]));
        assert!(d.kept.is_empty());
    }

    #[test]
    fn label_union_is_additive_and_order_free() {
        let log = site1_log();
        let a = BTreeSet::from([SceneLabel::Hallway]);
        let b = BTreeSet::from([SceneLabel::Kitchen]);
        let ab: BTreeSet<_> = a.union(&b).copied().collect();
        let ka = filter_observations(&log, &a).kept;
        let kb = filter_observations(&log, &b).kept;
        let kab = filter_observations(&log, &ab).kept;
        assert_eq!(kab, ka.union(&kb).copied().collect());
        let mut reversed = log.clone();
        reversed.reverse();
        assert_eq!(filter_observations(&reversed, &ab).kept, kab);
    }

    #[test]
    fn structural_stages_are_always_selected() {
        let reg = ClassifierRegistry::default();
        let tree = crate::grammar::Grammar::new(&reg)
            .parse_text("go to the nearest ball")
            .unwrap();
        let model = DcgModel::new(crate::Domain::Perception, 0.0);
        let sel = infer_classifiers(&model, &tree, &reg).unwrap();
        assert_eq!(sel.selected, PerceptionSymbol::structural().into());
        assert_eq!(infer_classifiers(&model, &tree, &reg).unwrap(), sel);
    }
}
