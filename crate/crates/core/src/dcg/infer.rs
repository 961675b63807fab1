use std::collections::BTreeSet;

use super::features::{extract_features, WorldDigest};
use super::{logistic, Assignment, DcgModel};
use crate::grammar::ParseTree;
use crate::symbols::{Domain, GroundingSymbol, SpatialRelation, Symbol, SymbolSpace};
use crate::world::{ObjectId, WorldModel};
use crate::Error;

/// Bottom-up MAP over the correspondence variables, before any action
/// resolution. Each factor is evaluated once, with the children's rows
/// already fixed.
pub fn infer_unresolved(
    model: &DcgModel,
    tree: &ParseTree,
    space: &SymbolSpace,
    world: Option<&WorldModel>,
) -> Result<Assignment, Error> {
    model.check_domain(space)?;
    let digest = world.map(WorldDigest::new);
    let phrases = tree.phrases();
    let mut a = Assignment::new(phrases.len(), space.len());
    for (i, phrase) in phrases.iter().enumerate() {
        let child_idx: BTreeSet<usize> = phrase
            .children
            .iter()
            .flat_map(|c| a.true_set(c.index))
            .collect();
        let child_true: Vec<&Symbol> = child_idx.iter().filter_map(|&j| space.get(j)).collect();
        for (j, symbol) in space.symbols().iter().enumerate() {
            let fv = extract_features(phrase, symbol, &child_true, digest.as_ref());
            let s = fv.dot(&model.weights);
            a.factor_evaluations += 1;
            if !s.is_finite() {
                return Err(Error::NonFiniteScore {
                    phrase: i,
                    symbol: symbol.canonical(),
                });
            }
            a.set(i, j, logistic(s) > 0.5);
        }
    }
    Ok(a)
}

/// Full inference. For the grounding domain the root's constraint symbols
/// are resolved against the world and exactly one action is left true at
/// the root.
pub fn infer(
    model: &DcgModel,
    tree: &ParseTree,
    space: &SymbolSpace,
    world: Option<&WorldModel>,
) -> Result<Assignment, Error> {
    let mut a = infer_unresolved(model, tree, space, world)?;
    if model.domain != Domain::Grounding {
        return Ok(a);
    }
    let empty = WorldModel::default();
    let target = resolve_action(&a, space, world.unwrap_or(&empty))?;
    let root = a.phrases() - 1;
    for (j, symbol) in space.symbols().iter().enumerate() {
        if let Some(GroundingSymbol::NavigateTo(id)) = symbol.as_grounding() {
            a.set(root, j, *id == target);
        }
    }
    Ok(a)
}

/// Resolves the constraint symbols true at the root of `a`.
pub fn resolve_action(
    a: &Assignment,
    space: &SymbolSpace,
    world: &WorldModel,
) -> Result<ObjectId, Error> {
    resolve_constraints(
        a.root_symbols(space)
            .into_iter()
            .filter_map(Symbol::as_grounding),
        world,
    )
}

/// Intersects type, color and region constraints over the world and applies
/// the spatial relation, measured from the robot pose.
pub fn resolve_constraints<'a>(
    constraints: impl IntoIterator<Item = &'a GroundingSymbol>,
    world: &WorldModel,
) -> Result<ObjectId, Error> {
    let mut types = Vec::new();
    let mut colors = Vec::new();
    let mut regions = Vec::new();
    let mut relations = BTreeSet::new();
    for s in constraints {
        match s {
            GroundingSymbol::ObjectType(c) => types.push(c.as_str()),
            GroundingSymbol::Color(c) => colors.push(c.as_str()),
            GroundingSymbol::Region(l) => regions.push(*l),
            GroundingSymbol::Relation(r) => {
                relations.insert(*r);
            }
            _ => {}
        }
    }
    let candidates: Vec<_> = world
        .objects()
        .filter(|o| types.iter().all(|t| o.class == *t))
        .filter(|o| colors.iter().all(|c| o.color.as_deref() == Some(*c)))
        .filter(|o| regions.iter().all(|l| o.region == *l))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoTargetObject);
    }
    let relation = match relations.len() {
        1 => *relations.iter().next().unwrap(),
        _ if candidates.len() == 1 => return Ok(candidates[0].id),
        _ => {
            return Err(Error::AmbiguousRelation {
                candidates: candidates.len(),
            })
        }
    };
    // Objects iterate in id order, which is canonical symbol order, so a
    // strict comparison keeps the lexicographically first of tied objects.
    let mut best = candidates[0];
    let mut best_d = best.pose.distance(&world.robot_pose);
    for o in &candidates[1..] {
        let d = o.pose.distance(&world.robot_pose);
        let better = match relation {
            SpatialRelation::Nearest => d < best_d,
            SpatialRelation::Farthest => d > best_d,
        };
        if better {
            best = o;
            best_d = d;
        }
    }
    Ok(best.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::enumerate_grounding_space;
    use crate::world::{ClassifierRegistry, DetectedObject, Pose};

    fn root_only(space: &SymbolSpace, truths: &[&str]) -> Assignment {
        let mut a = Assignment::new(1, space.len());
        for t in truths {
            let s = Symbol::Grounding(t.parse().unwrap());
            a.set(0, space.index_of(&s).unwrap(), true);
        }
        a
    }

    fn world() -> WorldModel {
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
            Pose::new(0.5, 0.0, 0.0),
        ));
        w
    }

    #[test]
    fn nearest_and_farthest_by_distance() {
        let w = world();
        let space = enumerate_grounding_space(&w, &ClassifierRegistry::default());
        let near = root_only(&space, &["type:ball", "rel:nearest"]);
        assert_eq!(resolve_action(&near, &space, &w).unwrap(), ObjectId(1));
        let far = root_only(&space, &["type:ball", "rel:farthest"]);
        assert_eq!(resolve_action(&far, &space, &w).unwrap(), ObjectId(0));
    }

    #[test]
    fn empty_intersection_and_ambiguity() {
        let w = world();
        let space = enumerate_grounding_space(&w, &ClassifierRegistry::default());
        let none = root_only(&space, &["type:umbrella", "rel:nearest"]);
        assert!(matches!(
            resolve_action(&none, &space, &w),
            Err(Error::NoTargetObject)
        ));
        let amb = root_only(&space, &["type:ball"]);
        assert!(matches!(
            resolve_action(&amb, &space, &w),
            Err(Error::AmbiguousRelation { candidates: 2 })
        ));
        let single = root_only(&space, &["type:cup"]);
        assert_eq!(resolve_action(&single, &space, &w).unwrap(), ObjectId(2));
    }

    #[test]
    fn equal_distances_pick_first_canonical() {
        let mut w = WorldModel::default();
        w.insert_object(DetectedObject::new(
            ObjectId(5),
            "ball",
            Pose::new(0.0, 2.0, 0.0),
        ));
        w.insert_object(DetectedObject::new(
            ObjectId(4),
            "ball",
            Pose::new(2.0, 0.0, 0.0),
        ));
        let space = enumerate_grounding_space(&w, &ClassifierRegistry::default());
        let a = root_only(&space, &["type:ball", "rel:nearest"]);
        assert_eq!(resolve_action(&a, &space, &w).unwrap(), ObjectId(4));
    }
}
