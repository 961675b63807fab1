use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap};

use super::features::{extract_features, WorldDigest};
use super::{Assignment, DcgModel};
use crate::grammar::ParseTree;
use crate::symbols::{Symbol, SymbolSpace};
use crate::world::WorldModel;
use crate::Error;

/// Largest number of correspondence variables the oracle will enumerate.
pub const ORACLE_LIMIT: usize = 20;

/// Exhaustive search over all 2^(|Λ|·|Γ|) assignments for the one that
/// maximizes the product of all factors. Each factor conditions on the
/// child rows of the candidate assignment itself. Ties go to the
/// lexicographically smallest flattened vector (false < true).
pub fn infer_joint_oracle(
    model: &DcgModel,
    tree: &ParseTree,
    space: &SymbolSpace,
    world: Option<&WorldModel>,
) -> Result<Assignment, Error> {
    enumerate(model, tree, space, world, None)
}

/// Like [`infer_joint_oracle`], but every factor conditions on the child
/// rows of `children` instead of the candidate's own.
pub fn infer_joint_oracle_given_children(
    model: &DcgModel,
    tree: &ParseTree,
    space: &SymbolSpace,
    world: Option<&WorldModel>,
    children: &Assignment,
) -> Result<Assignment, Error> {
    enumerate(model, tree, space, world, Some(children))
}

fn enumerate(
    model: &DcgModel,
    tree: &ParseTree,
    space: &SymbolSpace,
    world: Option<&WorldModel>,
    fixed: Option<&Assignment>,
) -> Result<Assignment, Error> {
    model.check_domain(space)?;
    let phrases = tree.phrases();
    let g = space.len();
    let n = phrases.len() * g;
    if n > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            variables: n,
            limit: ORACLE_LIMIT,
        });
    }
    let digest = world.map(WorldDigest::new);
    let children: Vec<Vec<usize>> = phrases
        .iter()
        .map(|p| p.children.iter().map(|c| c.index).collect())
        .collect();
    let row_mask = (1u64 << g) - 1;
    let row = |mask: u64, i: usize| (mask >> (n - (i + 1) * g)) & row_mask;
    let fixed_mask = fixed.map(|a| {
        a.flattened()
            .iter()
            .fold(0u64, |m, &v| (m << 1) | u64::from(v))
    });

    // (log p(true), log p(false)) per symbol, keyed by phrase and the
    // concatenated child rows.
    let mut cache: HashMap<(usize, u64), Vec<(f64, f64)>> = HashMap::new();
    let mut evaluations = 0usize;
    let mut best: Option<(f64, u64)> = None;

    for mask in 0..(1u64 << n) {
        let context = fixed_mask.unwrap_or(mask);
        let mut total = 0.0;
        for (i, phrase) in phrases.iter().enumerate() {
            let key = children[i]
                .iter()
                .fold(0u64, |k, &c| (k << g) | row(context, c));
            let logs = match cache.entry((i, key)) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let child_idx: BTreeSet<usize> = children[i]
                        .iter()
                        .flat_map(|&c| {
                            let r = row(context, c);
                            (0..g).filter(move |j| r >> (g - 1 - j) & 1 == 1)
                        })
                        .collect();
                    let child_true: Vec<&Symbol> =
                        child_idx.iter().filter_map(|&j| space.get(j)).collect();
                    let mut logs = Vec::with_capacity(g);
                    for symbol in space.symbols() {
                        let s = extract_features(phrase, symbol, &child_true, digest.as_ref())
                            .dot(&model.weights);
                        evaluations += 1;
                        if !s.is_finite() {
                            return Err(Error::NonFiniteScore {
                                phrase: i,
                                symbol: symbol.canonical(),
                            });
                        }
                        logs.push((-softplus(-s), -softplus(s)));
                    }
                    e.insert(logs)
                }
            };
            let r = row(mask, i);
            for (j, (lt, lf)) in logs.iter().enumerate() {
                total += if r >> (g - 1 - j) & 1 == 1 { lt } else { lf };
            }
        }
        if best.is_none_or(|(b, _)| total > b) {
            best = Some((total, mask));
        }
    }

    let (_, mask) = best.expect("at least one assignment");
    let mut a = Assignment::new(phrases.len(), g);
    for i in 0..phrases.len() {
        let r = row(mask, i);
        for j in 0..g {
            a.set(i, j, r >> (g - 1 - j) & 1 == 1);
        }
    }
    a.factor_evaluations = evaluations;
    Ok(a)
}

/// ln(1 + e^x) without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
