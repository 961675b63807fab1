use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::features::{extract_features, WorldDigest};
use super::oracle::softplus;
use super::DcgModel;
use crate::grammar::ParseTree;
use crate::symbols::{Domain, Symbol, SymbolSpace};
use crate::world::WorldModel;
use crate::Error;

pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
const INITIAL_STEP: f64 = 0.1;
const MIN_STEP: f64 = 1e-30;

/// One annotated instruction for a single domain.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub tree: ParseTree,
    pub space: Arc<SymbolSpace>,
    pub world: Option<Arc<WorldModel>>,
    /// Indices into `space` of the symbols true at each phrase, by
    /// post-order index.
    pub gold: Vec<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub iterations: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct Row {
    features: Vec<u32>,
    label: bool,
    count: f64,
}

/// The regularized log-likelihood of a corpus under teacher forcing.
/// Identical (features, label) factors are stored once with a count.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    names: Vec<String>,
    rows: Vec<Row>,
    regularization: f64,
}

impl TrainingProblem {
    pub fn new(
        domain: Domain,
        examples: &[TrainingExample],
        regularization: f64,
    ) -> Result<Self, Error> {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut names = Vec::new();
        let mut seen: HashMap<(Vec<u32>, bool), usize> = HashMap::new();
        let mut rows: Vec<Row> = Vec::new();
        for ex in examples {
            if ex.space.domain() != domain {
                return Err(Error::CorpusDomainMismatch {
                    expected: domain,
                    found: ex.space.domain(),
                });
            }
            let digest = ex.world.as_deref().map(WorldDigest::new);
            let phrases = ex.tree.phrases();
            if ex.gold.len() != phrases.len() {
                return Err(Error::Format {
                    what: "training example",
                    message: format!("{} gold sets for {} phrases", ex.gold.len(), phrases.len()),
                });
            }
            for (i, phrase) in phrases.iter().enumerate() {
                let child_idx: BTreeSet<usize> = phrase
                    .children
                    .iter()
                    .flat_map(|c| ex.gold[c.index].iter().copied())
                    .collect();
                let child_true: Vec<&Symbol> =
                    child_idx.iter().filter_map(|&j| ex.space.get(j)).collect();
                for (j, symbol) in ex.space.symbols().iter().enumerate() {
                    let fv = extract_features(phrase, symbol, &child_true, digest.as_ref());
                    let mut ids: Vec<u32> = fv
                        .names()
                        .map(|name| {
                            *index.entry(name.to_string()).or_insert_with(|| {
                                names.push(name.to_string());
                                (names.len() - 1) as u32
                            })
                        })
                        .collect();
                    ids.sort_unstable();
                    let label = ex.gold[i].contains(&j);
                    match seen.get(&(ids.clone(), label)) {
                        Some(&r) => rows[r].count += 1.0,
                        None => {
                            seen.insert((ids.clone(), label), rows.len());
                            rows.push(Row {
                                features: ids,
                                label,
                                count: 1.0,
                            });
                        }
                    }
                }
            }
        }
        Ok(TrainingProblem {
            names,
            rows,
            regularization,
        })
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    /// Number of distinct (features, label) factors after compression.
    pub fn distinct_factors(&self) -> usize {
        self.rows.len()
    }

    /// Total number of factors, counting duplicates.
    pub fn total_factors(&self) -> f64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    fn score(&self, row: &Row, w: &[f64]) -> f64 {
        row.features.iter().map(|&f| w[f as usize]).sum()
    }

    /// Σ log p(φ = gold) − λ‖w‖².
    pub fn objective(&self, w: &[f64]) -> f64 {
        let ll: f64 = self
            .rows
            .iter()
            .map(|r| {
                let s = self.score(r, w);
                let lp = if r.label { -softplus(-s) } else { -softplus(s) };
                r.count * lp
            })
            .sum();
        ll - self.regularization * w.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = w.iter().map(|x| -2.0 * self.regularization * x).collect();
        for r in &self.rows {
            let s = self.score(r, w);
            let y = if r.label { 1.0 } else { 0.0 };
            let d = r.count * (y - super::logistic(s));
            for &f in &r.features {
                g[f as usize] += d;
            }
        }
        g
    }

    /// Mean log-likelihood per factor, without the penalty.
    pub fn mean_log_likelihood(&self, w: &[f64]) -> f64 {
        let penalty = self.regularization * w.iter().map(|x| x * x).sum::<f64>();
        (self.objective(w) + penalty) / self.total_factors().max(1.0)
    }

    pub fn weights_of(&self, model: &DcgModel) -> Vec<f64> {
        self.names.iter().map(|n| model.weight(n)).collect()
    }

    /// Gradient ascent with a fixed initial step of 0.1 per iteration,
    /// halved until the objective does not decrease.
    pub fn maximize(&self, mut w: Vec<f64>) -> Result<(Vec<f64>, TrainingReport), Error> {
        let mut f = self.objective(&w);
        let mut g = self.gradient(&w);
        let mut report = TrainingReport {
            iterations: 0,
            objective: f,
            gradient_norm: inf_norm(&g),
            converged: false,
        };
        for iteration in 0..MAX_ITERATIONS {
            if !f.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::DivergedLoss { iteration });
            }
            report.gradient_norm = inf_norm(&g);
            if report.gradient_norm < GRADIENT_TOLERANCE {
                report.converged = true;
                break;
            }
            let mut step = INITIAL_STEP;
            let next = loop {
                let candidate: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x + step * d).collect();
                let fc = self.objective(&candidate);
                if fc.is_nan() {
                    return Err(Error::DivergedLoss { iteration });
                }
                if fc >= f {
                    break Some((candidate, fc));
                }
                step *= 0.5;
                if step < MIN_STEP {
                    break None;
                }
            };
            report.iterations = iteration + 1;
            let Some((candidate, fc)) = next else {
                // No ascent direction left at floating-point resolution.
                report.converged = true;
                break;
            };
            w = candidate;
            f = fc;
            g = self.gradient(&w);
            report.objective = f;
            report.gradient_norm = inf_norm(&g);
        }
        if !f.is_finite() {
            return Err(Error::DivergedLoss {
                iteration: report.iterations,
            });
        }
        report.converged |= report.gradient_norm < GRADIENT_TOLERANCE;
        Ok((w, report))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits `model_init`'s weights to the examples, starting from its current
/// weights and using its regularization.
pub fn train(model_init: &DcgModel, examples: &[TrainingExample]) -> Result<DcgModel, Error> {
    train_with_report(model_init, examples).map(|(m, _)| m)
}

pub fn train_with_report(
    model_init: &DcgModel,
    examples: &[TrainingExample],
) -> Result<(DcgModel, TrainingReport), Error> {
    let mut problem = TrainingProblem::new(model_init.domain, examples, model_init.regularization)?;
    // Weights the corpus never fires still feel the penalty.
    for name in model_init.weights.keys() {
        if !problem.names.contains(name) {
            problem.names.push(name.clone());
        }
    }
    let w0 = problem.weights_of(model_init);
    let (w, report) = problem.maximize(w0)?;
    let mut model = DcgModel::new(model_init.domain, model_init.regularization);
    for (name, x) in problem.names.iter().zip(w) {
        if x != 0.0 {
            model.weights.insert(name.clone(), x);
        }
    }
    Ok((model, report))
}
