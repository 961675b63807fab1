//! Distributed Correspondence Graph models.
//!
//! One boolean correspondence variable per (phrase, symbol) pair, each with a
//! log-linear factor conditioned on the phrase, the candidate symbol, the
//! symbols assigned true at the phrase's children and a digest of the world.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::symbols::{Domain, Symbol, SymbolSpace};
use crate::Error;

mod features;
mod infer;
mod oracle;
mod train;

pub use features::{extract_features, symbol_attributes, FeatureVector, WorldDigest};
pub use infer::{infer, infer_unresolved, resolve_action, resolve_constraints};
pub use oracle::{infer_joint_oracle, infer_joint_oracle_given_children, ORACLE_LIMIT};
pub use train::{
    train, train_with_report, TrainingExample, TrainingProblem, TrainingReport, MAX_ITERATIONS,
};

pub const MODEL_SCHEMA: u32 = 1;
pub const DEFAULT_REGULARIZATION: f64 = 1e-3;

/// Weights of one of the three models.
#[derive(Debug, Clone, PartialEq)]
pub struct DcgModel {
    pub domain: Domain,
    pub weights: BTreeMap<String, f64>,
    pub regularization: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: u32,
    domain: Domain,
    regularization: f64,
    #[serde(default)]
    weights: BTreeMap<String, f64>,
}

impl DcgModel {
    /// Zero weights: every factor evaluates to 0.5.
    pub fn new(domain: Domain, regularization: f64) -> Self {
        DcgModel {
            domain,
            weights: BTreeMap::new(),
            regularization,
        }
    }

    pub fn weight(&self, feature: &str) -> f64 {
        self.weights.get(feature).copied().unwrap_or(0.0)
    }

    pub fn to_toml_string(&self) -> String {
        let file = ModelFile {
            schema: MODEL_SCHEMA,
            domain: self.domain,
            regularization: self.regularization,
            weights: self.weights.clone(),
        };
        toml::to_string(&file).expect("model weights serialize")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        #[derive(Deserialize)]
        struct Version {
            schema: u32,
        }
        let fmt = |e: toml::de::Error| Error::Format {
            what: "model file",
            message: e.to_string(),
        };
        let v: Version = toml::from_str(text).map_err(fmt)?;
        if v.schema != MODEL_SCHEMA {
            return Err(Error::UnsupportedSchema {
                what: "model file",
                found: v.schema,
                expected: MODEL_SCHEMA,
            });
        }
        let file: ModelFile = toml::from_str(text).map_err(fmt)?;
        if !file.regularization.is_finite() || file.regularization < 0.0 {
            return Err(Error::Format {
                what: "model file",
                message: format!("invalid regularization {}", file.regularization),
            });
        }
        if let Some((k, _)) = file.weights.iter().find(|(_, w)| !w.is_finite()) {
            return Err(Error::Format {
                what: "model file",
                message: format!("non-finite weight for {k}"),
            });
        }
        Ok(DcgModel {
            domain: file.domain,
            weights: file.weights,
            regularization: file.regularization,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    fn check_domain(&self, space: &SymbolSpace) -> Result<(), Error> {
        if space.domain() != self.domain {
            return Err(Error::DomainMismatch {
                expected: self.domain,
                found: space.domain(),
            });
        }
        Ok(())
    }
}

pub fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// p(φ = true) for one factor.
pub fn factor_prob(model: &DcgModel, fv: &FeatureVector) -> Result<f64, Error> {
    let s = fv.dot(&model.weights);
    if !s.is_finite() {
        return Err(Error::NonFiniteScore {
            phrase: usize::MAX,
            symbol: String::new(),
        });
    }
    Ok(logistic(s))
}

/// Dense |Λ| × |Γ| boolean matrix, rows in post-order phrase index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    phrases: usize,
    symbols: usize,
    values: Vec<bool>,
    /// Factor evaluations performed to produce this assignment.
    pub factor_evaluations: usize,
}

impl Assignment {
    pub fn new(phrases: usize, symbols: usize) -> Self {
        Assignment {
            phrases,
            symbols,
            values: vec![false; phrases * symbols],
            factor_evaluations: 0,
        }
    }

    pub fn phrases(&self) -> usize {
        self.phrases
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.values[i * self.symbols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.values[i * self.symbols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.values[i * self.symbols..(i + 1) * self.symbols]
    }

    /// Row-major flattening, the order used for oracle tie-breaking.
    pub fn flattened(&self) -> &[bool] {
        &self.values
    }

    /// Indices of symbols true at phrase `i`.
    pub fn true_set(&self, i: usize) -> BTreeSet<usize> {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn true_symbols<'a>(&self, i: usize, space: &'a SymbolSpace) -> Vec<&'a Symbol> {
        self.true_set(i)
            .into_iter()
            .filter_map(|j| space.get(j))
            .collect()
    }

    /// True symbols at the root, which is the last phrase in post-order.
    pub fn root_symbols<'a>(&self, space: &'a SymbolSpace) -> Vec<&'a Symbol> {
        if self.phrases == 0 {
            return Vec::new();
        }
        self.true_symbols(self.phrases - 1, space)
    }

    /// Same truth values, ignoring the evaluation counter.
    pub fn same_values(&self, other: &Assignment) -> bool {
        self.phrases == other.phrases
            && self.symbols == other.symbols
            && self.values == other.values
    }
}
