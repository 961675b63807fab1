use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::symbols::{PerceptionSymbol, SceneLabel};
use crate::Error;

pub const REGISTRY_SCHEMA: u32 = 1;

const DEFAULT_REGISTRY: &str = include_str!("../../data/registry.toml");

/// Abstract cost of one classifier invocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub base_cost: f64,
    pub per_item_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            base_cost: 1.0,
            per_item_cost: 0.01,
        }
    }
}

impl CostModel {
    pub fn charge(&self, items: usize) -> f64 {
        self.base_cost + self.per_item_cost * items as f64
    }

    fn validate(&self, name: &str) -> Result<(), Error> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.base_cost) && ok(self.per_item_cost) {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "classifier {name} has a negative or non-finite cost"
            )))
        }
    }
}

/// The perceptual classifiers available to the robot, their costs, and the
/// closed vocabulary they induce (object classes, colors, region words).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierRegistry {
    classes: Vec<String>,
    colors: Vec<String>,
    costs: BTreeMap<PerceptionSymbol, CostModel>,
    region_words: Vec<(String, SceneLabel)>,
    scene_cost: f64,
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    schema: u32,
    scene_classification_cost: f64,
    stages: StagesFile,
    classes: Vec<NamedCost>,
    colors: Vec<NamedCost>,
    regions: Vec<RegionWords>,
}

#[derive(Serialize, Deserialize)]
struct StagesFile {
    noise: CostModel,
    bbox: CostModel,
    pose: CostModel,
}

#[derive(Serialize, Deserialize)]
struct NamedCost {
    name: String,
    base_cost: f64,
    per_item_cost: f64,
}

#[derive(Serialize, Deserialize)]
struct RegionWords {
    label: SceneLabel,
    words: Vec<String>,
}

impl Default for ClassifierRegistry {
    fn default() -> Self {
        ClassifierRegistry::from_toml_str(DEFAULT_REGISTRY).expect("bundled registry is valid")
    }
}

impl ClassifierRegistry {
    /// A registry with no classifiers and no vocabulary.
    pub fn empty() -> Self {
        ClassifierRegistry {
            classes: Vec::new(),
            colors: Vec::new(),
            costs: BTreeMap::new(),
            region_words: Vec::new(),
            scene_cost: 0.0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        ClassifierRegistry::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| Error::Format {
            what: "registry",
            message: e.to_string(),
        })?;
        if file.schema != REGISTRY_SCHEMA {
            return Err(Error::UnsupportedSchema {
                what: "registry",
                found: file.schema,
                expected: REGISTRY_SCHEMA,
            });
        }
        let mut reg = ClassifierRegistry::empty();
        reg.scene_cost = file.scene_classification_cost;
        reg.set_cost(PerceptionSymbol::NoiseFilter, file.stages.noise)?;
        reg.set_cost(PerceptionSymbol::BboxEstimator, file.stages.bbox)?;
        reg.set_cost(PerceptionSymbol::PoseEstimator, file.stages.pose)?;
        for c in file.classes {
            reg.add_class(
                &c.name,
                CostModel {
                    base_cost: c.base_cost,
                    per_item_cost: c.per_item_cost,
                },
            )?;
        }
        for c in file.colors {
            reg.add_color(
                &c.name,
                CostModel {
                    base_cost: c.base_cost,
                    per_item_cost: c.per_item_cost,
                },
            )?;
        }
        for r in file.regions {
            for w in r.words {
                reg.region_words.push((w, r.label));
            }
        }
        Ok(reg)
    }

    pub fn to_toml_string(&self) -> String {
        let named = |sym: fn(String) -> PerceptionSymbol, names: &[String]| -> Vec<NamedCost> {
            names
                .iter()
                .map(|n| {
                    let c = self.costs[&sym(n.clone())];
                    NamedCost {
                        name: n.clone(),
                        base_cost: c.base_cost,
                        per_item_cost: c.per_item_cost,
                    }
                })
                .collect()
        };
        let stage = |s: PerceptionSymbol| self.costs.get(&s).copied().unwrap_or_default();
        let mut regions: Vec<RegionWords> = Vec::new();
        for (word, label) in &self.region_words {
            match regions.iter_mut().find(|r| r.label == *label) {
                Some(r) => r.words.push(word.clone()),
                None => regions.push(RegionWords {
                    label: *label,
                    words: vec![word.clone()],
                }),
            }
        }
        let file = RegistryFile {
            schema: REGISTRY_SCHEMA,
            scene_classification_cost: self.scene_cost,
            stages: StagesFile {
                noise: stage(PerceptionSymbol::NoiseFilter),
                bbox: stage(PerceptionSymbol::BboxEstimator),
                pose: stage(PerceptionSymbol::PoseEstimator),
            },
            classes: named(PerceptionSymbol::ObjectDetector, &self.classes),
            colors: named(PerceptionSymbol::ColorDetector, &self.colors),
            regions,
        };
        toml::to_string(&file).expect("registry serializes")
    }

    fn set_cost(&mut self, sym: PerceptionSymbol, cost: CostModel) -> Result<(), Error> {
        cost.validate(&sym.canonical())?;
        self.costs.insert(sym, cost);
        Ok(())
    }

    pub fn add_class(&mut self, name: &str, cost: CostModel) -> Result<(), Error> {
        check_word(name)?;
        if !self.classes.iter().any(|c| c == name) {
            self.classes.push(name.to_string());
        }
        self.set_cost(PerceptionSymbol::ObjectDetector(name.to_string()), cost)
    }

    pub fn add_color(&mut self, name: &str, cost: CostModel) -> Result<(), Error> {
        check_word(name)?;
        if !self.colors.iter().any(|c| c == name) {
            self.colors.push(name.to_string());
        }
        self.set_cost(PerceptionSymbol::ColorDetector(name.to_string()), cost)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn colors(&self) -> &[String] {
        &self.colors
    }

    pub fn has_class(&self, name: &str) -> bool {
        self.classes.iter().any(|c| c == name)
    }

    pub fn has_color(&self, name: &str) -> bool {
        self.colors.iter().any(|c| c == name)
    }

    /// Surface word sequences naming each scene label ("parking lot", "lab").
    pub fn region_words(&self) -> &[(String, SceneLabel)] {
        &self.region_words
    }

    pub fn scene_classification_cost(&self) -> f64 {
        self.scene_cost
    }

    /// Every registered classifier, in canonical order.
    pub fn classifiers(&self) -> Vec<PerceptionSymbol> {
        let mut all: Vec<PerceptionSymbol> = self.costs.keys().cloned().collect();
        all.sort_by_key(|p| p.canonical());
        all
    }

    pub fn contains(&self, classifier: &PerceptionSymbol) -> bool {
        self.costs.contains_key(classifier)
    }

    pub fn cost(&self, classifier: &PerceptionSymbol) -> Result<CostModel, Error> {
        self.costs
            .get(classifier)
            .copied()
            .ok_or_else(|| Error::UnknownClassifier(classifier.canonical()))
    }
}

fn check_word(name: &str) -> Result<(), Error> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
        return Err(Error::InvalidSpec(format!(
            "invalid vocabulary entry {name:?}"
        )));
    }
    Ok(())
}
