//! Symbolic representations shared by the three grounding models.
//!
//! * scene semantics: one [`SceneLabel`] per region type,
//! * perception: one [`PerceptionSymbol`] per registered classifier,
//! * grounding: type-level constraints plus per-object and per-action symbols
//!   enumerated against a concrete [`WorldModel`].
//!
//! Every symbol has a canonical string. Symbol spaces are sorted by it, so
//! the index `j` of a symbol is stable for a given registry and world.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::world::{ClassifierRegistry, ObjectId, WorldModel};
use crate::Error;

/// Region types an observation can be labeled with.
///
/// Variant order is the lexicographic order of the canonical names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneLabel {
    Hallway,
    Kitchen,
    Laboratory,
    Lounge,
    Office,
    ParkingLot,
    Warehouse,
    Workshop,
}

impl SceneLabel {
    pub const ALL: [SceneLabel; 8] = [
        SceneLabel::Hallway,
        SceneLabel::Kitchen,
        SceneLabel::Laboratory,
        SceneLabel::Lounge,
        SceneLabel::Office,
        SceneLabel::ParkingLot,
        SceneLabel::Warehouse,
        SceneLabel::Workshop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SceneLabel::Hallway => "hallway",
            SceneLabel::Kitchen => "kitchen",
            SceneLabel::Laboratory => "laboratory",
            SceneLabel::Lounge => "lounge",
            SceneLabel::Office => "office",
            SceneLabel::ParkingLot => "parking_lot",
            SceneLabel::Warehouse => "warehouse",
            SceneLabel::Workshop => "workshop",
        }
    }
}

impl fmt::Display for SceneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SceneLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SceneLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    }
}

/// The only symbol in the semantic domain is the scene label itself.
pub type SemanticSymbol = SceneLabel;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PerceptionSymbol {
    ObjectDetector(String),
    ColorDetector(String),
    BboxEstimator,
    PoseEstimator,
    NoiseFilter,
}

impl PerceptionSymbol {
    /// Stages every world-model object needs, regardless of the instruction.
    pub fn structural() -> [PerceptionSymbol; 3] {
        [
            PerceptionSymbol::NoiseFilter,
            PerceptionSymbol::BboxEstimator,
            PerceptionSymbol::PoseEstimator,
        ]
    }

    pub fn canonical(&self) -> String {
        match self {
            PerceptionSymbol::ObjectDetector(c) => format!("detector:{c}"),
            PerceptionSymbol::ColorDetector(c) => format!("color_detector:{c}"),
            PerceptionSymbol::BboxEstimator => "bbox".to_string(),
            PerceptionSymbol::PoseEstimator => "pose".to_string(),
            PerceptionSymbol::NoiseFilter => "noise".to_string(),
        }
    }
}

impl fmt::Display for PerceptionSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for PerceptionSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bbox" => Ok(PerceptionSymbol::BboxEstimator),
            "pose" => Ok(PerceptionSymbol::PoseEstimator),
            "noise" => Ok(PerceptionSymbol::NoiseFilter),
            _ => {
                if let Some(c) = s.strip_prefix("detector:") {
                    Ok(PerceptionSymbol::ObjectDetector(c.to_string()))
                } else if let Some(c) = s.strip_prefix("color_detector:") {
                    Ok(PerceptionSymbol::ColorDetector(c.to_string()))
                } else {
                    Err(Error::UnknownSymbol(s.to_string()))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialRelation {
    Farthest,
    Nearest,
}

impl SpatialRelation {
    pub fn as_str(self) -> &'static str {
        match self {
            SpatialRelation::Farthest => "farthest",
            SpatialRelation::Nearest => "nearest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroundingSymbol {
    ObjectType(String),
    Color(String),
    Region(SceneLabel),
    Relation(SpatialRelation),
    Object(ObjectId),
    /// `navigate_to` is the only action in the navigation domain.
    NavigateTo(ObjectId),
}

impl GroundingSymbol {
    pub fn canonical(&self) -> String {
        match self {
            GroundingSymbol::ObjectType(c) => format!("type:{c}"),
            GroundingSymbol::Color(c) => format!("color:{c}"),
            GroundingSymbol::Region(l) => format!("region:{l}"),
            GroundingSymbol::Relation(r) => format!("rel:{}", r.as_str()),
            GroundingSymbol::Object(id) => format!("object:{id}"),
            GroundingSymbol::NavigateTo(id) => format!("action:navigate_to:{id}"),
        }
    }

    /// Type-level symbols act as constraints on the resolved action.
    pub fn is_constraint(&self) -> bool {
        !matches!(
            self,
            GroundingSymbol::Object(_) | GroundingSymbol::NavigateTo(_)
        )
    }
}

impl fmt::Display for GroundingSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for GroundingSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::UnknownSymbol(s.to_string());
        let parse_id = |v: &str| v.parse::<ObjectId>().map_err(|_| bad());
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "type" => Ok(GroundingSymbol::ObjectType(rest.to_string())),
            "color" => Ok(GroundingSymbol::Color(rest.to_string())),
            "region" => Ok(GroundingSymbol::Region(rest.parse()?)),
            "rel" => match rest {
                "nearest" => Ok(GroundingSymbol::Relation(SpatialRelation::Nearest)),
                "farthest" => Ok(GroundingSymbol::Relation(SpatialRelation::Farthest)),
                _ => Err(bad()),
            },
            "object" => Ok(GroundingSymbol::Object(parse_id(rest)?)),
            "action" => {
                let id = rest.strip_prefix("navigate_to:").ok_or_else(bad)?;
                Ok(GroundingSymbol::NavigateTo(parse_id(id)?))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Semantic,
    Perception,
    Grounding,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Semantic => "semantic",
            Domain::Perception => "perception",
            Domain::Grounding => "grounding",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A symbol from any of the three domains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Semantic(SemanticSymbol),
    Perception(PerceptionSymbol),
    Grounding(GroundingSymbol),
}

impl Symbol {
    pub fn domain(&self) -> Domain {
        match self {
            Symbol::Semantic(_) => Domain::Semantic,
            Symbol::Perception(_) => Domain::Perception,
            Symbol::Grounding(_) => Domain::Grounding,
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            Symbol::Semantic(l) => format!("scene:{l}"),
            Symbol::Perception(p) => p.canonical(),
            Symbol::Grounding(g) => g.canonical(),
        }
    }

    /// Coarse kind of the symbol, used by variant-level feature templates.
    pub fn variant(&self) -> &'static str {
        match self {
            Symbol::Semantic(_) => "scene",
            Symbol::Perception(p) => match p {
                PerceptionSymbol::ObjectDetector(_) => "detector",
                PerceptionSymbol::ColorDetector(_) => "color_detector",
                PerceptionSymbol::BboxEstimator => "bbox",
                PerceptionSymbol::PoseEstimator => "pose",
                PerceptionSymbol::NoiseFilter => "noise",
            },
            Symbol::Grounding(g) => match g {
                GroundingSymbol::ObjectType(_) => "type",
                GroundingSymbol::Color(_) => "color",
                GroundingSymbol::Region(_) => "region",
                GroundingSymbol::Relation(_) => "rel",
                GroundingSymbol::Object(_) => "object",
                GroundingSymbol::NavigateTo(_) => "action",
            },
        }
    }

    pub fn as_grounding(&self) -> Option<&GroundingSymbol> {
        match self {
            Symbol::Grounding(g) => Some(g),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl From<SceneLabel> for Symbol {
    fn from(l: SceneLabel) -> Self {
        Symbol::Semantic(l)
    }
}

impl From<PerceptionSymbol> for Symbol {
    fn from(p: PerceptionSymbol) -> Self {
        Symbol::Perception(p)
    }
}

impl From<GroundingSymbol> for Symbol {
    fn from(g: GroundingSymbol) -> Self {
        Symbol::Grounding(g)
    }
}

/// A finite, ordered grounding space for one domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSpace {
    domain: Domain,
    symbols: Vec<Symbol>,
}

impl SymbolSpace {
    /// Builds a space from arbitrary symbols: sorts them canonically and
    /// drops duplicates.
    pub fn new(domain: Domain, symbols: impl IntoIterator<Item = Symbol>) -> Result<Self, Error> {
        let mut keyed: Vec<(String, Symbol)> = Vec::new();
        for s in symbols {
            if s.domain() != domain {
                return Err(Error::DomainMismatch {
                    expected: domain,
                    found: s.domain(),
                });
            }
            keyed.push((s.canonical(), s));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        Ok(SymbolSpace {
            domain,
            symbols: keyed.into_iter().map(|(_, s)| s).collect(),
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, j: usize) -> Option<&Symbol> {
        self.symbols.get(j)
    }

    pub fn index_of(&self, symbol: &Symbol) -> Option<usize> {
        let key = symbol.canonical();
        self.symbols
            .binary_search_by(|s| s.canonical().cmp(&key))
            .ok()
    }

    /// One canonical string per line, in index order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for s in &self.symbols {
            out.push_str(&s.canonical());
            out.push('\n');
        }
        out
    }
}

pub fn enumerate_semantic_space() -> SymbolSpace {
    SymbolSpace::new(
        Domain::Semantic,
        SceneLabel::ALL.into_iter().map(Symbol::from),
    )
    .expect("semantic symbols share a domain")
}

pub fn enumerate_perception_space(registry: &ClassifierRegistry) -> Result<SymbolSpace, Error> {
    let classifiers = registry.classifiers();
    if classifiers.is_empty() {
        return Err(Error::EmptyRegistry);
    }
    SymbolSpace::new(
        Domain::Perception,
        classifiers.into_iter().map(Symbol::from),
    )
}

/// Type-level symbols of the grounding domain; independent of any world.
pub fn grounding_constraints(registry: &ClassifierRegistry) -> Vec<GroundingSymbol> {
    let mut out: Vec<GroundingSymbol> = Vec::new();
    out.extend(
        registry
            .classes()
            .iter()
            .map(|c| GroundingSymbol::ObjectType(c.clone())),
    );
    out.extend(
        registry
            .colors()
            .iter()
            .map(|c| GroundingSymbol::Color(c.clone())),
    );
    out.extend(SceneLabel::ALL.into_iter().map(GroundingSymbol::Region));
    out.push(GroundingSymbol::Relation(SpatialRelation::Nearest));
    out.push(GroundingSymbol::Relation(SpatialRelation::Farthest));
    out
}

pub fn enumerate_grounding_space(world: &WorldModel, registry: &ClassifierRegistry) -> SymbolSpace {
    let mut symbols: Vec<Symbol> = grounding_constraints(registry)
        .into_iter()
        .map(Symbol::from)
        .collect();
    for obj in world.objects() {
        symbols.push(GroundingSymbol::Object(obj.id).into());
        symbols.push(GroundingSymbol::NavigateTo(obj.id).into());
    }
    SymbolSpace::new(Domain::Grounding, symbols).expect("grounding symbols share a domain")
}

/// Convenience for callers that want a set of canonical strings.
pub fn canonical_set<'a>(symbols: impl IntoIterator<Item = &'a Symbol>) -> BTreeSet<String> {
    symbols.into_iter().map(Symbol::canonical).collect()
}
