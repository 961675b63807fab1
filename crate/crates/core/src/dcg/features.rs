//! Binary indicator features for correspondence factors.

use std::collections::{BTreeMap, BTreeSet};

use crate::grammar::Phrase;
use crate::symbols::{GroundingSymbol, PerceptionSymbol, Symbol};
use crate::world::{ObjectId, WorldModel};

/// Sparse feature vector keyed by feature name. Zero entries are never
/// stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: BTreeMap<String, f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `name` to `value`; a zero or non-finite value removes it.
    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        if value == 0.0 || !value.is_finite() {
            self.entries.remove(&name);
        } else {
            self.entries.insert(name, value);
        }
    }

    pub fn fire(&mut self, name: impl Into<String>) {
        self.entries.insert(name.into(), 1.0);
    }

    pub fn get(&self, name: &str) -> f64 {
        self.entries.get(name).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn dot(&self, weights: &BTreeMap<String, f64>) -> f64 {
        self.entries
            .iter()
            .map(|(k, v)| weights.get(k).copied().unwrap_or(0.0) * v)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ObjectSummary {
    class: String,
    color: Option<String>,
    region: String,
}

/// What the factors may know about the world: per-object attributes and
/// counts of detected classes, colors and regions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldDigest {
    objects: BTreeMap<ObjectId, ObjectSummary>,
    class_counts: BTreeMap<String, usize>,
    color_counts: BTreeMap<String, usize>,
    region_counts: BTreeMap<String, usize>,
}

impl WorldDigest {
    pub fn new(world: &WorldModel) -> Self {
        let mut d = WorldDigest::default();
        for o in world.objects() {
            let summary = ObjectSummary {
                class: o.class.clone(),
                color: o.color.clone(),
                region: o.region.as_str().to_string(),
            };
            *d.class_counts.entry(summary.class.clone()).or_default() += 1;
            if let Some(c) = &summary.color {
                *d.color_counts.entry(c.clone()).or_default() += 1;
            }
            *d.region_counts.entry(summary.region.clone()).or_default() += 1;
            d.objects.insert(o.id, summary);
        }
        d
    }

    pub fn class_count(&self, class: &str) -> usize {
        self.class_counts.get(class).copied().unwrap_or(0)
    }

    pub fn color_count(&self, color: &str) -> usize {
        self.color_counts.get(color).copied().unwrap_or(0)
    }

    pub fn region_count(&self, region: &str) -> usize {
        self.region_counts.get(region).copied().unwrap_or(0)
    }

    fn object(&self, id: ObjectId) -> Option<&ObjectSummary> {
        self.objects.get(&id)
    }
}

/// Attribute strings a symbol exposes to the word and child-match templates.
pub fn symbol_attributes(symbol: &Symbol, digest: Option<&WorldDigest>) -> Vec<String> {
    match symbol {
        Symbol::Semantic(l) => vec![format!("region:{l}")],
        Symbol::Perception(p) => vec![match p {
            PerceptionSymbol::ObjectDetector(c) => format!("class:{c}"),
            PerceptionSymbol::ColorDetector(c) => format!("color:{c}"),
            PerceptionSymbol::BboxEstimator => "stage:bbox".to_string(),
            PerceptionSymbol::PoseEstimator => "stage:pose".to_string(),
            PerceptionSymbol::NoiseFilter => "stage:noise".to_string(),
        }],
        Symbol::Grounding(g) => match g {
            GroundingSymbol::ObjectType(c) => vec![format!("class:{c}")],
            GroundingSymbol::Color(c) => vec![format!("color:{c}")],
            GroundingSymbol::Region(l) => vec![format!("region:{l}")],
            GroundingSymbol::Relation(r) => vec![format!("rel:{}", r.as_str())],
            GroundingSymbol::Object(id) | GroundingSymbol::NavigateTo(id) => {
                let mut attrs = Vec::new();
                if let Some(o) = digest.and_then(|d| d.object(*id)) {
                    attrs.push(format!("class:{}", o.class));
                    if let Some(c) = &o.color {
                        attrs.push(format!("color:{c}"));
                    }
                    attrs.push(format!("region:{}", o.region));
                }
                if matches!(g, GroundingSymbol::NavigateTo(_)) {
                    attrs.push("act:navigate_to".to_string());
                }
                attrs
            }
        },
    }
}

/// Instantiates every template for one factor.
///
/// `child_true` holds the symbols assigned true at the phrase's children.
pub fn extract_features(
    phrase: &Phrase,
    symbol: &Symbol,
    child_true: &[&Symbol],
    digest: Option<&WorldDigest>,
) -> FeatureVector {
    let variant = symbol.variant();
    let attrs = symbol_attributes(symbol, digest);
    let mut fv = FeatureVector::new();

    fv.fire(format!("bias×var:{variant}"));
    fv.fire(format!("cat:{}×var:{variant}", phrase.category));
    for word in phrase.words() {
        fv.fire(format!("w:{word}×var:{variant}"));
        for a in &attrs {
            fv.fire(format!("w:{word}×{a}"));
        }
    }

    let attr_set: BTreeSet<&str> = attrs.iter().map(String::as_str).collect();
    for child in child_true {
        let cv = child.variant();
        fv.fire(format!("child:{cv}×var:{variant}"));
        let shares = symbol_attributes(child, digest)
            .iter()
            .any(|a| attr_set.contains(a.as_str()));
        if shares {
            fv.fire(format!("childmatch:{cv}×var:{variant}"));
        }
    }

    if let (
        Some(d),
        Symbol::Grounding(GroundingSymbol::Object(id) | GroundingSymbol::NavigateTo(id)),
    ) = (digest, symbol)
    {
        if d.object(*id).is_some_and(|o| d.class_count(&o.class) == 1) {
            fv.fire(format!("digest:sole_of_class×var:{variant}"));
        }
    }
    fv
}
