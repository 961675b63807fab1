//! Synthetic instruction corpus annotated for all three models.
//!
//! Every instruction instantiates
//! `<verb> to the <superlative> [<color>] <noun> [in the <region>]`, and its
//! annotations follow mechanically from the filled slots.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::infer_semantics;
use crate::dcg::{
    infer, resolve_constraints, train_with_report, DcgModel, TrainingExample, TrainingReport,
};
use crate::fixtures;
use crate::grammar::{
    dump_tree, load_tree, Grammar, ParseTree, PhraseCategory, SUPERLATIVES, VERBS,
};
use crate::pipeline::Models;
use crate::symbols::{
    enumerate_grounding_space, enumerate_perception_space, enumerate_semantic_space, Domain,
    GroundingSymbol, PerceptionSymbol, SpatialRelation, Symbol, SymbolSpace,
};
use crate::world::{ClassifierRegistry, ObjectId, WorldModel};
use crate::{Error, SceneLabel};

pub const CORPUS_VERSION: u32 = 1;
const FORMAT: &str = "langworld-corpus";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Plain,
    Color,
    Region,
    ColorRegion,
}

impl Template {
    pub const ALL: [Template; 4] = [
        Template::Plain,
        Template::Color,
        Template::Region,
        Template::ColorRegion,
    ];

    pub fn has_color(self) -> bool {
        matches!(self, Template::Color | Template::ColorRegion)
    }

    pub fn has_region(self) -> bool {
        matches!(self, Template::Region | Template::ColorRegion)
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    /// Examples per template, in [`Template::ALL`] order.
    pub counts: [usize; 4],
    pub verbs: Vec<String>,
    pub superlatives: Vec<String>,
    pub colors: Vec<String>,
    pub nouns: Vec<String>,
    /// Region surface forms, e.g. "parking lot" or "lab".
    pub regions: Vec<String>,
    pub seed: u64,
}

impl CorpusConfig {
    /// 500 examples over the full registry vocabulary.
    pub fn from_registry(registry: &ClassifierRegistry, seed: u64) -> Self {
        CorpusConfig {
            counts: [125; 4],
            verbs: VERBS.iter().map(|s| s.to_string()).collect(),
            superlatives: SUPERLATIVES.iter().map(|s| s.to_string()).collect(),
            colors: registry.colors().to_vec(),
            nouns: registry.classes().to_vec(),
            regions: registry
                .region_words()
                .iter()
                .map(|(w, _)| w.clone())
                .collect(),
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn validate(&self, registry: &ClassifierRegistry) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.total() == 0 {
            return bad("no examples requested".into());
        }
        let needs_color = Template::ALL
            .iter()
            .any(|t| t.has_color() && self.counts[t.index()] > 0);
        let needs_region = Template::ALL
            .iter()
            .any(|t| t.has_region() && self.counts[t.index()] > 0);
        for (name, slice, needed) in [
            ("verbs", &self.verbs, true),
            ("superlatives", &self.superlatives, true),
            ("nouns", &self.nouns, true),
            ("colors", &self.colors, needs_color),
            ("regions", &self.regions, needs_region),
        ] {
            if needed && slice.is_empty() {
                return bad(format!("{name} vocabulary is empty"));
            }
        }
        if let Some(v) = self.verbs.iter().find(|v| !VERBS.contains(&v.as_str())) {
            return bad(format!("{v:?} is not a known verb"));
        }
        if let Some(s) = self
            .superlatives
            .iter()
            .find(|s| !SUPERLATIVES.contains(&s.as_str()))
        {
            return bad(format!("{s:?} is not a known superlative"));
        }
        if let Some(c) = self.colors.iter().find(|c| !registry.has_color(c)) {
            return bad(format!("color {c:?} is not in the registry"));
        }
        if let Some(n) = self.nouns.iter().find(|n| !registry.has_class(n)) {
            return bad(format!("class {n:?} is not in the registry"));
        }
        if let Some(r) = self
            .regions
            .iter()
            .find(|r| region_label(registry, r).is_none())
        {
            return bad(format!("region {r:?} is not in the registry"));
        }
        Ok(())
    }
}

fn region_label(registry: &ClassifierRegistry, words: &str) -> Option<SceneLabel> {
    registry
        .region_words()
        .iter()
        .find(|(w, _)| w == words)
        .map(|(_, l)| *l)
}

fn relation_of(word: &str) -> Option<SpatialRelation> {
    match word {
        "nearest" | "closest" => Some(SpatialRelation::Nearest),
        "farthest" => Some(SpatialRelation::Farthest),
        _ => None,
    }
}

/// One instruction with per-phrase gold sets for every domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusExample {
    pub instruction: String,
    pub template: Template,
    pub parse: ParseTree,
    pub semantic: Vec<BTreeSet<SceneLabel>>,
    pub perception: Vec<BTreeSet<PerceptionSymbol>>,
    /// Type-level grounding symbols; object and action symbols are never
    /// gold before resolution.
    pub grounding: Vec<BTreeSet<GroundingSymbol>>,
    /// Target in the reference world, if one satisfies the constraints.
    pub action: Option<ObjectId>,
}

impl CorpusExample {
    fn root(&self) -> usize {
        self.parse.len() - 1
    }

    pub fn gold_semantic(&self) -> &BTreeSet<SceneLabel> {
        &self.semantic[self.root()]
    }

    pub fn gold_perception(&self) -> &BTreeSet<PerceptionSymbol> {
        &self.perception[self.root()]
    }

    pub fn gold_grounding(&self) -> &BTreeSet<GroundingSymbol> {
        &self.grounding[self.root()]
    }
}

type Annotations = (
    Vec<BTreeSet<SceneLabel>>,
    Vec<BTreeSet<PerceptionSymbol>>,
    Vec<BTreeSet<GroundingSymbol>>,
);

/// Derives every phrase's gold sets from its words. An NP names either an
/// object (class, optional color, relation) or a region; PP and VP inherit
/// the union of their children.
pub fn annotate(tree: &ParseTree, registry: &ClassifierRegistry) -> Result<Annotations, Error> {
    let phrases = tree.phrases();
    let mut sem = vec![BTreeSet::new(); phrases.len()];
    let mut per = vec![BTreeSet::new(); phrases.len()];
    let mut gr = vec![BTreeSet::new(); phrases.len()];
    for (i, p) in phrases.iter().enumerate() {
        if p.category != PhraseCategory::Np {
            for c in &p.children {
                let (s, q, g) = (
                    sem[c.index].clone(),
                    per[c.index].clone(),
                    gr[c.index].clone(),
                );
                sem[i].extend(s);
                per[i].extend(q);
                gr[i].extend(g);
            }
            continue;
        }
        let mut rest = Vec::new();
        for w in p.words().filter(|w| *w != "the") {
            if let Some(r) = relation_of(w) {
                gr[i].insert(GroundingSymbol::Relation(r));
            } else if registry.has_color(w) {
                per[i].insert(PerceptionSymbol::ColorDetector(w.to_string()));
                gr[i].insert(GroundingSymbol::Color(w.to_string()));
            } else if registry.has_class(w) {
                per[i].insert(PerceptionSymbol::ObjectDetector(w.to_string()));
                gr[i].insert(GroundingSymbol::ObjectType(w.to_string()));
            } else {
                rest.push(w);
            }
        }
        if !rest.is_empty() {
            let words = rest.join(" ");
            let label = region_label(registry, &words).ok_or_else(|| Error::OutOfGrammar {
                token: words.clone(),
                position: p.tokens[0].position,
            })?;
            sem[i].insert(label);
            gr[i].insert(GroundingSymbol::Region(label));
        }
    }
    Ok((sem, per, gr))
}

fn build_example(
    instruction: String,
    template: Template,
    grammar: &Grammar,
    registry: &ClassifierRegistry,
    reference: &WorldModel,
) -> Result<CorpusExample, Error> {
    let parse = grammar.parse_text(&instruction)?;
    let (semantic, perception, grounding) = annotate(&parse, registry)?;
    let root = parse.len() - 1;
    let action = resolve_constraints(&grounding[root], reference).ok();
    Ok(CorpusExample {
        instruction,
        template,
        parse,
        semantic,
        perception,
        grounding,
        action,
    })
}

/// Generates the corpus, template by template, each from its own sub-seed.
pub fn generate(
    config: &CorpusConfig,
    registry: &ClassifierRegistry,
) -> Result<Vec<CorpusExample>, Error> {
    config.validate(registry)?;
    let grammar = Grammar::new(registry);
    let reference = fixtures::reference_world(registry);
    let mut out = Vec::with_capacity(config.total());
    for t in Template::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(t.index() as u64);
        let pick = |rng: &mut ChaCha8Rng, v: &[String]| v[rng.random_range(0..v.len())].clone();
        for _ in 0..config.counts[t.index()] {
            let mut text = format!(
                "{} to the {}",
                pick(&mut rng, &config.verbs),
                pick(&mut rng, &config.superlatives)
            );
            if t.has_color() {
                text.push(' ');
                text.push_str(&pick(&mut rng, &config.colors));
            }
            text.push(' ');
            text.push_str(&pick(&mut rng, &config.nouns));
            if t.has_region() {
                text.push_str(" in the ");
                text.push_str(&pick(&mut rng, &config.regions));
            }
            out.push(build_example(text, t, &grammar, registry, &reference)?);
        }
    }
    Ok(out)
}

/// Seeded split that keeps each template's share in both parts. Both parts
/// keep corpus order.
pub fn split(
    corpus: &[CorpusExample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<CorpusExample>, Vec<CorpusExample>), Error> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let mut in_train = vec![false; corpus.len()];
    for t in Template::ALL {
        let mut idx: Vec<usize> = (0..corpus.len())
            .filter(|&k| corpus[k].template == t)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t.index() as u64);
        idx.shuffle(&mut rng);
        let n_train = (fraction * idx.len() as f64).round() as usize;
        for &k in &idx[..n_train] {
            in_train[k] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (ex, t) in corpus.iter().zip(in_train) {
        if t {
            train.push(ex.clone());
        } else {
            test.push(ex.clone());
        }
    }
    Ok((train, test))
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    examples: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    instruction: String,
    template: Template,
    parse: String,
    semantic: Vec<Vec<String>>,
    perception: Vec<Vec<String>>,
    grounding: Vec<Vec<String>>,
    action: Option<String>,
}

fn strings<T: ToString>(sets: &[BTreeSet<T>]) -> Vec<Vec<String>> {
    sets.iter()
        .map(|s| s.iter().map(T::to_string).collect())
        .collect()
}

fn parse_sets<T: Ord + std::str::FromStr<Err = Error>>(
    raw: &[Vec<String>],
) -> Result<Vec<BTreeSet<T>>, Error> {
    raw.iter()
        .map(|s| s.iter().map(|x| x.parse()).collect())
        .collect()
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format {
        what: "corpus file",
        message: e.to_string(),
    }
}

pub fn write_corpus<W: Write>(mut out: W, corpus: &[CorpusExample]) -> Result<(), Error> {
    let header = Header {
        format: FORMAT.into(),
        version: CORPUS_VERSION,
        examples: corpus.len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(json_err)?)?;
    for ex in corpus {
        let record = Record {
            instruction: ex.instruction.clone(),
            template: ex.template,
            parse: dump_tree(&ex.parse),
            semantic: strings(&ex.semantic),
            perception: strings(&ex.perception),
            grounding: strings(&ex.grounding),
            action: ex
                .action
                .map(|id| GroundingSymbol::NavigateTo(id).to_string()),
        };
        writeln!(out, "{}", serde_json::to_string(&record).map_err(json_err)?)?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<CorpusExample>, Error> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Format {
        what: "corpus file",
        message: "missing header line".into(),
    })??;
    let header: Header = serde_json::from_str(&first).map_err(json_err)?;
    if header.format != FORMAT {
        return Err(Error::Format {
            what: "corpus file",
            message: format!("unexpected format tag {:?}", header.format),
        });
    }
    if header.version != CORPUS_VERSION {
        return Err(Error::UnsupportedSchema {
            what: "corpus file",
            found: header.version,
            expected: CORPUS_VERSION,
        });
    }
    let mut out = Vec::with_capacity(header.examples);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(&line).map_err(json_err)?;
        let tree = load_tree(&r.parse)?;
        let parse = ParseTree::new(tree.root().clone(), r.instruction.clone());
        let action = match r.action {
            None => None,
            Some(s) => match s.parse::<GroundingSymbol>()? {
                GroundingSymbol::NavigateTo(id) => Some(id),
                _ => return Err(Error::UnknownSymbol(s)),
            },
        };
        let ex = CorpusExample {
            instruction: r.instruction,
            template: r.template,
            semantic: parse_sets(&r.semantic)?,
            perception: parse_sets(&r.perception)?,
            grounding: parse_sets(&r.grounding)?,
            parse,
            action,
        };
        let n = ex.parse.len();
        if ex.semantic.len() != n || ex.perception.len() != n || ex.grounding.len() != n {
            return Err(Error::Format {
                what: "corpus file",
                message: format!(
                    "annotation count does not match the parse of {:?}",
                    ex.instruction
                ),
            });
        }
        out.push(ex);
    }
    if out.len() != header.examples {
        return Err(Error::Format {
            what: "corpus file",
            message: format!(
                "header promises {} examples, found {}",
                header.examples,
                out.len()
            ),
        });
    }
    Ok(out)
}

fn indices(space: &SymbolSpace, symbols: impl IntoIterator<Item = Symbol>) -> BTreeSet<usize> {
    symbols
        .into_iter()
        .filter_map(|s| space.index_of(&s))
        .collect()
}

/// Training examples for one model. Grounding examples are enumerated
/// against [`fixtures::training_world`] so object and action symbols appear
/// as negatives.
pub fn training_examples(
    corpus: &[CorpusExample],
    domain: Domain,
    registry: &ClassifierRegistry,
) -> Result<Vec<TrainingExample>, Error> {
    let (space, world) = match domain {
        Domain::Semantic => (enumerate_semantic_space(), None),
        Domain::Perception => (enumerate_perception_space(registry)?, None),
        Domain::Grounding => {
            let world = fixtures::training_world(registry);
            (
                enumerate_grounding_space(&world, registry),
                Some(Arc::new(world)),
            )
        }
    };
    let space = Arc::new(space);
    Ok(corpus
        .iter()
        .map(|ex| {
            let gold = (0..ex.parse.len())
                .map(|i| match domain {
                    Domain::Semantic => indices(&space, ex.semantic[i].iter().map(|&l| l.into())),
                    Domain::Perception => {
                        indices(&space, ex.perception[i].iter().map(|p| p.clone().into()))
                    }
                    Domain::Grounding => {
                        indices(&space, ex.grounding[i].iter().map(|g| g.clone().into()))
                    }
                })
                .collect();
            TrainingExample {
                tree: ex.parse.clone(),
                space: space.clone(),
                world: world.clone(),
                gold,
            }
        })
        .collect())
}

/// Trains the three models, in parallel, from zero weights.
pub fn train_models(
    train: &[CorpusExample],
    registry: &ClassifierRegistry,
    regularization: f64,
) -> Result<(Models, [TrainingReport; 3]), Error> {
    let fit = |domain: Domain| -> Result<(DcgModel, TrainingReport), Error> {
        let examples = training_examples(train, domain, registry)?;
        train_with_report(&DcgModel::new(domain, regularization), &examples)
    };
    let (semantic, (perception, grounding)) = rayon::join(
        || fit(Domain::Semantic),
        || rayon::join(|| fit(Domain::Perception), || fit(Domain::Grounding)),
    );
    let (semantic, rs) = semantic?;
    let (perception, rp) = perception?;
    let (grounding, rg) = grounding?;
    Ok((
        Models {
            semantic,
            perception,
            grounding,
        },
        [rs, rp, rg],
    ))
}

/// Exact-match counts on a set of examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AccuracyReport {
    pub examples: usize,
    pub semantic_correct: usize,
    pub perception_correct: usize,
    pub action_correct: usize,
}

impl AccuracyReport {
    fn rate(n: usize, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            n as f64 / d as f64
        }
    }

    pub fn semantic_rate(&self) -> f64 {
        Self::rate(self.semantic_correct, self.examples)
    }

    pub fn perception_rate(&self) -> f64 {
        Self::rate(self.perception_correct, self.examples)
    }

    pub fn action_rate(&self) -> f64 {
        Self::rate(self.action_correct, self.examples)
    }
}

/// Scores the semantic and perception root sets and the resolved action in
/// `reference` against the gold annotations.
pub fn evaluate(
    models: &Models,
    test: &[CorpusExample],
    registry: &ClassifierRegistry,
    reference: &WorldModel,
) -> Result<AccuracyReport, Error> {
    let perception_space = enumerate_perception_space(registry)?;
    let grounding_space = enumerate_grounding_space(reference, registry);
    let mut report = AccuracyReport {
        examples: test.len(),
        ..Default::default()
    };
    for ex in test {
        if infer_semantics(&models.semantic, &ex.parse)? == *ex.gold_semantic() {
            report.semantic_correct += 1;
        }
        let a = infer(&models.perception, &ex.parse, &perception_space, None)?;
        let predicted: BTreeSet<PerceptionSymbol> = a
            .root_symbols(&perception_space)
            .into_iter()
            .filter_map(|s| match s {
                Symbol::Perception(p) => Some(p.clone()),
                _ => None,
            })
            .collect();
        if predicted == *ex.gold_perception() {
            report.perception_correct += 1;
        }
        let action = match infer(
            &models.grounding,
            &ex.parse,
            &grounding_space,
            Some(reference),
        ) {
            Ok(a) => a
                .root_symbols(&grounding_space)
                .into_iter()
                .find_map(|s| match s {
                    Symbol::Grounding(GroundingSymbol::NavigateTo(id)) => Some(*id),
                    _ => None,
                }),
            Err(Error::NoTargetObject | Error::AmbiguousRelation { .. }) => None,
            Err(e) => return Err(e),
        };
        if action == ex.action {
            report.action_correct += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CorpusConfig {
        let mut c = CorpusConfig::from_registry(&ClassifierRegistry::default(), 3);
        c.counts = [5, 5, 5, 5];
        c
    }

    #[test]
    fn default_config_yields_500() {
        let reg = ClassifierRegistry::default();
        let corpus = generate(&CorpusConfig::from_registry(&reg, 1), &reg).unwrap();
        assert_eq!(corpus.len(), 500);
    }

    #[test]
    fn generation_is_deterministic() {
        let reg = ClassifierRegistry::default();
        assert_eq!(
            generate(&small_config(), &reg).unwrap(),
            generate(&small_config(), &reg).unwrap()
        );
    }

    #[test]
    fn region_annotation_by_construction() {
        let reg = ClassifierRegistry::default();
        let tree = Grammar::new(&reg)
            .parse_text("navigate to the nearest cone in the parking lot")
            .unwrap();
        let (sem, per, gr) = annotate(&tree, &reg).unwrap();
        let root = tree.len() - 1;
        assert_eq!(sem[root], BTreeSet::from([SceneLabel::ParkingLot]));
        assert_eq!(
            per[root],
            BTreeSet::from([PerceptionSymbol::ObjectDetector("cone".into())])
        );
        assert!(gr[root].contains(&GroundingSymbol::Relation(SpatialRelation::Nearest)));
        assert!(gr[root].contains(&GroundingSymbol::Region(SceneLabel::ParkingLot)));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let reg = ClassifierRegistry::default();
        let mut c = small_config();
        c.nouns = vec!["giraffe".into()];
        assert!(matches!(generate(&c, &reg), Err(Error::InvalidConfig(_))));
        let mut c = small_config();
        c.counts = [0; 4];
        assert!(matches!(generate(&c, &reg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn split_fractions() {
        let reg = ClassifierRegistry::default();
        let corpus = generate(&small_config(), &reg).unwrap();
        for f in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                split(&corpus, f, 1),
                Err(Error::InvalidFraction(_))
            ));
        }
        let (train, test) = split(&corpus, 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (16, 4));
        for t in Template::ALL {
            assert!(test.iter().any(|e| e.template == t));
        }
    }

    #[test]
    fn empty_evaluation_is_well_formed() {
        let reg = ClassifierRegistry::default();
        let models = Models::untrained(0.0);
        let r = evaluate(&models, &[], &reg, &WorldModel::default()).unwrap();
        assert_eq!(r.examples, 0);
        assert_eq!(r.semantic_rate(), 0.0);
    }
}
