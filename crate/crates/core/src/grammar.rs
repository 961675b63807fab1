//! Tokenizer, closed-lexicon chart parser and bracketed tree format for
//! navigation instructions.
//!
//! The grammar is
//!
//! ```text
//! VP -> verb PP
//! PP -> prep NP [PP]
//! NP -> det [superlative] [color] noun
//! ```
//!
//! where nouns are object classes or region words from the classifier
//! registry. A trailing locative ("in the kitchen") is the optional PP of the
//! PP that governs the object NP.

use std::collections::HashMap;
use std::fmt;

use crate::world::ClassifierRegistry;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PhraseCategory {
    Vp,
    Pp,
    Np,
}

impl PhraseCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            PhraseCategory::Vp => "VP",
            PhraseCategory::Pp => "PP",
            PhraseCategory::Np => "NP",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "VP" => Some(PhraseCategory::Vp),
            "PP" => Some(PhraseCategory::Pp),
            "NP" => Some(PhraseCategory::Np),
            _ => None,
        }
    }
}

impl fmt::Display for PhraseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A node of the parse tree. `index` is the node's post-order rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phrase {
    pub category: PhraseCategory,
    pub tokens: Vec<Token>,
    pub children: Vec<Phrase>,
    pub index: usize,
}

impl Phrase {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ParseTree {
    root: Phrase,
    source_text: String,
}

/// Trees compare by structure; the source text is not part of identity.
impl PartialEq for ParseTree {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Eq for ParseTree {}

impl ParseTree {
    /// Wraps a phrase tree, renumbering every node in post-order.
    pub fn new(mut root: Phrase, source_text: impl Into<String>) -> Self {
        fn number(p: &mut Phrase, next: &mut usize) {
            for c in &mut p.children {
                number(c, next);
            }
            p.index = *next;
            *next += 1;
        }
        let mut next = 0;
        number(&mut root, &mut next);
        ParseTree {
            root,
            source_text: source_text.into(),
        }
    }

    pub fn root(&self) -> &Phrase {
        &self.root
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// All phrases indexed by their post-order rank.
    pub fn phrases(&self) -> Vec<&Phrase> {
        fn walk<'a>(p: &'a Phrase, out: &mut Vec<&'a Phrase>) {
            for c in &p.children {
                walk(c, out);
            }
            out.push(p);
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn len(&self) -> usize {
        fn count(p: &Phrase) -> usize {
            1 + p.children.iter().map(count).sum::<usize>()
        }
        count(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> Vec<&Token> {
        fn walk<'a>(p: &'a Phrase, out: &mut Vec<&'a Token>) {
            out.extend(p.tokens.iter());
            for c in &p.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// Lowercases, strips punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Result<Vec<Token>, Error> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    let tokens: Vec<Token> = cleaned
        .split_whitespace()
        .enumerate()
        .map(|(position, w)| Token {
            text: w.to_string(),
            position,
        })
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyInstruction);
    }
    Ok(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    Verb,
    Prep,
    Det,
    Superlative,
    Color,
    Noun,
}

pub const VERBS: [&str; 4] = ["go", "navigate", "drive", "walk"];
pub const PREPOSITIONS: [&str; 2] = ["to", "in"];
pub const SUPERLATIVES: [&str; 3] = ["nearest", "farthest", "closest"];

/// Closed lexicon. Entries may span several words ("parking lot").
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<Vec<String>, Terminal>,
    longest: usize,
}

impl Lexicon {
    pub fn from_registry(registry: &ClassifierRegistry) -> Self {
        let mut lex = Lexicon {
            entries: HashMap::new(),
            longest: 1,
        };
        for v in VERBS {
            lex.add(v, Terminal::Verb);
        }
        for p in PREPOSITIONS {
            lex.add(p, Terminal::Prep);
        }
        lex.add("the", Terminal::Det);
        for s in SUPERLATIVES {
            lex.add(s, Terminal::Superlative);
        }
        for c in registry.colors() {
            lex.add(c, Terminal::Color);
        }
        for c in registry.classes() {
            lex.add(c, Terminal::Noun);
        }
        for (words, _) in registry.region_words() {
            lex.add(words, Terminal::Noun);
        }
        lex
    }

    fn add(&mut self, words: &str, t: Terminal) {
        let key: Vec<String> = words.split_whitespace().map(str::to_string).collect();
        self.longest = self.longest.max(key.len());
        self.entries.insert(key, t);
    }

    /// Greedy longest-match segmentation into lexical items.
    fn lex(&self, tokens: &[Token]) -> Result<Vec<LexItem>, Error> {
        let mut items = Vec::new();
        let mut k = 0;
        while k < tokens.len() {
            let mut found = None;
            for len in (1..=self.longest.min(tokens.len() - k)).rev() {
                let key: Vec<String> = tokens[k..k + len].iter().map(|t| t.text.clone()).collect();
                if let Some(&t) = self.entries.get(&key) {
                    found = Some((t, len));
                    break;
                }
            }
            let (terminal, len) = found.ok_or_else(|| out_of_grammar(&tokens[k]))?;
            items.push(LexItem {
                terminal,
                start: k,
                len,
            });
            k += len;
        }
        Ok(items)
    }
}

fn out_of_grammar(t: &Token) -> Error {
    Error::OutOfGrammar {
        token: t.text.clone(),
        position: t.position,
    }
}

#[derive(Debug, Clone, Copy)]
struct LexItem {
    terminal: Terminal,
    start: usize,
    len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    T(Terminal),
    N(PhraseCategory),
}

use PhraseCategory::{Np, Pp, Vp};
use Sym::{N, T};
use Terminal::{Color, Det, Noun, Prep, Superlative, Verb};

const RULES: &[(PhraseCategory, &[Sym])] = &[
    (Vp, &[T(Verb), N(Pp)]),
    (Pp, &[T(Prep), N(Np)]),
    (Pp, &[T(Prep), N(Np), N(Pp)]),
    (Np, &[T(Det), T(Noun)]),
    (Np, &[T(Det), T(Superlative), T(Noun)]),
    (Np, &[T(Det), T(Color), T(Noun)]),
    (Np, &[T(Det), T(Superlative), T(Color), T(Noun)]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Leaf(usize),
    Sub(PhraseCategory, usize, usize),
}

#[derive(Debug, Clone)]
struct Derivation {
    parts: Vec<Part>,
    phrases: usize,
    right_depth: usize,
}

impl Derivation {
    /// Fewer phrases first, then deeper right attachment.
    fn better_than(&self, other: &Derivation) -> bool {
        (self.phrases, std::cmp::Reverse(self.right_depth))
            < (other.phrases, std::cmp::Reverse(other.right_depth))
    }
}

type Chart = HashMap<(PhraseCategory, usize, usize), Derivation>;

/// Parser for the instruction grammar over a registry-derived lexicon.
#[derive(Debug, Clone)]
pub struct Grammar {
    lexicon: Lexicon,
}

impl Grammar {
    pub fn new(registry: &ClassifierRegistry) -> Self {
        Grammar {
            lexicon: Lexicon::from_registry(registry),
        }
    }

    pub fn parse_text(&self, text: &str) -> Result<ParseTree, Error> {
        let tokens = tokenize(text)?;
        self.parse_with_source(&tokens, text)
    }

    pub fn parse(&self, tokens: &[Token]) -> Result<ParseTree, Error> {
        let source = tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        self.parse_with_source(tokens, &source)
    }

    fn parse_with_source(&self, tokens: &[Token], source: &str) -> Result<ParseTree, Error> {
        if tokens.is_empty() {
            return Err(Error::EmptyInstruction);
        }
        let items = self.lexicon.lex(tokens)?;
        let chart = cky(&items);
        let Some(best) = chart.get(&(Vp, 0, items.len())) else {
            let bad = first_unviable(&items).unwrap_or(items.len() - 1);
            return Err(out_of_grammar(&tokens[items[bad].start]));
        };
        let root = build(Vp, best, &chart, &items, tokens);
        Ok(ParseTree::new(root, source))
    }
}

/// Generalized CKY: best derivation of every (category, span), filled by
/// increasing span length.
fn cky(items: &[LexItem]) -> Chart {
    let n = items.len();
    let mut chart: Chart = HashMap::new();
    for len in 1..=n {
        for start in 0..=n - len {
            let end = start + len;
            for &(lhs, rhs) in RULES {
                let mut found = Vec::new();
                let mut parts = Vec::new();
                segment(rhs, start, end, items, &chart, &mut parts, &mut |parts| {
                    found.push(score(parts, &chart));
                });
                for d in found {
                    match chart.get(&(lhs, start, end)) {
                        Some(existing) if !d.better_than(existing) => {}
                        _ => {
                            chart.insert((lhs, start, end), d);
                        }
                    }
                }
            }
        }
    }
    chart
}

/// Enumerates every split of `[start, end)` into consecutive non-empty pieces
/// matching `rhs`.
fn segment(
    rhs: &[Sym],
    start: usize,
    end: usize,
    items: &[LexItem],
    chart: &Chart,
    parts: &mut Vec<Part>,
    emit: &mut dyn FnMut(&[Part]),
) {
    let Some((&first, rest)) = rhs.split_first() else {
        if start == end {
            emit(parts);
        }
        return;
    };
    if start >= end || end - start < rhs.len() {
        return;
    }
    let max_end = end - rest.len();
    match first {
        T(t) => {
            if items[start].terminal == t {
                parts.push(Part::Leaf(start));
                segment(rest, start + 1, end, items, chart, parts, emit);
                parts.pop();
            }
        }
        N(cat) => {
            for mid in start + 1..=max_end {
                if chart.contains_key(&(cat, start, mid)) {
                    parts.push(Part::Sub(cat, start, mid));
                    segment(rest, mid, end, items, chart, parts, emit);
                    parts.pop();
                }
            }
        }
    }
}

fn score(parts: &[Part], chart: &Chart) -> Derivation {
    let mut phrases = 1;
    let mut right_depth = 1;
    for (k, p) in parts.iter().enumerate() {
        if let Part::Sub(cat, s, e) = *p {
            let sub = &chart[&(cat, s, e)];
            phrases += sub.phrases;
            if k + 1 == parts.len() {
                right_depth += sub.right_depth;
            }
        }
    }
    Derivation {
        parts: parts.to_vec(),
        phrases,
        right_depth,
    }
}

fn build(
    cat: PhraseCategory,
    d: &Derivation,
    chart: &Chart,
    items: &[LexItem],
    tokens: &[Token],
) -> Phrase {
    let mut phrase = Phrase {
        category: cat,
        tokens: Vec::new(),
        children: Vec::new(),
        index: 0,
    };
    for p in &d.parts {
        match *p {
            Part::Leaf(k) => {
                let it = items[k];
                phrase
                    .tokens
                    .extend(tokens[it.start..it.start + it.len].iter().cloned());
            }
            Part::Sub(c, s, e) => {
                phrase
                    .children
                    .push(build(c, &chart[&(c, s, e)], chart, items, tokens));
            }
        }
    }
    phrase
}

/// Earley recognizer used for diagnostics: index of the first lexical item
/// after which no sentence of the grammar can continue, if any.
fn first_unviable(items: &[LexItem]) -> Option<usize> {
    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    struct State {
        rule: usize, // RULES.len() is the augmented start rule S -> VP
        dot: usize,
        origin: usize,
    }
    const START_RHS: &[Sym] = &[N(Vp)];
    let rhs = |r: usize| {
        if r == RULES.len() {
            START_RHS
        } else {
            RULES[r].1
        }
    };
    let lhs = |r: usize| {
        if r == RULES.len() {
            None
        } else {
            Some(RULES[r].0)
        }
    };

    let mut columns: Vec<Vec<State>> = vec![Vec::new(); items.len() + 1];
    columns[0].push(State {
        rule: RULES.len(),
        dot: 0,
        origin: 0,
    });
    for k in 0..=items.len() {
        let mut i = 0;
        while i < columns[k].len() {
            let st = columns[k][i];
            i += 1;
            match rhs(st.rule).get(st.dot) {
                Some(N(cat)) => {
                    for (r, &(l, _)) in RULES.iter().enumerate() {
                        let new = State {
                            rule: r,
                            dot: 0,
                            origin: k,
                        };
                        if l == *cat && !columns[k].contains(&new) {
                            columns[k].push(new);
                        }
                    }
                }
                Some(T(_)) => {}
                None => {
                    let Some(done) = lhs(st.rule) else { continue };
                    let parents: Vec<State> = columns[st.origin]
                        .iter()
                        .filter(|p| rhs(p.rule).get(p.dot) == Some(&N(done)))
                        .copied()
                        .collect();
                    for p in parents {
                        let new = State {
                            dot: p.dot + 1,
                            ..p
                        };
                        if !columns[k].contains(&new) {
                            columns[k].push(new);
                        }
                    }
                }
            }
        }
        if k == items.len() {
            break;
        }
        let next: Vec<State> = columns[k]
            .iter()
            .filter(|st| rhs(st.rule).get(st.dot) == Some(&T(items[k].terminal)))
            .map(|st| State {
                dot: st.dot + 1,
                ..*st
            })
            .collect();
        if next.is_empty() {
            return Some(k);
        }
        columns[k + 1] = next;
    }
    None
}

/// Bracketed form, e.g. `(VP go (PP to (NP the nearest ball)))`.
pub fn dump_tree(tree: &ParseTree) -> String {
    fn write(p: &Phrase, out: &mut String) {
        out.push('(');
        out.push_str(p.category.as_str());
        for t in &p.tokens {
            out.push(' ');
            out.push_str(&t.text);
        }
        for c in &p.children {
            out.push(' ');
            write(c, out);
        }
        out.push(')');
    }
    let mut out = String::new();
    write(&tree.root, &mut out);
    out
}

/// Reads the bracketed form written by [`dump_tree`].
pub fn load_tree(serialized: &str) -> Result<ParseTree, Error> {
    let mut reader = TreeReader {
        src: serialized.as_bytes(),
        pos: 0,
        next_token: 0,
    };
    reader.skip_ws();
    let root = reader.phrase()?;
    reader.skip_ws();
    if reader.pos != reader.src.len() {
        return Err(reader.error("trailing input after tree"));
    }
    let text = {
        let tree = ParseTree::new(root.clone(), String::new());
        tree.tokens()
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(ParseTree::new(root, text))
}

struct TreeReader<'a> {
    src: &'a [u8],
    pos: usize,
    next_token: usize,
}

impl TreeReader<'_> {
    fn error(&self, reason: &str) -> Error {
        Error::MalformedTree {
            offset: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn word(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn phrase(&mut self) -> Result<Phrase, Error> {
        if self.src.get(self.pos) != Some(&b'(') {
            return Err(self.error("expected '('"));
        }
        self.pos += 1;
        let cat_at = self.pos;
        let cat = self.word().to_string();
        let category = PhraseCategory::parse(&cat).ok_or(Error::MalformedTree {
            offset: cat_at,
            reason: format!("unknown phrase category {cat:?}"),
        })?;
        let mut phrase = Phrase {
            category,
            tokens: Vec::new(),
            children: Vec::new(),
            index: 0,
        };
        loop {
            self.skip_ws();
            match self.src.get(self.pos) {
                None => return Err(self.error("unexpected end of input, expected ')'")),
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                Some(b'(') => phrase.children.push(self.phrase()?),
                Some(_) => {
                    let at = self.pos;
                    let w = self.word().to_lowercase();
                    if w.is_empty() || !w.chars().all(char::is_alphanumeric) {
                        return Err(Error::MalformedTree {
                            offset: at,
                            reason: format!("invalid token {w:?}"),
                        });
                    }
                    phrase.tokens.push(Token {
                        text: w,
                        position: self.next_token,
                    });
                    self.next_token += 1;
                }
            }
        }
        if phrase.children.is_empty() && phrase.tokens.is_empty() {
            return Err(self.error("phrase without tokens or children"));
        }
        Ok(phrase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grammar() -> Grammar {
        Grammar::new(&ClassifierRegistry::default())
    }

    fn words(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        let t = tokenize("Go to the nearest ball.").unwrap();
        assert_eq!(words(&t), ["go", "to", "the", "nearest", "ball"]);
        assert_eq!(t[4].position, 4);
        assert_eq!(
            tokenize("navigate to the nearest red ball").unwrap().len(),
            6
        );
        assert!(matches!(tokenize(""), Err(Error::EmptyInstruction)));
        assert!(matches!(tokenize(" ?! "), Err(Error::EmptyInstruction)));
    }

    #[test]
    fn parses_locative_as_sibling_pp() {
        let tree = grammar()
            .parse_text("go to the farthest cup in the kitchen")
            .unwrap();
        assert_eq!(
            dump_tree(&tree),
            "(VP go (PP to (NP the farthest cup) (PP in (NP the kitchen))))"
        );
        assert_eq!(tree.len(), 5);
        let phrases = tree.phrases();
        assert_eq!(words(&phrases[0].tokens), ["the", "farthest", "cup"]);
        assert_eq!(words(&phrases[1].tokens), ["the", "kitchen"]);
        assert_eq!(phrases[2].category, PhraseCategory::Pp);
        assert_eq!(phrases[4].category, PhraseCategory::Vp);
    }

    #[test]
    fn minimal_instruction_has_three_phrases() {
        let tree = grammar().parse_text("go to the nearest ball").unwrap();
        assert_eq!(tree.len(), 3);
        assert_eq!(dump_tree(&tree), "(VP go (PP to (NP the nearest ball)))");
    }

    #[test]
    fn multiword_regions_and_aliases() {
        let g = grammar();
        let tree = g
            .parse_text("go to the nearest suitcase in the parking lot")
            .unwrap();
        assert_eq!(
            dump_tree(&tree),
            "(VP go (PP to (NP the nearest suitcase) (PP in (NP the parking lot))))"
        );
        assert!(g.parse_text("go to the farthest ball in the lab").is_ok());
        assert!(g.parse_text("drive to the closest blue cone").is_ok());
    }

    #[test]
    fn out_of_grammar_reports_first_bad_token() {
        let g = grammar();
        match g.parse_text("paint the fence") {
            Err(Error::OutOfGrammar { token, position }) => {
                assert_eq!(token, "paint");
                assert_eq!(position, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        match g.parse_text("go the ball") {
            Err(Error::OutOfGrammar { token, .. }) => assert_eq!(token, "the"),
            other => panic!("unexpected {other:?}"),
        }
        match g.parse_text("go to the") {
            Err(Error::OutOfGrammar { token, .. }) => assert_eq!(token, "the"),
            other => panic!("unexpected {other:?}"),
        }
        match g.parse_text("go to the red nearest ball") {
            Err(Error::OutOfGrammar { token, .. }) => assert_eq!(token, "nearest"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn post_order_indices_are_dense() {
        let tree = grammar()
            .parse_text("walk to the nearest red cup in the office in the hallway")
            .unwrap();
        let idx: Vec<usize> = tree.phrases().iter().map(|p| p.index).collect();
        assert_eq!(idx, (0..tree.len()).collect::<Vec<_>>());
    }

    #[test]
    fn load_single_np() {
        let tree = load_tree("(NP the ball)").unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root().tokens.len(), 2);
        assert_eq!(tree.root().category, PhraseCategory::Np);
    }

    #[test]
    fn malformed_trees_report_offsets() {
        match load_tree("(VP go (PP") {
            Err(Error::MalformedTree { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_tree("(XP a)"),
            Err(Error::MalformedTree { offset: 1, .. })
        ));
        assert!(matches!(
            load_tree("(NP a))"),
            Err(Error::MalformedTree { offset: 6, .. })
        ));
        assert!(matches!(
            load_tree("(NP)"),
            Err(Error::MalformedTree { .. })
        ));
    }

    #[test]
    fn dump_load_round_trip() {
        let g = grammar();
        for s in [
            "go to the nearest ball",
            "go to the farthest cup in the kitchen",
            "navigate to the nearest red ball",
            "go to the nearest suitcase in the parking lot",
        ] {
            let tree = g.parse_text(s).unwrap();
            let back = load_tree(&dump_tree(&tree)).unwrap();
            assert_eq!(back, tree);
            assert_eq!(back.tokens(), tree.tokens());
        }
    }
}
