//! Subject-verb-object triples from utterances, and facts from triples.
//!
//! The grammar is deliberately shallow: within one sentence a subject is a
//! pronoun or content word directly before a known verb (modals and a few
//! adverbs may sit in between), and the object is everything after the verb
//! up to a clause boundary, minus leading determiners.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epistemic::{Const, Fact, FactStore};
use crate::text::{split_sentences, tokenize, EntityPattern, Utterance};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("{file} line {line}: {message}")]
    Config { file: &'static str, line: usize, message: String },
    #[error(transparent)]
    Facts(#[from] crate::epistemic::EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const PRONOUNS: &[&str] = &["i", "we", "you", "he", "she", "they", "it", "someone", "everyone"];
const INTERVENING: &[&str] = &[
    "would", "will", "could", "should", "might", "can", "do", "does", "did", "really", "also", "just", "definitely",
    "usually", "always", "still", "mostly", "generally", "actually", "certainly", "probably",
];
const DETERMINERS: &[&str] = &["a", "an", "the", "some", "my", "our", "your", "any", "more"];
const BOUNDARIES: &[&str] = &["as", "because", "but", "so", "since", "although", "though", "while", "if", "when", "or"];
const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for", "with", "by", "from", "as", "that",
    "which", "who", "what", "where", "when", "how", "why", "if", "so", "because", "since", "not", "no", "there",
    "here", "this", "these", "those",
];

/// Half-open token range `[start, end)` within a sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    fn over(tokens: &[String], start: usize, end: usize) -> Self {
        Span { start, end, text: tokens[start..end].join(" ") }
    }

    pub fn tokens(&self) -> Vec<String> {
        self.text.split_whitespace().map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Span,
    pub verb: Span,
    pub object: Span,
    pub source_sentence: usize,
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject.text, self.verb.text, self.object.text)
    }
}

/// Maps surface forms to canonical atoms and verbs to verb classes.
///
/// Canonical atoms are `attribute_value`, e.g. `workload_light`. Pattern
/// entries match a single token and substitute it for `*` in the atom.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    verbs: BTreeMap<String, String>,
    phrases: Vec<(Vec<String>, String)>,
    patterns: Vec<(EntityPattern, String)>,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_verb(&mut self, class: &str, surface: &str) {
        self.verbs.insert(surface.to_lowercase(), class.to_string());
    }

    pub fn add_phrase(&mut self, phrase: &str, atom: &str) {
        let toks = tokenize(phrase);
        if toks.is_empty() {
            return;
        }
        self.phrases.retain(|(p, _)| *p != toks);
        self.phrases.push((toks, atom.to_string()));
        // longest phrase first, then lexicographic, so lookups are greedy
        self.phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    }

    pub fn add_pattern(&mut self, pattern: &str, atom_template: &str) -> Result<(), String> {
        self.patterns.push((EntityPattern::new("LEXICON", pattern)?, atom_template.to_string()));
        Ok(())
    }

    pub fn verb_class(&self, word: &str) -> Option<&str> {
        self.verbs.get(word).map(String::as_str)
    }

    pub fn verb_classes(&self) -> impl Iterator<Item = &str> {
        let mut v: Vec<&str> = self.verbs.values().map(String::as_str).collect();
        v.sort_unstable();
        v.dedup();
        v.into_iter()
    }

    /// Atoms found in a token sequence, left to right, longest phrase first.
    pub fn canonicalize(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if let Some((len, atom)) = self
                .phrases
                .iter()
                .find(|(p, _)| tokens[i..].starts_with(p))
                .map(|(p, a)| (p.len(), a.clone()))
            {
                out.push(atom);
                i += len;
                continue;
            }
            if let Some((_, tmpl)) = self.patterns.iter().find(|(p, _)| p.matches(&tokens[i])) {
                out.push(tmpl.replace('*', &tokens[i]));
            }
            i += 1;
        }
        out
    }

    /// Every atom the lexicon can produce, ignoring pattern templates.
    pub fn atoms(&self) -> impl Iterator<Item = &str> {
        self.phrases.iter().map(|(_, a)| a.as_str())
    }
}

/// Lexicon file:
///
/// ```text
/// [verbs]
/// prefer: prefer prefers preferred
/// [synonyms]
/// lighter workload => workload_light
/// [patterns]
/// [a-z]+[0-9]+ => course_*
/// ```
pub fn parse_lexicon(text: &str) -> Result<SynonymLexicon, ExtractionError> {
    let err = |line: usize, message: String| ExtractionError::Config { file: "lexicon", line, message };
    let mut lex = SynonymLexicon::new();
    let mut section = "";
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "verbs" => "verbs",
                "synonyms" => "synonyms",
                "patterns" => "patterns",
                other => return Err(err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        match section {
            "verbs" => {
                let (class, words) = line.split_once(':').ok_or_else(|| err(line_no, "expected `class: words`".into()))?;
                let class = class.trim();
                if class.is_empty() || words.split_whitespace().next().is_none() {
                    return Err(err(line_no, "empty verb class or word list".into()));
                }
                for w in words.split_whitespace() {
                    lex.add_verb(class, w);
                }
            }
            "synonyms" | "patterns" => {
                let (lhs, rhs) = line.split_once("=>").ok_or_else(|| err(line_no, "expected `surface => atom`".into()))?;
                let (lhs, atom) = (lhs.trim(), rhs.trim());
                if !is_atom(&atom.replace('*', "x")) {
                    return Err(err(line_no, format!("{atom:?} is not a lowercase atom")));
                }
                if section == "synonyms" {
                    if tokenize(lhs).is_empty() {
                        return Err(err(line_no, "empty phrase".into()));
                    }
                    lex.add_phrase(lhs, atom);
                } else {
                    lex.add_pattern(lhs, atom).map_err(|e| err(line_no, e))?;
                }
            }
            _ => return Err(err(line_no, "entry outside of a section".into())),
        }
    }
    Ok(lex)
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<SynonymLexicon, ExtractionError> {
    parse_lexicon(&std::fs::read_to_string(path)?)
}

fn is_atom(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_lowercase()) && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_subject_word(tok: &str, lex: &SynonymLexicon) -> bool {
    PRONOUNS.contains(&tok)
        || (tok.chars().all(|c| c.is_ascii_alphabetic())
            && !FUNCTION_WORDS.contains(&tok)
            && !INTERVENING.contains(&tok)
            && lex.verb_class(tok).is_none())
}

/// Index of the next known verb at or after `from`, skipping intervening
/// modals and adverbs only.
fn verb_after(tokens: &[String], from: usize, lex: &SynonymLexicon) -> Option<usize> {
    let mut j = from;
    while j < tokens.len() && INTERVENING.contains(&tokens[j].as_str()) {
        j += 1;
    }
    (j < tokens.len() && lex.verb_class(&tokens[j]).is_some()).then_some(j)
}

fn sentence_triples(tokens: &[String], sentence: usize, lex: &SynonymLexicon) -> Vec<Triple> {
    let mut out = Vec::new();
    for s in 0..tokens.len() {
        if !is_subject_word(&tokens[s], lex) {
            continue;
        }
        let Some(v) = verb_after(tokens, s + 1, lex) else { continue };
        let mut start = v + 1;
        while start < tokens.len() && DETERMINERS.contains(&tokens[start].as_str()) {
            start += 1;
        }
        let mut end = start;
        while end < tokens.len() {
            let t = tokens[end].as_str();
            if BOUNDARIES.contains(&t) || (PRONOUNS.contains(&t) && verb_after(tokens, end + 1, lex).is_some()) {
                break;
            }
            end += 1;
        }
        if end > start {
            out.push(Triple {
                subject: Span::over(tokens, s, s + 1),
                verb: Span::over(tokens, v, v + 1),
                object: Span::over(tokens, start, end),
                source_sentence: sentence,
            });
        }
    }
    out
}

/// Triples of every sentence of the utterance, in sentence then position order.
pub fn extract_triples(utterance: &Utterance, lexicon: &SynonymLexicon) -> Vec<Triple> {
    split_sentences(&utterance.raw)
        .iter()
        .enumerate()
        .flat_map(|(i, s)| sentence_triples(&tokenize(s), i, lexicon))
        .collect()
}

/// Object pattern of an assertion rule: `prefix_Var`, a bare atom, or a bare
/// variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectPattern {
    prefix: String,
    variable: Option<String>,
}

impl ObjectPattern {
    fn parse(s: &str) -> Option<Self> {
        let split = s.char_indices().find(|(i, c)| c.is_ascii_uppercase() && (*i == 0 || s[..*i].ends_with('_')));
        match split {
            Some((i, _)) => {
                let var = &s[i..];
                if !var.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return None;
                }
                Some(ObjectPattern { prefix: s[..i].to_string(), variable: Some(var.to_string()) })
            }
            None => is_atom(s).then(|| ObjectPattern { prefix: s.to_string(), variable: None }),
        }
    }

    fn matches(&self, atom: &str) -> Option<Option<(String, String)>> {
        match &self.variable {
            None => (atom == self.prefix).then_some(None),
            Some(v) => {
                let rest = atom.strip_prefix(&self.prefix)?;
                (!rest.is_empty()).then(|| Some((v.clone(), rest.to_string())))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TemplateArg {
    Atom(String),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactAssertionRule {
    /// `None` matches any verb class.
    pub verb_class: Option<String>,
    pub object: ObjectPattern,
    predicate: String,
    args: Vec<TemplateArg>,
    pub line: usize,
}

impl FactAssertionRule {
    fn apply(&self, verb_class: Option<&str>, atom: &str) -> Option<Fact> {
        if let Some(want) = &self.verb_class {
            if verb_class != Some(want.as_str()) {
                return None;
            }
        }
        let binding = self.object.matches(atom)?;
        let args = self
            .args
            .iter()
            .map(|a| match a {
                TemplateArg::Atom(s) => Const::atom(s.clone()),
                TemplateArg::Var(_) => Const::atom(binding.as_ref().map(|(_, v)| v.clone()).unwrap_or_default()),
            })
            .collect();
        Some(Fact::new(self.predicate.clone(), args))
    }
}

/// Rule file: one rule per line, `verb_class | object_pattern => template`,
/// with `*` as the any-verb class and `#` comments.
pub fn parse_assertion_rules(text: &str) -> Result<Vec<FactAssertionRule>, ExtractionError> {
    let err = |line: usize, message: String| ExtractionError::Config { file: "assertion rules", line, message };
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (trigger, template) = line.split_once("=>").ok_or_else(|| err(line_no, "missing `=>`".into()))?;
        let (verb, object) = trigger.split_once('|').ok_or_else(|| err(line_no, "missing `|` in trigger".into()))?;
        let verb = verb.trim();
        let verb_class = match verb {
            "*" => None,
            v if is_atom(v) => Some(v.to_string()),
            v => return Err(err(line_no, format!("bad verb class {v:?}"))),
        };
        let object = ObjectPattern::parse(object.trim()).ok_or_else(|| err(line_no, format!("bad object pattern {:?}", object.trim())))?;
        let template = template.trim().trim_end_matches('.');
        let (predicate, args) = template
            .strip_suffix(')')
            .and_then(|t| t.split_once('('))
            .ok_or_else(|| err(line_no, format!("bad fact template {template:?}")))?;
        let predicate = predicate.trim();
        if !is_atom(predicate) {
            return Err(err(line_no, format!("bad predicate {predicate:?}")));
        }
        let args = args
            .split(',')
            .map(str::trim)
            .map(|a| {
                if a.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
                    if object.variable.as_deref() != Some(a) {
                        return Err(err(line_no, format!("template variable {a} is not bound by the trigger")));
                    }
                    Ok(TemplateArg::Var(a.to_string()))
                } else if is_atom(a) {
                    Ok(TemplateArg::Atom(a.to_string()))
                } else {
                    Err(err(line_no, format!("bad template argument {a:?}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rules.push(FactAssertionRule { verb_class, object, predicate: predicate.to_string(), args, line: line_no });
    }
    Ok(rules)
}

pub fn load_assertion_rules(path: impl AsRef<Path>) -> Result<Vec<FactAssertionRule>, ExtractionError> {
    parse_assertion_rules(&std::fs::read_to_string(path)?)
}

/// Ground facts implied by the triples.
pub fn assert_facts(
    triples: &[Triple],
    rules: &[FactAssertionRule],
    lexicon: &SynonymLexicon,
) -> Result<FactStore, ExtractionError> {
    let mut store = FactStore::new();
    for t in triples {
        let verb_class = t.verb.text.split_whitespace().last().and_then(|w| lexicon.verb_class(w));
        for atom in lexicon.canonicalize(&t.object.tokens()) {
            for r in rules {
                if let Some(f) = r.apply(verb_class, &atom) {
                    store.insert(f)?;
                }
            }
        }
    }
    Ok(store)
}

/// Triples produced by an external parser: `subject TAB verb TAB object`
/// per line. Spans index into the concatenation `subject verb object`, and
/// the source sentence is the line's position among non-empty lines.
pub fn parse_triple_file(text: &str) -> Result<Vec<Triple>, ExtractionError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = raw.split('\t').collect();
        let [s, v, o] = parts.as_slice() else {
            return Err(ExtractionError::Config {
                file: "triples",
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", parts.len()),
            });
        };
        let (s, v, o) = (tokenize(s), tokenize(v), tokenize(o));
        if s.is_empty() || v.is_empty() || o.is_empty() {
            return Err(ExtractionError::Config { file: "triples", line: i + 1, message: "empty field".into() });
        }
        let all: Vec<String> = s.iter().chain(&v).chain(&o).cloned().collect();
        let (a, b) = (s.len(), s.len() + v.len());
        out.push(Triple {
            subject: Span::over(&all, 0, a),
            verb: Span::over(&all, a, b),
            object: Span::over(&all, b, all.len()),
            source_sentence: out.len(),
        });
    }
    Ok(out)
}
