//! Course ontology: a small triple store with pattern queries, course
//! records materialised from the triples, and fact enrichment.
//!
//! File format: `subject predicate object` per line, whitespace separated.
//! The object may be a double-quoted literal. `#` starts a comment outside
//! quotes. Course attributes use the predicates `title`, `easiness`,
//! `workload`, `class_size`, `timing`, `helpfulness` and `topic` (repeatable).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epistemic::{Const, EngineError, Fact, FactStore};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("ontology line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("ontology line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("unknown course attribute {0:?}")]
    UnknownAttribute(String),
    #[error("invalid value {value:?} for attribute {attribute}")]
    InvalidValue { attribute: String, value: String },
    #[error(transparent)]
    Facts(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    Atom(String),
    Literal(String),
}

impl Node {
    pub fn text(&self) -> &str {
        match self {
            Node::Atom(s) | Node::Literal(s) => s,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Atom(s) => f.write_str(s),
            Node::Literal(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripleFact {
    pub subject: String,
    pub predicate: String,
    pub object: Node,
}

impl TripleFact {
    pub fn new(subject: &str, predicate: &str, object: Node) -> Self {
        TripleFact { subject: subject.to_string(), predicate: predicate.to_string(), object }
    }
}

macro_rules! ordinal_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "expected one of {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

ordinal_enum!(Rating { Low => "low", Medium => "medium", High => "high" });
ordinal_enum!(Workload { Light => "light", Medium => "medium", Heavy => "heavy" });
ordinal_enum!(ClassSize { Small => "small", Medium => "medium", Large => "large" });
ordinal_enum!(Timing { Morning => "morning", Afternoon => "afternoon", Evening => "evening" });

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseRecord {
    pub code: String,
    pub title: Option<String>,
    pub easiness: Option<Rating>,
    pub workload: Option<Workload>,
    pub class_size: Option<ClassSize>,
    pub timing: Option<Timing>,
    pub helpfulness: Option<Rating>,
    pub topics: BTreeSet<String>,
}

impl CourseRecord {
    pub fn value(&self, attr: Attribute) -> Vec<String> {
        let one = |o: Option<&'static str>| o.map(str::to_string).into_iter().collect();
        match attr {
            Attribute::Easiness => one(self.easiness.map(Rating::as_str)),
            Attribute::Workload => one(self.workload.map(Workload::as_str)),
            Attribute::ClassSize => one(self.class_size.map(ClassSize::as_str)),
            Attribute::Timing => one(self.timing.map(Timing::as_str)),
            Attribute::Helpfulness => one(self.helpfulness.map(Rating::as_str)),
            Attribute::Topic => self.topics.iter().cloned().collect(),
        }
    }

    pub fn satisfies(&self, c: &Constraint) -> bool {
        self.value(c.attribute).contains(&c.value)
    }
}

/// Searchable course attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Easiness,
    Workload,
    ClassSize,
    Timing,
    Helpfulness,
    Topic,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Easiness,
        Attribute::Workload,
        Attribute::ClassSize,
        Attribute::Timing,
        Attribute::Helpfulness,
        Attribute::Topic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Easiness => "easiness",
            Attribute::Workload => "workload",
            Attribute::ClassSize => "class_size",
            Attribute::Timing => "timing",
            Attribute::Helpfulness => "helpfulness",
            Attribute::Topic => "topic",
        }
    }

    /// Predicate used when the attribute is re-expressed as a fact.
    pub fn fact_predicate(self) -> &'static str {
        match self {
            Attribute::Easiness => "course_easiness",
            Attribute::Workload => "course_load",
            Attribute::ClassSize => "course_size",
            Attribute::Timing => "course_timing",
            Attribute::Helpfulness => "course_helpfulness",
            Attribute::Topic => "course_topic",
        }
    }

    fn check_value(self, value: &str) -> Result<(), String> {
        match self {
            Attribute::Easiness | Attribute::Helpfulness => value.parse::<Rating>().map(|_| ()),
            Attribute::Workload => value.parse::<Workload>().map(|_| ()),
            Attribute::ClassSize => value.parse::<ClassSize>().map(|_| ()),
            Attribute::Timing => value.parse::<Timing>().map(|_| ()),
            Attribute::Topic => Ok(()),
        }
    }
}

impl FromStr for Attribute {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, KbError> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| KbError::UnknownAttribute(s.to_string()))
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub attribute: Attribute,
    pub value: String,
}

impl Constraint {
    /// Validate `attribute = value` against the schema.
    pub fn parse(attribute: &str, value: &str) -> Result<Self, KbError> {
        let attribute: Attribute = attribute.parse()?;
        attribute
            .check_value(value)
            .map_err(|_| KbError::InvalidValue { attribute: attribute.to_string(), value: value.to_string() })?;
        Ok(Constraint { attribute, value: value.to_string() })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.attribute, self.value)
    }
}

/// Component of a [`QueryPattern`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternTerm {
    Var(String),
    Atom(String),
    Literal(String),
}

impl PatternTerm {
    /// Uppercase-initial words and `?name` are variables; `"..."` is a literal.
    pub fn parse(s: &str) -> Self {
        if let Some(v) = s.strip_prefix('?') {
            PatternTerm::Var(v.to_string())
        } else if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
            PatternTerm::Literal(s[1..s.len() - 1].to_string())
        } else if s.chars().next().is_some_and(|c| c.is_uppercase()) {
            PatternTerm::Var(s.to_string())
        } else {
            PatternTerm::Atom(s.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryPattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl QueryPattern {
    pub fn new(subject: PatternTerm, predicate: PatternTerm, object: PatternTerm) -> Self {
        QueryPattern { subject, predicate, object }
    }

    /// `"C workload light"` style shorthand; see [`PatternTerm::parse`].
    pub fn parse(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts.as_slice() {
            [a, b, c] => Some(QueryPattern::new(PatternTerm::parse(a), PatternTerm::parse(b), PatternTerm::parse(c))),
            _ => None,
        }
    }
}

pub type QueryBindings = BTreeMap<String, Node>;

fn match_term(term: &PatternTerm, value: &Node, b: &mut QueryBindings) -> bool {
    match term {
        PatternTerm::Atom(a) => matches!(value, Node::Atom(v) if v == a),
        PatternTerm::Literal(l) => matches!(value, Node::Literal(v) if v == l),
        PatternTerm::Var(name) => match b.get(name) {
            Some(bound) => bound == value,
            None => {
                b.insert(name.clone(), value.clone());
                true
            }
        },
    }
}

/// Bindings under which `pattern` instantiates to `triple`, if any.
pub fn match_triple(pattern: &QueryPattern, triple: &TripleFact) -> Option<QueryBindings> {
    let mut b = QueryBindings::new();
    let ok = match_term(&pattern.subject, &Node::Atom(triple.subject.clone()), &mut b)
        && match_term(&pattern.predicate, &Node::Atom(triple.predicate.clone()), &mut b)
        && match_term(&pattern.object, &triple.object, &mut b);
    ok.then_some(b)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    triples: Vec<TripleFact>,
    by_subject: BTreeMap<String, Vec<usize>>,
    by_predicate: BTreeMap<String, Vec<usize>>,
    courses: BTreeMap<String, CourseRecord>,
}

impl KnowledgeGraph {
    /// Build from triples, collapsing duplicates and materialising courses.
    /// `lines` gives the source line of each triple for error messages.
    fn build(mut entries: Vec<(TripleFact, usize)>) -> Result<Self, KbError> {
        entries.sort();
        entries.dedup_by(|a, b| a.0 == b.0);
        let mut g = KnowledgeGraph::default();
        for (i, (t, line)) in entries.iter().enumerate() {
            g.by_subject.entry(t.subject.clone()).or_default().push(i);
            g.by_predicate.entry(t.predicate.clone()).or_default().push(i);
            g.apply_schema(t, *line)?;
        }
        g.triples = entries.into_iter().map(|(t, _)| t).collect();
        Ok(g)
    }

    pub fn from_triples(triples: impl IntoIterator<Item = TripleFact>) -> Result<Self, KbError> {
        Self::build(triples.into_iter().map(|t| (t, 0)).collect())
    }

    fn apply_schema(&mut self, t: &TripleFact, line: usize) -> Result<(), KbError> {
        const SCHEMA: [&str; 7] = ["title", "easiness", "workload", "class_size", "timing", "helpfulness", "topic"];
        if !SCHEMA.contains(&t.predicate.as_str()) {
            return Ok(());
        }
        let rec = self.courses.entry(t.subject.clone()).or_insert_with(|| CourseRecord { code: t.subject.clone(), ..Default::default() });
        let value = t.object.text();
        let schema_err = |message: String| KbError::Schema { line, message };
        fn set<T: PartialEq + Copy + fmt::Display>(slot: &mut Option<T>, v: T, pred: &str, code: &str) -> Result<(), String> {
            match slot {
                Some(old) if *old != v => Err(format!("{code} has conflicting {pred} values {old} and {v}")),
                _ => {
                    *slot = Some(v);
                    Ok(())
                }
            }
        }
        let bad_enum = |e: String| schema_err(format!("unknown {} value {value:?}: {e}", t.predicate));
        match t.predicate.as_str() {
            "title" => match &rec.title {
                Some(old) if old != value => {
                    return Err(schema_err(format!("{} has conflicting titles", t.subject)));
                }
                _ => rec.title = Some(value.to_string()),
            },
            "easiness" => set(&mut rec.easiness, value.parse().map_err(bad_enum)?, "easiness", &t.subject).map_err(schema_err)?,
            "workload" => set(&mut rec.workload, value.parse().map_err(bad_enum)?, "workload", &t.subject).map_err(schema_err)?,
            "class_size" => set(&mut rec.class_size, value.parse().map_err(bad_enum)?, "class_size", &t.subject).map_err(schema_err)?,
            "timing" => set(&mut rec.timing, value.parse().map_err(bad_enum)?, "timing", &t.subject).map_err(schema_err)?,
            "helpfulness" => set(&mut rec.helpfulness, value.parse().map_err(bad_enum)?, "helpfulness", &t.subject).map_err(schema_err)?,
            "topic" => {
                rec.topics.insert(value.to_string());
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in (subject, predicate, object) order.
    pub fn triples(&self) -> &[TripleFact] {
        &self.triples
    }

    pub fn course(&self, code: &str) -> Option<&CourseRecord> {
        self.courses.get(code)
    }

    pub fn courses(&self) -> impl Iterator<Item = &CourseRecord> {
        self.courses.values()
    }

    /// Every binding under which the pattern is a triple of the graph,
    /// ordered by the matching triple.
    pub fn query(&self, pattern: &QueryPattern) -> Vec<QueryBindings> {
        let candidates: Box<dyn Iterator<Item = &TripleFact>> = match (&pattern.subject, &pattern.predicate) {
            (PatternTerm::Atom(s), _) => {
                Box::new(self.by_subject.get(s).into_iter().flatten().map(|&i| &self.triples[i]))
            }
            (_, PatternTerm::Atom(p)) => {
                Box::new(self.by_predicate.get(p).into_iter().flatten().map(|&i| &self.triples[i]))
            }
            (PatternTerm::Literal(_), _) => Box::new(std::iter::empty()),
            _ => Box::new(self.triples.iter()),
        };
        candidates.filter_map(|t| match_triple(pattern, t)).collect()
    }

    /// Courses meeting every constraint, best first: easiness descending,
    /// helpfulness descending, then code.
    pub fn course_search(&self, constraints: &[Constraint]) -> Vec<&CourseRecord> {
        let mut hits: Vec<&CourseRecord> = self.courses.values().filter(|c| constraints.iter().all(|k| c.satisfies(k))).collect();
        hits.sort_by(|a, b| {
            b.easiness
                .cmp(&a.easiness)
                .then(b.helpfulness.cmp(&a.helpfulness))
                .then(a.code.cmp(&b.code))
        });
        hits
    }

    /// Attribute facts for one course, e.g. `course_load(stats250, light)`.
    pub fn course_facts(&self, code: &str) -> Vec<Fact> {
        let Some(rec) = self.courses.get(code) else { return Vec::new() };
        let mut out = Vec::new();
        let course = Const::atom(code);
        if let Some(title) = &rec.title {
            out.push(Fact::new("course_title", vec![course.clone(), Const::Str(title.clone())]));
        }
        for attr in Attribute::ALL {
            for v in rec.value(attr) {
                out.push(Fact::new(attr.fact_predicate(), vec![course.clone(), Const::Atom(v)]));
            }
        }
        out
    }
}

/// `course_search` with string constraints, validated against the schema.
pub fn course_search<'g>(graph: &'g KnowledgeGraph, constraints: &[(&str, &str)]) -> Result<Vec<&'g CourseRecord>, KbError> {
    let parsed = constraints.iter().map(|(a, v)| Constraint::parse(a, v)).collect::<Result<Vec<_>, _>>()?;
    Ok(graph.course_search(&parsed))
}

/// Add the attribute facts of every course mentioned anywhere in `facts`.
/// Existing facts are kept.
pub fn enrich(facts: &FactStore, graph: &KnowledgeGraph) -> Result<FactStore, KbError> {
    let mentioned: BTreeSet<&str> = facts
        .iter()
        .flat_map(|f| f.args.iter())
        .filter_map(Const::as_atom)
        .filter(|a| graph.course(a).is_some())
        .collect();
    let mut out = facts.clone();
    for code in mentioned {
        out.extend(graph.course_facts(code))?;
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    let mut prev = '\0';
    for (i, c) in line.char_indices() {
        match c {
            '"' if prev != '\\' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
        prev = c;
    }
    line
}

fn parse_line(line: &str, line_no: usize) -> Result<Option<TripleFact>, KbError> {
    let line = strip_comment(line).trim();
    if line.is_empty() {
        return Ok(None);
    }
    let err = |m: &str| KbError::Parse { line: line_no, message: m.to_string() };
    let mut rest = line;
    let next_word = |rest: &mut &str| -> Option<String> {
        let r = rest.trim_start();
        let end = r.find(char::is_whitespace).unwrap_or(r.len());
        if end == 0 {
            return None;
        }
        let w = r[..end].to_string();
        *rest = &r[end..];
        Some(w)
    };
    let subject = next_word(&mut rest).ok_or_else(|| err("missing subject"))?;
    let predicate = next_word(&mut rest).ok_or_else(|| err("missing predicate"))?;
    let obj = rest.trim();
    if obj.is_empty() {
        return Err(err("missing object"));
    }
    let object = if let Some(body) = obj.strip_prefix('"') {
        let mut value = String::new();
        let mut chars = body.chars();
        let mut closed = false;
        while let Some(c) = chars.next() {
            match c {
                '\\' => value.push(chars.next().ok_or_else(|| err("dangling escape"))?),
                '"' => {
                    closed = true;
                    break;
                }
                c => value.push(c),
            }
        }
        if !closed {
            return Err(err("unterminated quoted literal"));
        }
        if !chars.as_str().trim().is_empty() {
            return Err(err("unexpected text after quoted literal"));
        }
        Node::Literal(value)
    } else {
        if obj.contains(char::is_whitespace) {
            return Err(err("expected exactly three fields; quote multiword objects"));
        }
        Node::Atom(obj.to_lowercase())
    };
    for (name, w) in [("subject", &subject), ("predicate", &predicate)] {
        if w.contains('"') {
            return Err(err(&format!("{name} must be an atom")));
        }
    }
    Ok(Some(TripleFact { subject: subject.to_lowercase(), predicate: predicate.to_lowercase(), object }))
}

pub fn parse_ontology(text: &str) -> Result<KnowledgeGraph, KbError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(t) = parse_line(line, i + 1)? {
            entries.push((t, i + 1));
        }
    }
    KnowledgeGraph::build(entries)
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<KnowledgeGraph, KbError> {
    parse_ontology(&std::fs::read_to_string(path)?)
}
