//! Epistemic rules over a shared fact store.
//!
//! The rule language is the Datalog fragment of Prolog: positive bodies, no
//! function symbols, heads that may assert several literals at once. Rules
//! are evaluated bottom-up to the least fixpoint, and the facts of a few
//! reserved predicates are then read back as dialog directives.

mod chain;
mod directives;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{forward_chain, unify, InferenceResult, Limits, TraceEntry};
pub use directives::{derive_directives, DirectiveSet};
pub use parse::{parse_fact, parse_facts, parse_rules};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsafe rule {rule} (line {line}): head variable {variable} does not occur in the body")]
    Unsafe { rule: String, line: usize, variable: String },
    #[error("predicate {predicate} used with arity {found}, previously {expected}")]
    Arity { predicate: String, expected: usize, found: usize },
    #[error("reserved predicate {predicate} must have arity {expected}, found {found}")]
    Schema { predicate: String, expected: usize, found: usize },
    #[error("inference limit exceeded: {message}")]
    Resource { message: String, partial: Box<InferenceResult> },
}

/// A ground value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Const {
    Atom(String),
    Number(String),
    Str(String),
}

impl Const {
    pub fn atom(s: impl Into<String>) -> Self {
        Const::Atom(s.into())
    }

    /// The bare text of the value, without quotes.
    pub fn text(&self) -> &str {
        match self {
            Const::Atom(s) | Const::Number(s) | Const::Str(s) => s,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Const::Atom(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Atom(s) | Const::Number(s) => f.write_str(s),
            Const::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Const),
    Var(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => f.write_str(v),
        }
    }
}

/// Ground atom `predicate(args...)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<Const>,
}

impl Fact {
    pub fn new(predicate: impl Into<String>, args: Vec<Const>) -> Self {
        Fact { predicate: predicate.into(), args }
    }

    /// Convenience constructor where every argument is an atom.
    pub fn atoms(predicate: &str, args: &[&str]) -> Self {
        Fact::new(predicate, args.iter().map(|a| Const::atom(*a)).collect())
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            a.fmt(f)?;
        }
        f.write_str(")")
    }
}

/// Possibly non-ground atom in a rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Ground the literal. Returns `None` if a variable is unbound.
    pub fn instantiate(&self, bindings: &Bindings) -> Option<Fact> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(v) => bindings.get(v).cloned(),
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Fact::new(self.predicate.clone(), args))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            a.fmt(f)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub body: Vec<Literal>,
    pub head: Vec<Literal>,
    /// Source line, 0 for rules built in code.
    pub line: usize,
}

impl Rule {
    pub fn new(id: impl Into<String>, body: Vec<Literal>, head: Vec<Literal>) -> Result<Self, EngineError> {
        let rule = Rule { id: id.into(), body, head, line: 0 };
        rule.check_safe()?;
        Ok(rule)
    }

    pub fn check_safe(&self) -> Result<(), EngineError> {
        let bound: BTreeSet<&str> = self.body.iter().flat_map(Literal::variables).collect();
        for lit in &self.head {
            if let Some(v) = lit.variables().find(|v| !bound.contains(v)) {
                return Err(EngineError::Unsafe { rule: self.id.clone(), line: self.line, variable: v.to_string() });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |lits: &[Literal], sep: &str| lits.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep);
        write!(f, "{}: {} => {}.", self.id, join(&self.body, " & "), join(&self.head, ", "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleBase {
    pub rules: Vec<Rule>,
}

impl RuleBase {
    pub fn new(rules: Vec<Rule>) -> Self {
        RuleBase { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Merge two rule bases, checking arity consistency.
    pub fn extend(&mut self, other: RuleBase) -> Result<(), EngineError> {
        self.rules.extend(other.rules);
        self.check_arities().map(|_| ())
    }

    pub fn check_arities(&self) -> Result<BTreeMap<String, usize>, EngineError> {
        let mut arities = BTreeMap::new();
        for r in &self.rules {
            for lit in r.body.iter().chain(&r.head) {
                check_arity(&mut arities, &lit.predicate, lit.args.len())?;
            }
        }
        Ok(arities)
    }
}

fn check_arity(arities: &mut BTreeMap<String, usize>, predicate: &str, arity: usize) -> Result<(), EngineError> {
    match arities.get(predicate) {
        Some(&expected) if expected != arity => {
            Err(EngineError::Arity { predicate: predicate.to_string(), expected, found: arity })
        }
        Some(_) => Ok(()),
        None => {
            arities.insert(predicate.to_string(), arity);
            Ok(())
        }
    }
}

pub type Bindings = BTreeMap<String, Const>;

/// Ordered set of ground facts with one fixed arity per predicate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Fact>", into = "Vec<Fact>")]
pub struct FactStore {
    facts: BTreeSet<Fact>,
    arities: BTreeMap<String, usize>,
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a fact; `Ok(true)` when it was not already present.
    pub fn insert(&mut self, fact: Fact) -> Result<bool, EngineError> {
        check_arity(&mut self.arities, &fact.predicate, fact.args.len())?;
        Ok(self.facts.insert(fact))
    }

    pub fn extend(&mut self, facts: impl IntoIterator<Item = Fact>) -> Result<(), EngineError> {
        for f in facts {
            self.insert(f)?;
        }
        Ok(())
    }

    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Result<Self, EngineError> {
        let mut s = FactStore::new();
        s.extend(facts)?;
        Ok(s)
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    /// All facts of one predicate, in order.
    pub fn with_predicate<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        let start = Fact { predicate: predicate.to_string(), args: Vec::new() };
        self.facts.range(start..).take_while(move |f| f.predicate == predicate)
    }

    pub fn arity(&self, predicate: &str) -> Option<usize> {
        self.arities.get(predicate).copied()
    }

    pub fn is_superset(&self, other: &FactStore) -> bool {
        self.facts.is_superset(&other.facts)
    }

    pub fn as_set(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

}

impl TryFrom<Vec<Fact>> for FactStore {
    type Error = EngineError;

    fn try_from(facts: Vec<Fact>) -> Result<Self, EngineError> {
        FactStore::from_facts(facts)
    }
}

impl From<FactStore> for Vec<Fact> {
    fn from(store: FactStore) -> Self {
        store.facts.into_iter().collect()
    }
}

impl<'a> IntoIterator for &'a FactStore {
    type Item = &'a Fact;
    type IntoIter = std::collections::btree_set::Iter<'a, Fact>;

    fn into_iter(self) -> Self::IntoIter {
        self.facts.iter()
    }
}
