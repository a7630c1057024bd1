use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{EngineError, FactStore, InferenceResult};

/// Reserved predicates and their arities.
pub const RESERVED: [(&str, usize); 6] = [
    ("skipstate", 1),
    ("askstate", 1),
    ("slot_fill", 2),
    ("slot_update", 2),
    ("recommend_constraint", 2),
    ("knows_agent", 1),
];

/// Dialog directives read back from the derived facts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DirectiveSet {
    pub skip: BTreeSet<String>,
    pub ask: BTreeSet<String>,
    /// Slot → candidate values. Only fills empty slots.
    pub slot_fill: BTreeMap<String, BTreeSet<String>>,
    /// Slot → replacement values. May overwrite a filled slot.
    pub slot_update: BTreeMap<String, BTreeSet<String>>,
    pub recommend: BTreeSet<(String, String)>,
    pub knows: BTreeSet<String>,
}

impl DirectiveSet {
    pub fn is_empty(&self) -> bool {
        self.skip.is_empty()
            && self.ask.is_empty()
            && self.slot_fill.is_empty()
            && self.slot_update.is_empty()
            && self.recommend.is_empty()
            && self.knows.is_empty()
    }
}

pub fn directives_from_facts(facts: &FactStore) -> Result<DirectiveSet, EngineError> {
    for (predicate, expected) in RESERVED {
        if let Some(found) = facts.arity(predicate) {
            if found != expected {
                return Err(EngineError::Schema { predicate: predicate.to_string(), expected, found });
            }
        }
    }
    let mut d = DirectiveSet::default();
    let unary = |p: &str| facts.with_predicate(p).map(|f| f.args[0].text().to_string()).collect::<BTreeSet<_>>();
    let binary = |p: &str| {
        facts
            .with_predicate(p)
            .map(|f| (f.args[0].text().to_string(), f.args[1].text().to_string()))
            .collect::<Vec<_>>()
    };
    d.skip = unary("skipstate");
    d.ask = unary("askstate");
    d.knows = unary("knows_agent");
    for (slot, value) in binary("slot_fill") {
        d.slot_fill.entry(slot).or_default().insert(value);
    }
    for (slot, value) in binary("slot_update") {
        d.slot_update.entry(slot).or_default().insert(value);
    }
    d.recommend = binary("recommend_constraint").into_iter().collect();
    Ok(d)
}

/// Project the reserved predicates of an inference result into directives.
/// Facts of any other predicate are ignored.
pub fn derive_directives(result: &InferenceResult) -> Result<DirectiveSet, EngineError> {
    directives_from_facts(&result.derived)
}
