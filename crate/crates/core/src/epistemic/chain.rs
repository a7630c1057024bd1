//! Semi-naive bottom-up evaluation.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{Bindings, EngineError, Fact, FactStore, Literal, Rule, RuleBase, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_facts: usize,
    pub max_iterations: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_facts: 100_000, max_iterations: 1_000 }
    }
}

/// One rule firing that produced at least one new fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub rule: String,
    pub bindings: Bindings,
    pub produced: Vec<Fact>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceResult {
    pub derived: FactStore,
    pub trace: Vec<TraceEntry>,
    /// Number of rounds that derived something new.
    pub iterations: usize,
}

impl InferenceResult {
    /// Ids of rules that fired, in first-firing order without repeats.
    pub fn fired_rules(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.trace.iter().filter(|e| seen.insert(e.rule.as_str())).map(|e| e.rule.clone()).collect()
    }
}

/// Match `pattern` against a ground fact, extending `bindings`. The input
/// bindings are left untouched; on failure nothing is returned.
pub fn unify(pattern: &Literal, fact: &Fact, bindings: &Bindings) -> Option<Bindings> {
    if pattern.predicate != fact.predicate || pattern.args.len() != fact.args.len() {
        return None;
    }
    let mut out: Option<Bindings> = None;
    for (term, value) in pattern.args.iter().zip(&fact.args) {
        match term {
            Term::Const(c) => {
                if c != value {
                    return None;
                }
            }
            Term::Var(v) => {
                let current = out.as_ref().unwrap_or(bindings);
                match current.get(v) {
                    Some(bound) if bound != value => return None,
                    Some(_) => {}
                    None => {
                        out.get_or_insert_with(|| bindings.clone()).insert(v.clone(), value.clone());
                    }
                }
            }
        }
    }
    Some(out.unwrap_or_else(|| bindings.clone()))
}

/// Enumerate bindings of `body` where literal `delta_pos` matches a fact of
/// `delta` and every other literal matches a fact of `total`.
fn join(body: &[Literal], idx: usize, delta_pos: usize, total: &FactStore, delta: &FactStore, bindings: &Bindings, out: &mut Vec<Bindings>) {
    if idx == body.len() {
        out.push(bindings.clone());
        return;
    }
    let lit = &body[idx];
    let store = if idx == delta_pos { delta } else { total };
    for fact in store.with_predicate(&lit.predicate) {
        if let Some(b) = unify(lit, fact, bindings) {
            join(body, idx + 1, delta_pos, total, delta, &b, out);
        }
    }
}

fn fire(rule: &Rule, total: &FactStore, delta: &FactStore, fresh: &mut BTreeSet<Fact>, trace: &mut Vec<TraceEntry>) {
    let mut matches = Vec::new();
    for delta_pos in 0..rule.body.len() {
        if delta.with_predicate(&rule.body[delta_pos].predicate).next().is_none() {
            continue;
        }
        join(&rule.body, 0, delta_pos, total, delta, &Bindings::new(), &mut matches);
    }
    for bindings in matches {
        let produced: Vec<Fact> = rule
            .head
            .iter()
            .filter_map(|h| h.instantiate(&bindings))
            .filter(|f| !total.contains(f) && !fresh.contains(f))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if produced.is_empty() {
            continue;
        }
        fresh.extend(produced.iter().cloned());
        trace.push(TraceEntry { rule: rule.id.clone(), bindings, produced });
    }
}

/// Least fixpoint of `rules` over `facts`.
///
/// Each round joins every rule against the facts that were new in the
/// previous round, so nothing is derived twice. Exceeding a limit returns
/// [`EngineError::Resource`] with everything derived so far.
pub fn forward_chain(rules: &RuleBase, facts: &FactStore, limits: Limits) -> Result<InferenceResult, EngineError> {
    let mut total = facts.clone();
    let mut delta = facts.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut fresh = BTreeSet::new();
        for rule in &rules.rules {
            fire(rule, &total, &delta, &mut fresh, &mut trace);
        }
        if fresh.is_empty() {
            break;
        }
        if iterations == limits.max_iterations {
            let message = format!("more than {iterations} rounds needed");
            let partial = InferenceResult { derived: total, trace, iterations };
            return Err(EngineError::Resource { message, partial: Box::new(partial) });
        }
        iterations += 1;
        let mut next = FactStore::new();
        for f in fresh {
            total.insert(f.clone())?;
            next.insert(f)?;
        }
        delta = next;
        if total.len() > limits.max_facts {
            let message = format!("{} facts derived (limit {})", total.len(), limits.max_facts);
            let partial = InferenceResult { derived: total, trace, iterations };
            return Err(EngineError::Resource { message, partial: Box::new(partial) });
        }
    }
    Ok(InferenceResult { derived: total, trace, iterations })
}
