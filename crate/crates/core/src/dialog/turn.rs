use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::warn;

use super::fsm::{check_policy, Fsm, PolicyConfig};
use super::policy::{partition_states, update_weights, Partition};
use super::{
    AdvisorReply, BeliefRecord, BeliefView, DialogError, DialogSession, Recommendation, SessionStatus,
    TranscriptEntry, TurnPayload,
};
use crate::classifier::BeliefPredictor;
use crate::epistemic::{derive_directives, forward_chain, Const, DirectiveSet, EngineError, Fact, FactStore, Limits, RuleBase};
use crate::extraction::{assert_facts, extract_triples, FactAssertionRule, SynonymLexicon};
use crate::knowledge::{enrich, Constraint, KnowledgeGraph, Rating};
use crate::text::{Speaker, Utterance};

/// Slot value recorded when the user answers an asked state without
/// anything extractable.
pub const ANY_VALUE: &str = "any";

/// Immutable assets shared by every session.
#[derive(Clone)]
pub struct DialogEngine {
    pub classifier: Arc<dyn BeliefPredictor>,
    pub lexicon: SynonymLexicon,
    pub assertions: Vec<FactAssertionRule>,
    pub rules: RuleBase,
    pub graph: KnowledgeGraph,
    pub fsm: Fsm,
    pub policy: PolicyConfig,
    pub limits: Limits,
}

impl std::fmt::Debug for DialogEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DialogEngine")
            .field("labels", &self.classifier.labels())
            .field("rules", &self.rules.len())
            .field("courses", &self.graph.courses().count())
            .field("states", &self.fsm.states().len())
            .finish()
    }
}

fn easiness_phrase(r: Option<Rating>) -> &'static str {
    match r {
        Some(Rating::High) => "an easy",
        Some(Rating::Medium) => "a moderately easy",
        Some(Rating::Low) => "a demanding",
        None => "a",
    }
}

/// Constraints implied by the filled slots and recommend directives, with
/// warnings for values the ontology schema rejects.
fn constraints(fsm: &Fsm, slots: &BTreeMap<String, String>, extra: &BTreeSet<(String, String)>) -> (Vec<Constraint>, Vec<String>) {
    let mut out = BTreeSet::new();
    let mut warnings = Vec::new();
    let from_slots = slots.iter().filter(|(_, v)| v.as_str() != ANY_VALUE).filter_map(|(slot, v)| {
        let attr = match fsm.state_for_slot(slot) {
            Some(state) => state.slot_attribute.map(|a| a.as_str().to_string()),
            None => slot.parse::<crate::knowledge::Attribute>().ok().map(|a| a.as_str().to_string()),
        };
        attr.map(|a| (a, v.clone()))
    });
    let pairs: Vec<(String, String)> = from_slots.chain(extra.iter().cloned()).collect();
    for (a, v) in pairs {
        match Constraint::parse(&a, &v) {
            Ok(c) => {
                out.insert(c);
            }
            Err(e) => warnings.push(format!("ignored constraint {a}={v}: {e}")),
        }
    }
    (out.into_iter().collect(), warnings)
}

/// Best course for the session's constraints, rendered with the terminal
/// state's prompt, or an apology naming the constraints.
pub fn recommend(
    fsm: &Fsm,
    graph: &KnowledgeGraph,
    slots: &BTreeMap<String, String>,
    extra: &BTreeSet<(String, String)>,
) -> (String, Option<Recommendation>, Vec<String>) {
    let (cs, warnings) = constraints(fsm, slots, extra);
    let terminal = fsm.terminal();
    match graph.course_search(&cs).first() {
        Some(course) => {
            let text = terminal
                .prompt
                .replace("{code}", &course.code.to_uppercase())
                .replace("{title}", course.title.as_deref().unwrap_or(&course.code))
                .replace("{easiness}", easiness_phrase(course.easiness));
            let rec = Recommendation { code: course.code.clone(), title: course.title.clone(), constraints: cs };
            (text, Some(rec), warnings)
        }
        None => {
            let listed = if cs.is_empty() {
                "your preferences".to_string()
            } else {
                cs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
            };
            let template = terminal.no_match.as_deref().unwrap_or("Sorry, I could not find a course matching {constraints}.");
            (template.replace("{constraints}", &listed), None, warnings)
        }
    }
}

impl DialogEngine {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        classifier: Arc<dyn BeliefPredictor>,
        lexicon: SynonymLexicon,
        assertions: Vec<FactAssertionRule>,
        rules: RuleBase,
        graph: KnowledgeGraph,
        fsm: Fsm,
        policy: PolicyConfig,
    ) -> Result<Self, DialogError> {
        check_policy(&policy, &fsm)?;
        Ok(DialogEngine { classifier, lexicon, assertions, rules, graph, fsm, policy, limits: Limits::default() })
    }

    pub fn new_session(&self, id: impl Into<String>) -> DialogSession {
        DialogSession::new(id, &self.fsm)
    }

    /// Attribute facts for courses on any topic the user is interested in.
    fn candidate_facts(&self, facts: &FactStore) -> Vec<Fact> {
        let topics: BTreeSet<&str> = facts.with_predicate("interest").filter_map(|f| f.args[0].as_atom()).collect();
        self.graph
            .courses()
            .filter(|c| c.topics.iter().any(|t| topics.contains(t.as_str())))
            .flat_map(|c| self.graph.course_facts(&c.code))
            .collect()
    }

    fn fill_slots(&self, slots: &mut BTreeMap<String, String>, directives: &DirectiveSet, asserted: &FactStore) {
        for (slot, values) in &directives.slot_update {
            if let Some(v) = values.first() {
                slots.insert(slot.clone(), v.clone());
            }
        }
        for (slot, values) in &directives.slot_fill {
            if let Some(v) = values.first() {
                slots.entry(slot.clone()).or_insert_with(|| v.clone());
            }
        }
        for f in asserted.with_predicate("preference") {
            let (attr, value) = (f.args[0].text(), f.args[1].text());
            for state in self.fsm.non_terminal().filter(|s| s.slot_attribute.is_some_and(|a| a.as_str() == attr)) {
                slots.entry(state.slot.clone()).or_insert_with(|| value.to_string());
            }
        }
    }

    /// Run one user turn. On error the session is left untouched.
    pub fn process_turn(&self, session: &mut DialogSession, text: &str) -> Result<AdvisorReply, DialogError> {
        if !session.is_active() {
            return Err(DialogError::Completed(session.id.clone()));
        }
        if text.trim().is_empty() {
            return Err(DialogError::EmptyUtterance);
        }
        let mut s = session.clone();
        let turn = s.turns + 1;
        let utterance = Utterance::user(text, turn);
        let mut warnings = Vec::new();

        let belief = self.classifier.predict(text)?;
        let label = belief.label().to_string();
        s.belief_history.push(BeliefRecord { turn, distribution: belief.clone() });

        let triples = extract_triples(&utterance, &self.lexicon);
        let asserted = assert_facts(&triples, &self.assertions, &self.lexicon)?;
        let mut base = s.facts.clone();
        base.extend(asserted.iter().cloned())?;
        let base = enrich(&base, &self.graph)?;

        let mut facts = base.clone();
        facts.extend(self.candidate_facts(&base))?;
        facts.insert(Fact::new("belief", vec![Const::atom("student"), Const::atom(label.clone())]))?;

        let (directives, fired_rules, degraded) = match forward_chain(&self.rules, &facts, self.limits) {
            Ok(result) => (derive_directives(&result)?, result.fired_rules(), false),
            Err(EngineError::Resource { message, .. }) => {
                warn!("session {}: inference stopped early: {message}", s.id);
                warnings.push(format!("inference stopped early: {message}"));
                (DirectiveSet::default(), Vec::new(), true)
            }
            Err(e) => return Err(e.into()),
        };

        self.fill_slots(&mut s.slots, &directives, &asserted);
        if let Some(pending) = s.pending.as_deref().and_then(|id| self.fsm.state(id)) {
            if !pending.terminal {
                s.slots.entry(pending.slot.clone()).or_insert_with(|| ANY_VALUE.to_string());
            }
        }

        let partition = if degraded {
            let ask = self.fsm.non_terminal().filter(|st| !s.slots.contains_key(&st.slot)).map(|st| st.id.clone()).collect();
            Partition { ask, skip: Vec::new() }
        } else {
            let (weights, w) = update_weights(&s.weights, &self.fsm, &directives, &label, &self.policy);
            s.weights = weights;
            warnings.extend(w);
            partition_states(&self.fsm, &s.weights, &s.slots, &self.policy)
        };

        let mut skipped: BTreeSet<&str> = partition.skip.iter().map(String::as_str).collect();
        skipped.extend(directives.skip.iter().map(String::as_str).filter(|id| self.fsm.state(id).is_some()));
        let mut skipped_states: Vec<String> = skipped.into_iter().map(str::to_string).collect();
        skipped_states.sort_by_key(|id| self.fsm.rank(id));

        let (reply, asked_state, recommendation) = match partition.ask.first() {
            Some(id) => {
                let state = self.fsm.state(id).expect("partition only names known states");
                (state.prompt.clone(), Some(id.clone()), None)
            }
            None => {
                let (text, rec, w) = recommend(&self.fsm, &self.graph, &s.slots, &directives.recommend);
                warnings.extend(w);
                s.status = SessionStatus::Completed;
                (text, None, rec)
            }
        };

        let payload = TurnPayload {
            belief: BeliefView::from(&belief),
            fired_rules,
            skipped_states,
            asked_state: asked_state.clone(),
            slots: s.slots.clone(),
            status: s.status,
            knows: directives.knows.iter().cloned().collect(),
            recommendation,
            warnings,
        };
        s.transcript.push(TranscriptEntry { speaker: Speaker::User, text: text.to_string(), turn, payload: None });
        s.transcript.push(TranscriptEntry { speaker: Speaker::Advisor, text: reply.clone(), turn, payload: Some(payload.clone()) });
        s.facts = base;
        s.pending = asked_state;
        s.turns = turn;
        *session = s;
        Ok(AdvisorReply { reply, payload })
    }
}
