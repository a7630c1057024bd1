//! Belief-driven finite-state dialog policy.
//!
//! Each turn classifies the utterance, extracts facts, enriches them from
//! the course ontology, forward-chains the epistemic rules, and uses the
//! derived directives to fill slots and re-weight states. States at or
//! above the threshold are asked in traversal order; when none are left the
//! terminal state recommends a course.

mod fsm;
mod policy;
mod turn;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{BeliefDistribution, ClassifierError};
use crate::epistemic::{EngineError, FactStore};
use crate::knowledge::{Constraint, KbError};
use crate::text::Speaker;

pub use fsm::{
    check_policy, load_fsm, load_policy, parse_fsm, parse_policy, Fsm, FsmState, PolicyConfig, ASK_WEIGHT,
    DEFAULT_THRESHOLD, SKIP_WEIGHT,
};
pub use policy::{partition_states, update_weights, Partition};
pub use turn::{recommend, DialogEngine, ANY_VALUE};

#[derive(Debug, Error)]
pub enum DialogError {
    #[error("{file} config line {line}: {message}")]
    Config { file: &'static str, line: usize, message: String },
    #[error("session {0} is completed")]
    Completed(String),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("belief classification failed: {0}")]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Knowledge(#[from] KbError),
    #[error(transparent)]
    Extraction(#[from] crate::extraction::ExtractionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefView {
    pub label: String,
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl From<&BeliefDistribution> for BeliefView {
    fn from(d: &BeliefDistribution) -> Self {
        BeliefView { label: d.label().to_string(), labels: d.labels.clone(), probs: d.probs.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub code: String,
    pub title: Option<String>,
    pub constraints: Vec<Constraint>,
}

/// Per-turn transparency data attached to every advisor reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnPayload {
    pub belief: BeliefView,
    pub fired_rules: Vec<String>,
    pub skipped_states: Vec<String>,
    pub asked_state: Option<String>,
    pub slots: BTreeMap<String, String>,
    pub status: SessionStatus,
    pub knows: Vec<String>,
    pub recommendation: Option<Recommendation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorReply {
    pub reply: String,
    #[serde(flatten)]
    pub payload: TurnPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub text: String,
    /// 0 for the greeting, then the turn that produced the message.
    pub turn: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<TurnPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefRecord {
    pub turn: usize,
    pub distribution: BeliefDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogSession {
    pub id: String,
    pub weights: BTreeMap<String, f64>,
    pub slots: BTreeMap<String, String>,
    pub belief_history: Vec<BeliefRecord>,
    /// Facts asserted from the user's utterances plus their ontology
    /// enrichment. Beliefs are kept in `belief_history`, not here.
    pub facts: FactStore,
    pub transcript: Vec<TranscriptEntry>,
    pub status: SessionStatus,
    /// State asked by the last advisor reply.
    pub pending: Option<String>,
    pub turns: usize,
}

impl DialogSession {
    pub fn new(id: impl Into<String>, fsm: &Fsm) -> Self {
        DialogSession {
            id: id.into(),
            weights: fsm.default_weights(),
            slots: BTreeMap::new(),
            belief_history: Vec::new(),
            facts: FactStore::new(),
            transcript: vec![TranscriptEntry { speaker: Speaker::Advisor, text: fsm.greeting.clone(), turn: 0, payload: None }],
            status: SessionStatus::Active,
            pending: None,
            turns: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    /// Payload of the most recent advisor reply, if any turn has run.
    pub fn last_payload(&self) -> Option<&TurnPayload> {
        self.transcript.iter().rev().find_map(|e| e.payload.as_ref())
    }
}
