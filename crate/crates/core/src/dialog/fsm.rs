use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use super::DialogError;
use crate::ini;
use crate::knowledge::Attribute;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const SKIP_WEIGHT: f64 = 0.0;
pub const ASK_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FsmState {
    pub id: String,
    pub prompt: String,
    /// Slot this state fills; defaults to the state id.
    pub slot: String,
    pub default_weight: f64,
    pub order: i64,
    pub terminal: bool,
    /// Course attribute the slot value constrains when recommending.
    pub slot_attribute: Option<Attribute>,
    /// Terminal states only: reply when no course matches.
    pub no_match: Option<String>,
}

/// Validated state machine, states sorted by traversal order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fsm {
    pub greeting: String,
    states: Vec<FsmState>,
}

impl Fsm {
    pub fn new(greeting: impl Into<String>, mut states: Vec<FsmState>) -> Result<Self, DialogError> {
        let cfg = |message: String| DialogError::Config { file: "fsm", line: 0, message };
        let mut ids = BTreeSet::new();
        let mut orders = BTreeSet::new();
        let mut slots = BTreeSet::new();
        for s in &states {
            if !ids.insert(s.id.as_str()) {
                return Err(cfg(format!("duplicate state {}", s.id)));
            }
            if !orders.insert(s.order) {
                return Err(cfg(format!("state {} reuses order {}", s.id, s.order)));
            }
            if !s.terminal && !slots.insert(s.slot.as_str()) {
                return Err(cfg(format!("slot {} is filled by more than one state", s.slot)));
            }
            if !(0.0..=1.0).contains(&s.default_weight) {
                return Err(cfg(format!("state {} weight outside [0, 1]", s.id)));
            }
            if s.prompt.trim().is_empty() {
                return Err(cfg(format!("state {} has no prompt", s.id)));
            }
        }
        match states.iter().filter(|s| s.terminal).count() {
            1 => {}
            0 => return Err(cfg("no terminal state".into())),
            n => return Err(cfg(format!("{n} terminal states, expected exactly one"))),
        }
        states.sort_by_key(|s| s.order);
        Ok(Fsm { greeting: greeting.into(), states })
    }

    /// All states in traversal order.
    pub fn states(&self) -> &[FsmState] {
        &self.states
    }

    pub fn state(&self, id: &str) -> Option<&FsmState> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn terminal(&self) -> &FsmState {
        self.states.iter().find(|s| s.terminal).expect("validated on construction")
    }

    pub fn non_terminal(&self) -> impl Iterator<Item = &FsmState> {
        self.states.iter().filter(|s| !s.terminal)
    }

    pub fn state_for_slot(&self, slot: &str) -> Option<&FsmState> {
        self.non_terminal().find(|s| s.slot == slot)
    }

    pub fn default_weights(&self) -> BTreeMap<String, f64> {
        self.states.iter().map(|s| (s.id.clone(), s.default_weight)).collect()
    }

    pub fn rank(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }
}

fn parse_f64(e: &ini::Entry, file: &'static str) -> Result<f64, DialogError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DialogError::Config { file, line: e.line, message: format!("{} must be a number, found {:?}", e.key, e.value) })
}

fn parse_bool(e: &ini::Entry, file: &'static str) -> Result<bool, DialogError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(DialogError::Config { file, line: e.line, message: format!("{} must be true or false, found {other:?}", e.key) }),
    }
}

fn ini_error(file: &'static str) -> impl Fn(ini::IniError) -> DialogError {
    move |e| DialogError::Config { file, line: e.line, message: e.message }
}

/// FSM file: an optional `[fsm]` section with `greeting`, then one
/// `[state <id>]` section per state with keys `prompt`, `slot`, `weight`,
/// `order`, `terminal`, `slot_attribute` and, on the terminal state,
/// `no_match`.
pub fn parse_fsm(text: &str) -> Result<Fsm, DialogError> {
    const FILE: &str = "fsm";
    let cfg = |line: usize, message: String| DialogError::Config { file: FILE, line, message };
    let sections = ini::parse(text).map_err(ini_error(FILE))?;
    let mut greeting = String::new();
    let mut states = Vec::new();
    let mut seen = BTreeMap::new();
    for (pos, sec) in sections.iter().enumerate() {
        match sec.kind.as_str() {
            "fsm" => {
                for e in &sec.entries {
                    match e.key.as_str() {
                        "greeting" => greeting = e.value.clone(),
                        other => return Err(cfg(e.line, format!("unknown key {other} in [fsm]"))),
                    }
                }
            }
            "state" => {
                let id = sec.name.clone();
                if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(cfg(sec.line, format!("bad state id {id:?}")));
                }
                if let Some(prev) = seen.insert(id.clone(), sec.line) {
                    return Err(cfg(sec.line, format!("duplicate state {id} (first defined on line {prev})")));
                }
                let mut state = FsmState {
                    slot: id.clone(),
                    id,
                    prompt: String::new(),
                    default_weight: 1.0,
                    order: pos as i64,
                    terminal: false,
                    slot_attribute: None,
                    no_match: None,
                };
                for e in &sec.entries {
                    match e.key.as_str() {
                        "prompt" => state.prompt = e.value.clone(),
                        "slot" => state.slot = e.value.clone(),
                        "weight" => state.default_weight = parse_f64(e, FILE)?,
                        "order" => {
                            state.order = e.value.parse().map_err(|_| cfg(e.line, format!("order must be an integer, found {:?}", e.value)))?
                        }
                        "terminal" => state.terminal = parse_bool(e, FILE)?,
                        "slot_attribute" => state.slot_attribute = Some(e.value.parse().map_err(|err: crate::knowledge::KbError| cfg(e.line, err.to_string()))?),
                        "no_match" => state.no_match = Some(e.value.clone()),
                        other => return Err(cfg(e.line, format!("unknown key {other} in state {}", state.id))),
                    }
                }
                if state.prompt.is_empty() {
                    return Err(cfg(sec.line, format!("state {} has no prompt", state.id)));
                }
                if !(0.0..=1.0).contains(&state.default_weight) {
                    return Err(cfg(sec.line, format!("state {} weight outside [0, 1]", state.id)));
                }
                states.push(state);
            }
            other => return Err(cfg(sec.line, format!("unknown section kind {other}"))),
        }
    }
    Fsm::new(greeting, states)
}

pub fn load_fsm(path: impl AsRef<Path>) -> Result<Fsm, DialogError> {
    parse_fsm(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyConfig {
    pub threshold: f64,
    /// Belief label → state id → additive weight delta.
    pub belief_deltas: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { threshold: DEFAULT_THRESHOLD, belief_deltas: BTreeMap::new() }
    }
}

impl PolicyConfig {
    pub fn deltas(&self, label: &str) -> impl Iterator<Item = (&str, f64)> {
        self.belief_deltas.get(label).into_iter().flatten().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Policy file: `[policy]` with `threshold`, and `[belief <label>]`
/// sections mapping state ids to deltas.
pub fn parse_policy(text: &str) -> Result<PolicyConfig, DialogError> {
    const FILE: &str = "policy";
    let cfg = |line: usize, message: String| DialogError::Config { file: FILE, line, message };
    let mut policy = PolicyConfig::default();
    for sec in ini::parse(text).map_err(ini_error(FILE))? {
        match sec.kind.as_str() {
            "policy" => {
                for e in &sec.entries {
                    match e.key.as_str() {
                        "threshold" => {
                            let t = parse_f64(e, FILE)?;
                            if !(0.0..=1.0).contains(&t) {
                                return Err(cfg(e.line, format!("threshold {t} outside [0, 1]")));
                            }
                            policy.threshold = t;
                        }
                        other => return Err(cfg(e.line, format!("unknown key {other} in [policy]"))),
                    }
                }
            }
            "belief" => {
                if sec.name.is_empty() {
                    return Err(cfg(sec.line, "belief section needs a label".into()));
                }
                let table = policy.belief_deltas.entry(sec.name.clone()).or_default();
                for e in &sec.entries {
                    let d = parse_f64(e, FILE)?;
                    if !(-1.0..=1.0).contains(&d) {
                        return Err(cfg(e.line, format!("delta {d} outside [-1, 1]")));
                    }
                    table.insert(e.key.clone(), d);
                }
            }
            other => return Err(cfg(sec.line, format!("unknown section kind {other}"))),
        }
    }
    Ok(policy)
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PolicyConfig, DialogError> {
    parse_policy(&std::fs::read_to_string(path)?)
}

/// Check that every state named in the policy exists in the FSM.
pub fn check_policy(policy: &PolicyConfig, fsm: &Fsm) -> Result<(), DialogError> {
    for (label, table) in &policy.belief_deltas {
        if let Some(id) = table.keys().find(|id| fsm.state(id).is_none()) {
            return Err(DialogError::Config { file: "policy", line: 0, message: format!("[belief {label}] names unknown state {id}") });
        }
    }
    Ok(())
}
