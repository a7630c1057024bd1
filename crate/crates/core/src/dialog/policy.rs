use std::collections::BTreeMap;

use serde::Serialize;

use super::fsm::{Fsm, PolicyConfig, ASK_WEIGHT, SKIP_WEIGHT};
use crate::epistemic::DirectiveSet;

/// Apply belief deltas, then skip directives, then ask directives, then
/// clamp. Directives and deltas naming unknown states are reported and
/// otherwise ignored.
pub fn update_weights(
    weights: &BTreeMap<String, f64>,
    fsm: &Fsm,
    directives: &DirectiveSet,
    belief: &str,
    policy: &PolicyConfig,
) -> (BTreeMap<String, f64>, Vec<String>) {
    let mut w = weights.clone();
    for s in fsm.states() {
        w.entry(s.id.clone()).or_insert(s.default_weight);
    }
    let mut warnings = Vec::new();
    let mut apply = |id: &str, kind: &str, f: &dyn Fn(f64) -> f64| match w.get_mut(id) {
        Some(v) if fsm.state(id).is_some() => *v = f(*v),
        _ => warnings.push(format!("{kind} names unknown state {id}")),
    };
    for (id, delta) in policy.deltas(belief) {
        apply(id, "belief delta", &|v| v + delta);
    }
    for id in &directives.skip {
        apply(id, "skipstate", &|_| SKIP_WEIGHT);
    }
    for id in &directives.ask {
        apply(id, "askstate", &|_| ASK_WEIGHT);
    }
    for v in w.values_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    (w, warnings)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub ask: Vec<String>,
    pub skip: Vec<String>,
}

/// Split the unfilled non-terminal states by weight against the threshold.
pub fn partition_states(
    fsm: &Fsm,
    weights: &BTreeMap<String, f64>,
    slots: &BTreeMap<String, String>,
    policy: &PolicyConfig,
) -> Partition {
    let mut p = Partition::default();
    for s in fsm.non_terminal().filter(|s| !slots.contains_key(&s.slot)) {
        let w = weights.get(&s.id).copied().unwrap_or(s.default_weight);
        if w >= policy.threshold {
            p.ask.push(s.id.clone());
        } else {
            p.skip.push(s.id.clone());
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialog::fsm::parse_fsm;
    use std::collections::BTreeSet;

    fn fsm() -> Fsm {
        parse_fsm("[state a]\nprompt = A?\n[state b]\nprompt = B?\nweight = 0.5\n[state end]\nprompt = done\nterminal = true\n").unwrap()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn skip_zeroes_weights() {
        let f = fsm();
        let d = DirectiveSet { skip: set(&["a"]), ..Default::default() };
        let (w, warn) = update_weights(&f.default_weights(), &f, &d, "neutral", &PolicyConfig::default());
        assert_eq!(w["a"], 0.0);
        assert_eq!(w["b"], 0.5);
        assert!(warn.is_empty());
    }

    #[test]
    fn nothing_changes_without_input() {
        let f = fsm();
        let (w, _) = update_weights(&f.default_weights(), &f, &DirectiveSet::default(), "neutral", &PolicyConfig::default());
        assert_eq!(w, f.default_weights());
    }

    #[test]
    fn ask_beats_skip() {
        let f = fsm();
        let d = DirectiveSet { skip: set(&["b"]), ask: set(&["b"]), ..Default::default() };
        let (w, _) = update_weights(&f.default_weights(), &f, &d, "neutral", &PolicyConfig::default());
        assert_eq!(w["b"], 1.0);
    }

    #[test]
    fn deltas_clamp_and_unknown_states_warn() {
        let f = fsm();
        let mut policy = PolicyConfig::default();
        policy.belief_deltas.insert("confused".into(), [("a".to_string(), 0.5), ("b".to_string(), -0.9)].into());
        let d = DirectiveSet { skip: set(&["ghost"]), ..Default::default() };
        let (w, warn) = update_weights(&f.default_weights(), &f, &d, "confused", &policy);
        assert_eq!((w["a"], w["b"]), (1.0, 0.0));
        assert_eq!(warn.len(), 1);
        assert!(!w.contains_key("ghost"));
    }

    #[test]
    fn partition_by_threshold() {
        let f = fsm();
        let w: BTreeMap<String, f64> = [("a".to_string(), 1.0), ("b".to_string(), 0.0)].into();
        let p = partition_states(&f, &w, &BTreeMap::new(), &PolicyConfig::default());
        assert_eq!((p.ask, p.skip), (vec!["a".to_string()], vec!["b".to_string()]));
        let full: BTreeMap<String, String> = [("a".to_string(), "x".to_string()), ("b".to_string(), "y".to_string())].into();
        assert_eq!(partition_states(&f, &w, &full, &PolicyConfig::default()), Partition::default());
    }
}
