use std::sync::Arc;

use belief_dialog::bundled;
use belief_dialog::classifier::{default_labels, FixedBelief};
use belief_dialog::dialog::{DialogEngine, SessionStatus};

const SCRIPT: [&str; 3] = [
    "I am a junior year student with interest in statistics and data analysis",
    "I would prefer a class with lighter workload and higher helpfulness rating",
    "I prefer morning classes as I sleep early at night.",
];

fn engine(label: &str) -> DialogEngine {
    DialogEngine::new(
        Arc::new(FixedBelief::one_hot(default_labels(), label).unwrap()),
        bundled::lexicon().unwrap(),
        bundled::assertions().unwrap(),
        bundled::rules().unwrap(),
        bundled::ontology().unwrap(),
        bundled::fsm().unwrap(),
        bundled::policy().unwrap(),
    )
    .unwrap()
}

#[test]
fn curious_student_script() {
    let e = engine("curious");
    let mut s = e.new_session("t1");
    assert!(s.transcript[0].text.starts_with("Hi! I am your advisor."));

    let r1 = e.process_turn(&mut s, SCRIPT[0]).unwrap();
    assert_eq!(r1.payload.belief.label, "curious");
    assert!(r1.payload.skipped_states.contains(&"ask_interest".to_string()));
    assert!(r1.payload.skipped_states.contains(&"ask_semester".to_string()));
    assert_eq!(r1.payload.asked_state.as_deref(), Some("ask_workload"));
    assert!(r1.reply.contains("about the workload"));
    assert_eq!(s.slots["interest"], "statistics");
    assert_eq!(s.slots["semester"], "junior");

    let r2 = e.process_turn(&mut s, SCRIPT[1]).unwrap();
    assert_eq!(s.slots["workload"], "light");
    assert_eq!(r2.reply, "Do you have any timing preferences?");

    let r3 = e.process_turn(&mut s, SCRIPT[2]).unwrap();
    assert_eq!(s.slots["timing"], "morning");
    assert!(r3.payload.skipped_states.contains(&"ask_extra_details".to_string()));
    assert_eq!(r3.reply, "I would advise you STATS250 \"Statistics and Data Analysis\" which is an easy course.");
    assert_eq!(r3.payload.recommendation.as_ref().unwrap().code, "stats250");
    assert_eq!(s.status, SessionStatus::Completed);
    assert_eq!(s.transcript.len(), 7);
}

#[test]
fn confused_student_hears_the_goal_question() {
    let e = engine("confused");
    let mut s = e.new_session("t2");
    let r = e.process_turn(&mut s, SCRIPT[0]).unwrap();
    assert_eq!(r.payload.asked_state.as_deref(), Some("confirm_goal"));
    assert!(r.payload.knows.contains(&"advise_light_courses".to_string()));
    assert!(r.payload.fired_rules.contains(&"not_confident".to_string()));
}

#[test]
fn bundled_model_reads_the_opening_turn_as_curious() {
    use belief_dialog::classifier::{parse_corpus, write_model, BeliefPredictor};
    let c = bundled::classifier().unwrap();
    assert_eq!(c.model.labels, default_labels());
    assert_eq!(c.predict(SCRIPT[0]).unwrap().label(), "curious");
    let corpus = parse_corpus(bundled::CORPUS).unwrap();
    let right = corpus.iter().filter(|ex| c.predict(&ex.text).unwrap().label() == ex.label).count();
    assert!(right as f64 / corpus.len() as f64 >= 0.8, "{right} of {}", corpus.len());
    let mut bytes = Vec::new();
    write_model(&c.model, &mut bytes).unwrap();
    assert_eq!(bytes, bundled::MODEL);
}

#[test]
fn bundled_model_completes_the_script() {
    let c = bundled::classifier().unwrap();
    let e = DialogEngine { classifier: Arc::new(c), ..engine("neutral") };
    let mut s = e.new_session("t");
    let replies: Vec<_> = SCRIPT.iter().map(|t| e.process_turn(&mut s, t).unwrap()).collect();
    assert_eq!(replies[0].payload.belief.label, "curious");
    assert_eq!(replies[2].reply, "I would advise you STATS250 \"Statistics and Data Analysis\" which is an easy course.");
}
