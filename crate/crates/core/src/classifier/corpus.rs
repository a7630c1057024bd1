//! Labelled training corpora: the `label<TAB>utterance` file format and the
//! templated synthetic student-advisor corpus.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledUtterance {
    pub label: String,
    pub text: String,
}

impl LabeledUtterance {
    pub fn new(label: impl Into<String>, text: impl Into<String>) -> Self {
        LabeledUtterance { label: label.into(), text: text.into() }
    }
}

/// Parse `label<TAB>utterance` lines. Blank lines and `#` comment lines are
/// skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<LabeledUtterance>, ClassifierError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, utterance) = line.split_once('\t').ok_or_else(|| ClassifierError::Corpus {
            line: i + 1,
            message: "expected `label<TAB>utterance`".into(),
        })?;
        let label = label.trim();
        if label.is_empty() {
            return Err(ClassifierError::Corpus { line: i + 1, message: "empty label".into() });
        }
        out.push(LabeledUtterance::new(label.to_lowercase(), utterance.trim()));
    }
    Ok(out)
}

pub fn format_corpus(corpus: &[LabeledUtterance]) -> String {
    let mut s = String::new();
    for ex in corpus {
        let _ = writeln!(s, "{}\t{}", ex.label, ex.text);
    }
    s
}

const YEARS: [&str; 6] = ["freshman", "sophomore", "junior", "senior", "first", "second"];
const TOPICS: [&str; 9] = [
    "statistics",
    "data analysis",
    "machine learning",
    "economics",
    "physics",
    "biology",
    "psychology",
    "history",
    "calculus",
];
const COURSES: [&str; 6] = ["STATS250", "EECS445", "ECON101", "MATH215", "PHYS140", "PSYCH111"];
const CREDITS: [&str; 4] = ["12", "15", "16", "18"];
const SEASONS: [&str; 4] = ["fall", "winter", "spring", "summer"];

const CURIOUS: [&str; 10] = [
    "I am a {year} year student with interest in {topic} and {topic2}",
    "I am really curious about {topic} and want to learn more",
    "I am excited to explore {topic} courses next semester",
    "Tell me more about the {topic} classes you offer",
    "I have a strong interest in {topic} and {topic2}",
    "I love {topic} and want to take an advanced class in it",
    "I am fascinated by {topic}, what else can I study?",
    "Which {topic} courses would deepen my knowledge?",
    "I am a {year} student eager to discover new ideas in {topic}",
    "I enjoyed {course} and I am keen to learn more {topic}",
];

const CONFUSED: [&str; 10] = [
    "I have no idea what classes to take next semester",
    "I am confused about which {topic} course to pick",
    "I feel lost and unsure about my major",
    "I have no inkling of where I want my life to go",
    "Can you help me decide? I am overwhelmed by all the options",
    "I am unable to determine what classes to take",
    "I am not sure if {course} is right for me, I am so confused",
    "Everything seems hard and I do not know what to choose",
    "I am a {year} student and I am lost, I do not know what to do",
    "I took {course} and struggled, now I am unsure what to take",
];

const NEUTRAL: [&str; 10] = [
    "What time does {course} meet?",
    "I need {credits} credits this semester",
    "Is {course} offered in the {season}?",
    "How do I register for {course}?",
    "Which room is the {topic} lecture in?",
    "What are the prerequisites for {course}?",
    "I am a {year} student taking {credits} credits",
    "Please list the sections of {course}",
    "When is the registration deadline for the {season} term?",
    "Does {course} have a lab section on Friday?",
];

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    let pick = |xs: &[&'static str], rng: &mut ChaCha8Rng| *xs.choose(rng).expect("non-empty");
    let topic = pick(&TOPICS, rng);
    let mut topic2 = pick(&TOPICS, rng);
    while topic2 == topic {
        topic2 = pick(&TOPICS, rng);
    }
    template
        .replace("{year}", pick(&YEARS, rng))
        .replace("{topic2}", topic2)
        .replace("{topic}", topic)
        .replace("{course}", pick(&COURSES, rng))
        .replace("{credits}", pick(&CREDITS, rng))
        .replace("{season}", pick(&SEASONS, rng))
}

/// Templated student utterances, `per_class` for each of curious, confused
/// and neutral, interleaved by class.
pub fn synthetic_corpus(per_class: usize, seed: u64) -> Vec<LabeledUtterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * 3);
    for _ in 0..per_class {
        for (label, templates) in [("curious", &CURIOUS), ("confused", &CONFUSED), ("neutral", &NEUTRAL)] {
            let t = templates.choose(&mut rng).expect("non-empty");
            out.push(LabeledUtterance::new(label, fill(t, &mut rng)));
        }
    }
    out
}
