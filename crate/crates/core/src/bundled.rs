//! Advisor-domain assets compiled into the library.

use crate::classifier::{read_model, BeliefClassifier, ClassifierError};
use crate::dialog::{parse_fsm, parse_policy, DialogError, Fsm, PolicyConfig};
use crate::epistemic::{parse_rules, EngineError, RuleBase};
use crate::extraction::{parse_assertion_rules, parse_lexicon, ExtractionError, FactAssertionRule, SynonymLexicon};
use crate::knowledge::{parse_ontology, KbError, KnowledgeGraph};
use crate::text::{parse_entity_lexicon, parse_stopwords, Preprocessor, TextError};

pub const STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const ENTITIES: &str = include_str!("../data/entities.txt");
pub const ONTOLOGY: &str = include_str!("../data/ontology.txt");
pub const LEXICON: &str = include_str!("../data/lexicon.txt");
pub const ASSERTIONS: &str = include_str!("../data/assertions.txt");
pub const RULES: &str = include_str!("../data/rules.dl");
pub const FSM: &str = include_str!("../data/advisor.fsm");
pub const POLICY: &str = include_str!("../data/policy.ini");
pub const CORPUS: &str = include_str!("../data/belief_corpus.tsv");
/// LSTM trained on [`CORPUS`] with the default configuration.
pub const MODEL: &[u8] = include_bytes!("../data/advisor.model");

pub fn preprocessor() -> Result<Preprocessor, TextError> {
    Ok(Preprocessor::new(parse_stopwords(STOPWORDS), parse_entity_lexicon(ENTITIES)?))
}

pub fn ontology() -> Result<KnowledgeGraph, KbError> {
    parse_ontology(ONTOLOGY)
}

pub fn lexicon() -> Result<SynonymLexicon, ExtractionError> {
    parse_lexicon(LEXICON)
}

pub fn assertions() -> Result<Vec<FactAssertionRule>, ExtractionError> {
    parse_assertion_rules(ASSERTIONS)
}

pub fn rules() -> Result<RuleBase, EngineError> {
    parse_rules(RULES)
}

pub fn fsm() -> Result<Fsm, DialogError> {
    parse_fsm(FSM)
}

pub fn policy() -> Result<PolicyConfig, DialogError> {
    parse_policy(POLICY)
}

pub fn classifier() -> Result<BeliefClassifier, ClassifierError> {
    let model = read_model(&mut &MODEL[..])?;
    let pre = preprocessor().map_err(|e| ClassifierError::Config(e.to_string()))?;
    Ok(BeliefClassifier::new(model, pre))
}
