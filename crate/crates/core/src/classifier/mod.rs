//! Latent belief classification.
//!
//! An LSTM classifier written from scratch (embedding, one LSTM layer,
//! dropout, dense softmax) trained with Adam, plus a multinomial naive
//! Bayes baseline over bags of words.

pub mod adam;
pub mod corpus;
pub mod lstm;
pub mod model_io;
pub mod naive_bayes;
pub mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{encode, Preprocessor, TokenList, Vocabulary};
use lstm::{forward, ModelParams};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use corpus::{format_corpus, parse_corpus, synthetic_corpus, LabeledUtterance};
pub use lstm::{backward, cross_entropy, lstm_cell, Dims, Matrix};
pub use model_io::{load_model, read_model, save_model, write_model};
pub use naive_bayes::{nb_predict, nb_train, NbModel};
pub use train::{baseline_holdout, evaluate, evaluate_corpus, holdout_indices, train, EpochStats, EvalReport, TrainConfig, TrainReport};

/// Belief labels used when no configuration overrides them.
pub const DEFAULT_LABELS: [&str; 3] = ["curious", "confused", "neutral"];

pub fn default_labels() -> Vec<String> {
    DEFAULT_LABELS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("model file is truncated while reading {field}")]
    Truncated { field: String },
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Probability vector over belief labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefDistribution {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl BeliefDistribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(labels.len(), probs.len());
        BeliefDistribution { labels, probs }
    }

    pub fn uniform(labels: Vec<String>) -> Self {
        let n = labels.len();
        BeliefDistribution { labels, probs: vec![1.0 / n as f64; n] }
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn label(&self) -> &str {
        &self.labels[self.argmax()]
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.probs[i])
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Anything that can turn raw text into a belief distribution.
pub trait BeliefPredictor: Send + Sync {
    fn labels(&self) -> &[String];
    fn predict(&self, text: &str) -> Result<BeliefDistribution, ClassifierError>;
}

/// A trained LSTM together with the vocabulary and label set it was
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefModel {
    pub labels: Vec<String>,
    pub vocab: Vocabulary,
    pub params: ModelParams,
    pub seq_len: usize,
}

impl BeliefModel {
    pub fn new(labels: Vec<String>, vocab: Vocabulary, params: ModelParams, seq_len: usize) -> Result<Self, ClassifierError> {
        params.validate()?;
        if params.dims.classes != labels.len() {
            return Err(ClassifierError::Shape(format!(
                "{} labels but {} output classes",
                labels.len(),
                params.dims.classes
            )));
        }
        if params.dims.vocab != vocab.len() {
            return Err(ClassifierError::Shape(format!(
                "vocabulary has {} words but embedding expects {}",
                vocab.len(),
                params.dims.vocab
            )));
        }
        if seq_len == 0 {
            return Err(ClassifierError::Config("sequence length must be positive".into()));
        }
        Ok(BeliefModel { labels, vocab, params, seq_len })
    }

    pub fn predict_indices(&self, indices: &[usize]) -> Result<BeliefDistribution, ClassifierError> {
        let (probs, _) = forward(indices, &self.params, None)?;
        Ok(BeliefDistribution::new(self.labels.clone(), probs))
    }

    pub fn predict_tokens(&self, tokens: &TokenList) -> Result<BeliefDistribution, ClassifierError> {
        let seq = encode(tokens, &self.vocab, self.seq_len);
        self.predict_indices(&seq.indices)
    }
}

/// A [`BeliefModel`] paired with the preprocessor used to train it.
#[derive(Debug, Clone)]
pub struct BeliefClassifier {
    pub model: BeliefModel,
    pub preprocessor: Preprocessor,
}

impl BeliefClassifier {
    pub fn new(model: BeliefModel, preprocessor: Preprocessor) -> Self {
        BeliefClassifier { model, preprocessor }
    }
}

impl BeliefPredictor for BeliefClassifier {
    fn labels(&self) -> &[String] {
        &self.model.labels
    }

    fn predict(&self, text: &str) -> Result<BeliefDistribution, ClassifierError> {
        self.model.predict_tokens(&self.preprocessor.preprocess(text))
    }
}

/// Always returns the same distribution. Used for scripted runs and tests
/// where the dialog flow must not depend on a trained model.
#[derive(Debug, Clone)]
pub struct FixedBelief {
    dist: BeliefDistribution,
}

impl FixedBelief {
    /// One-hot distribution on `label` over `labels`.
    pub fn one_hot(labels: Vec<String>, label: &str) -> Result<Self, ClassifierError> {
        let idx = labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| ClassifierError::Config(format!("unknown label {label}")))?;
        let mut probs = vec![0.0; labels.len()];
        probs[idx] = 1.0;
        Ok(FixedBelief { dist: BeliefDistribution::new(labels, probs) })
    }

    pub fn new(dist: BeliefDistribution) -> Self {
        FixedBelief { dist }
    }
}

impl BeliefPredictor for FixedBelief {
    fn labels(&self) -> &[String] {
        &self.dist.labels
    }

    fn predict(&self, _text: &str) -> Result<BeliefDistribution, ClassifierError> {
        Ok(self.dist.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.25, 0.5, 0.5]), 1);
        assert_eq!(BeliefDistribution::uniform(default_labels()).label(), "curious");
    }

    #[test]
    fn fixed_belief_is_one_hot() {
        let f = FixedBelief::one_hot(default_labels(), "confused").unwrap();
        let d = f.predict("anything").unwrap();
        assert_eq!(d.label(), "confused");
        assert_eq!(d.prob("confused"), Some(1.0));
        assert!(FixedBelief::one_hot(default_labels(), "angry").is_err());
    }

    #[test]
    fn model_checks_label_count() {
        let params = ModelParams::zeros(Dims::new(2, 2, 2, 3));
        let vocab = Vocabulary::from_words(["a", "b"]);
        assert!(BeliefModel::new(default_labels(), vocab.clone(), params.clone(), 5).is_ok());
        assert!(BeliefModel::new(vec!["x".into()], vocab, params, 5).is_err());
    }
}
