//! Multinomial naive Bayes over bags of preprocessed tokens, add-one
//! smoothing. Serves as the bag-of-words baseline for the LSTM.

use std::collections::{BTreeMap, BTreeSet};

use super::{BeliefDistribution, ClassifierError};
use crate::text::TokenList;

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub labels: Vec<String>,
    pub class_docs: Vec<usize>,
    pub class_tokens: Vec<usize>,
    pub token_counts: Vec<BTreeMap<String, usize>>,
    pub vocab: BTreeSet<String>,
}

impl NbModel {
    pub fn docs(&self) -> usize {
        self.class_docs.iter().sum()
    }
}

/// Fit on `(tokens, label index)` pairs.
pub fn nb_train(corpus: &[(TokenList, usize)], labels: &[String]) -> Result<NbModel, ClassifierError> {
    if corpus.is_empty() {
        return Err(ClassifierError::Input("naive Bayes corpus is empty".into()));
    }
    let c = labels.len();
    let mut model = NbModel {
        labels: labels.to_vec(),
        class_docs: vec![0; c],
        class_tokens: vec![0; c],
        token_counts: vec![BTreeMap::new(); c],
        vocab: BTreeSet::new(),
    };
    for (tokens, label) in corpus {
        if *label >= c {
            return Err(ClassifierError::Input(format!("label index {label} out of range")));
        }
        model.class_docs[*label] += 1;
        for t in &tokens.tokens {
            *model.token_counts[*label].entry(t.clone()).or_default() += 1;
            model.class_tokens[*label] += 1;
            model.vocab.insert(t.clone());
        }
    }
    Ok(model)
}

/// Normalised posterior over labels. Tokens never seen in training still
/// contribute the smoothed likelihood `1 / (N_c + |V|)`. With an empty
/// vocabulary every class gets the same factor and the priors decide.
pub fn nb_predict(model: &NbModel, tokens: &TokenList) -> BeliefDistribution {
    let n_docs = model.docs() as f64;
    let v = model.vocab.len() as f64;
    let log_post: Vec<f64> = (0..model.labels.len())
        .map(|c| {
            let prior = (model.class_docs[c] as f64 / n_docs).ln();
            let denom = (model.class_tokens[c] as f64 + v).max(1.0);
            tokens.tokens.iter().fold(prior, |acc, t| {
                let count = model.token_counts[c].get(t).copied().unwrap_or(0) as f64;
                acc + ((count + 1.0) / denom).ln()
            })
        })
        .collect();
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    BeliefDistribution::new(model.labels.clone(), exps.into_iter().map(|e| e / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("l{i}")).collect()
    }

    fn doc(s: &str) -> TokenList {
        TokenList::from_tokens(s.split_whitespace())
    }

    #[test]
    fn two_class_toy() {
        // A: cheap easy / B: hard heavy; |V| = 4, N_A = N_B = 2
        // P(easy|A) = 2/6, P(easy|B) = 1/6, equal priors -> A = 2/3
        let m = nb_train(&[(doc("cheap easy"), 0), (doc("hard heavy"), 1)], &labels(2)).unwrap();
        let d = nb_predict(&m, &doc("easy"));
        assert_eq!(d.argmax(), 0);
        assert!((d.probs[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_corpus_unseen_query_is_uniform() {
        let m = nb_train(&[(doc("a b"), 0), (doc("c d"), 1), (doc("e f"), 2)], &labels(3)).unwrap();
        let d = nb_predict(&m, &doc("zzz yyy"));
        for p in &d.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_query_returns_prior() {
        let m = nb_train(&[(doc("a"), 0), (doc("b"), 0), (doc("c"), 1)], &labels(2)).unwrap();
        let d = nb_predict(&m, &TokenList::default());
        assert!((d.probs[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(nb_train(&[], &labels(2)).is_err());
    }
}
