//! Mini-batch training loop and evaluation.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::corpus::LabeledUtterance;
use super::lstm::{backward_into, cross_entropy, forward, Dims, ModelParams};
use super::naive_bayes::{nb_predict, nb_train};
use super::{argmax, BeliefModel, ClassifierError};
use crate::text::{build_vocabulary, encode, Preprocessor, TokenList, DEFAULT_SEQ_LEN, DEFAULT_VOCAB_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub dropout_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub vocab_size: usize,
    pub seq_len: usize,
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            adam: AdamConfig::default(),
            dropout_rate: 0.5,
            seed: 42,
            train_fraction: 0.75,
            vocab_size: DEFAULT_VOCAB_SIZE,
            seq_len: DEFAULT_SEQ_LEN,
            embed_dim: 32,
            hidden: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie strictly between 0 and 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if self.vocab_size == 0 || self.seq_len == 0 || self.embed_dim == 0 || self.hidden == 0 {
            return bad("layer sizes must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training examples, with dropout.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub labels: Vec<String>,
    pub train_size: usize,
    pub test_size: usize,
    /// Dropout-free training loss before the first update.
    pub initial_train_loss: f64,
    /// Dropout-free training loss after the last epoch.
    pub final_train_loss: f64,
    pub epochs: Vec<EpochStats>,
    pub test: Option<EvalReport>,
    pub warnings: Vec<String>,
}

/// Accuracy and confusion matrix from `(true, predicted)` label pairs.
pub fn evaluate_predictions(classes: usize, pairs: &[(usize, usize)]) -> Result<EvalReport, ClassifierError> {
    if pairs.is_empty() {
        return Err(ClassifierError::Input("empty test set".into()));
    }
    let mut confusion = vec![vec![0; classes]; classes];
    let mut correct = 0;
    for &(t, p) in pairs {
        confusion[t][p] += 1;
        correct += usize::from(t == p);
    }
    Ok(EvalReport { accuracy: correct as f64 / pairs.len() as f64, confusion, total: pairs.len() })
}

/// Evaluate a model on encoded `(indices, true label)` pairs.
pub fn evaluate(model: &BeliefModel, testset: &[(Vec<usize>, usize)]) -> Result<EvalReport, ClassifierError> {
    let mut pairs = Vec::with_capacity(testset.len());
    for (seq, label) in testset {
        if *label >= model.labels.len() {
            return Err(ClassifierError::Input(format!("label index {label} out of range")));
        }
        pairs.push((*label, model.predict_indices(seq)?.argmax()));
    }
    evaluate_predictions(model.labels.len(), &pairs)
}

fn mean_loss(params: &ModelParams, data: &[(Vec<usize>, usize)]) -> Result<f64, ClassifierError> {
    let mut total = 0.0;
    for (seq, label) in data {
        let (probs, _) = forward(seq, params, None)?;
        total += cross_entropy(&probs, *label);
    }
    Ok(total / data.len().max(1) as f64)
}

fn sample_mask<R: Rng>(hidden: usize, rate: f64, rng: &mut R) -> Option<Vec<f64>> {
    if rate == 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some((0..hidden).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect())
}

/// Per-label shuffle, then the first `round(n * fraction)` examples of each
/// label go to training. Every label with two or more examples keeps at
/// least one on each side.
pub fn stratified_split<R: Rng>(labels: &[usize], classes: usize, fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        let n = members.len();
        if n == 0 {
            continue;
        }
        let mut k = (n as f64 * fraction).round() as usize;
        k = if n >= 2 { k.clamp(1, n - 1) } else { n };
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    test.sort_unstable();
    (train, test)
}

fn label_ids(corpus: &[LabeledUtterance], labels: &[String]) -> Result<Vec<usize>, ClassifierError> {
    corpus
        .iter()
        .map(|ex| {
            labels
                .iter()
                .position(|l| *l == ex.label)
                .ok_or_else(|| ClassifierError::Input(format!("corpus label {:?} is not configured", ex.label)))
        })
        .collect()
}

/// The `(train, test)` corpus indices that [`train`] uses for `cfg.seed`
/// and `cfg.train_fraction`.
pub fn holdout_indices(
    corpus: &[LabeledUtterance],
    labels: &[String],
    cfg: &TrainConfig,
) -> Result<(Vec<usize>, Vec<usize>), ClassifierError> {
    cfg.validate()?;
    let ids = label_ids(corpus, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(stratified_split(&ids, labels.len(), cfg.train_fraction, &mut rng))
}

/// Score a trained model on labelled utterances.
pub fn evaluate_corpus(
    model: &BeliefModel,
    preprocessor: &Preprocessor,
    examples: &[LabeledUtterance],
) -> Result<EvalReport, ClassifierError> {
    let ids = label_ids(examples, &model.labels)?;
    let set: Vec<(Vec<usize>, usize)> = examples
        .iter()
        .zip(ids)
        .map(|(ex, id)| (encode(&preprocessor.preprocess(&ex.text), &model.vocab, model.seq_len).indices, id))
        .collect();
    evaluate(model, &set)
}

/// Naive Bayes baseline fitted and scored on the same held-out split that
/// [`train`] uses for `cfg.seed` and `cfg.train_fraction`.
pub fn baseline_holdout(
    corpus: &[LabeledUtterance],
    labels: &[String],
    preprocessor: &Preprocessor,
    cfg: &TrainConfig,
) -> Result<EvalReport, ClassifierError> {
    let ids = label_ids(corpus, labels)?;
    let (train_idx, test_idx) = holdout_indices(corpus, labels, cfg)?;
    let tokens = |i: usize| preprocessor.preprocess(&corpus[i].text);
    let fit: Vec<(TokenList, usize)> = train_idx.iter().map(|&i| (tokens(i), ids[i])).collect();
    let nb = nb_train(&fit, labels)?;
    let pairs: Vec<(usize, usize)> = test_idx.iter().map(|&i| (ids[i], nb_predict(&nb, &tokens(i)).argmax())).collect();
    evaluate_predictions(labels.len(), &pairs)
}

/// Train a classifier. Deterministic for a fixed `cfg.seed`.
pub fn train(
    corpus: &[LabeledUtterance],
    labels: &[String],
    preprocessor: &Preprocessor,
    cfg: &TrainConfig,
) -> Result<(BeliefModel, TrainReport), ClassifierError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(ClassifierError::Input("training corpus is empty".into()));
    }
    if labels.is_empty() {
        return Err(ClassifierError::Config("no labels configured".into()));
    }
    let label_ids = label_ids(corpus, labels)?;
    let mut warnings = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if !label_ids.contains(&i) {
            warnings.push(format!("label {l:?} has no training examples"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, test_idx) = stratified_split(&label_ids, labels.len(), cfg.train_fraction, &mut rng);

    let tokens: Vec<TokenList> = corpus.iter().map(|ex| preprocessor.preprocess(&ex.text)).collect();
    let train_tokens: Vec<TokenList> = train_idx.iter().map(|&i| tokens[i].clone()).collect();
    let vocab = build_vocabulary(&train_tokens, cfg.vocab_size);
    let encode_at = |i: usize| (encode(&tokens[i], &vocab, cfg.seq_len).indices, label_ids[i]);
    let train_set: Vec<(Vec<usize>, usize)> = train_idx.iter().map(|&i| encode_at(i)).collect();
    let test_set: Vec<(Vec<usize>, usize)> = test_idx.iter().map(|&i| encode_at(i)).collect();

    let dims = Dims::new(vocab.len(), cfg.embed_dim, cfg.hidden, labels.len());
    let mut params = ModelParams::init(dims, &mut rng);
    let mut adam = AdamState::new(dims);
    let initial_train_loss = mean_loss(&params, &train_set)?;
    info!(
        "training on {} examples ({} held out), vocabulary {}, {} parameters",
        train_set.len(),
        test_set.len(),
        vocab.len(),
        params.num_params()
    );

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = ModelParams::zeros(dims);
            for &j in batch {
                let (seq, label) = &train_set[j];
                let mask = sample_mask(dims.hidden, cfg.dropout_rate, &mut rng);
                let (probs, cache) = forward(seq, &params, mask.as_deref())?;
                loss_sum += cross_entropy(&probs, *label);
                correct += usize::from(argmax(&probs) == *label);
                backward_into(&params, &cache, *label, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut params, &grads, &mut adam, &cfg.adam);
        }
        if !params.is_finite() {
            return Err(ClassifierError::Numeric(format!("parameters became non-finite in epoch {epoch}")));
        }
        let model_view = BeliefModel { labels: labels.to_vec(), vocab: vocab.clone(), params: params.clone(), seq_len: cfg.seq_len };
        let test_accuracy = if test_set.is_empty() { None } else { Some(evaluate(&model_view, &test_set)?.accuracy) };
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            test_accuracy,
        };
        debug!("epoch {epoch}: loss {:.4} acc {:.3} test {:?}", stats.train_loss, stats.train_accuracy, stats.test_accuracy);
        epochs.push(stats);
    }

    let final_train_loss = mean_loss(&params, &train_set)?;
    let model = BeliefModel::new(labels.to_vec(), vocab, params, cfg.seq_len)?;
    let test = if test_set.is_empty() { None } else { Some(evaluate(&model, &test_set)?) };
    let report = TrainReport {
        labels: labels.to_vec(),
        train_size: train_set.len(),
        test_size: test_set.len(),
        initial_train_loss,
        final_train_loss,
        epochs,
        test,
        warnings,
    };
    Ok((model, report))
}
