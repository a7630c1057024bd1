use std::collections::HashSet;

use belief_dialog::bundled;
use belief_dialog::classifier::{nb_predict, nb_train};
use belief_dialog::text::{build_vocabulary, encode, tokenize, TokenList, Vocabulary, DEFAULT_SEQ_LEN, DEFAULT_VOCAB_SIZE};
use proptest::prelude::*;

fn doc(s: &str) -> TokenList {
    TokenList::from_tokens(s.split_whitespace())
}

fn labels() -> Vec<String> {
    vec!["a".into(), "b".into()]
}

fn toy() -> Vec<(TokenList, usize)> {
    [("easy course", 0), ("easy fun", 0), ("fun class", 0), ("hard course", 1), ("hard exam", 1), ("boring class", 1)]
        .into_iter()
        .map(|(s, l)| (doc(s), l))
        .collect()
}

#[test]
fn six_document_posteriors() {
    // |V| = 7, both classes hold 6 tokens, equal priors.
    let m = nb_train(&toy(), &labels()).unwrap();
    let cases: [(&str, f64); 4] = [
        // easy: 3/13 vs 1/13, class: 2/13 vs 2/13
        ("easy class", 6.0 / 8.0),
        // hard 1 vs 3, exam 1 vs 2, course 2 vs 2 (all over 13)
        ("hard exam course", 2.0 / 14.0),
        ("", 0.5),
        // unseen tokens are smoothed identically for both classes
        ("zebra fun", 3.0 / 4.0),
    ];
    for (q, pa) in cases {
        let d = nb_predict(&m, &doc(q));
        assert!((d.probs[0] - pa).abs() < 1e-9, "{q}: {} vs {pa}", d.probs[0]);
        assert!((d.probs[1] - (1.0 - pa)).abs() < 1e-9);
    }
}

fn brute_force(corpus: &[(TokenList, usize)], classes: usize, query: &TokenList) -> Vec<f64> {
    let vocab: HashSet<&String> = corpus.iter().flat_map(|(t, _)| &t.tokens).collect();
    let scores: Vec<f64> = (0..classes)
        .map(|c| {
            let docs: Vec<&TokenList> = corpus.iter().filter(|(_, l)| *l == c).map(|(t, _)| t).collect();
            let n: usize = docs.iter().map(|d| d.len()).sum();
            let mut s = docs.len() as f64 / corpus.len() as f64;
            for w in &query.tokens {
                let count = docs.iter().flat_map(|d| &d.tokens).filter(|t| *t == w).count();
                s *= (count as f64 + 1.0) / (n + vocab.len()).max(1) as f64;
            }
            s
        })
        .collect();
    let z: f64 = scores.iter().sum();
    scores.iter().map(|s| s / z).collect()
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["w0", "w1", "w2", "w3", "w4", "w5"]).prop_map(str::to_string)
}

proptest! {
    #[test]
    fn bayes_matches_direct_products(
        corpus in prop::collection::vec((prop::collection::vec(word(), 0..5), 0usize..2), 2..10),
        query in prop::collection::vec(word(), 0..4),
    ) {
        let mut corpus: Vec<(TokenList, usize)> = corpus.into_iter().map(|(w, l)| (TokenList::from_tokens(w), l)).collect();
        corpus[0].1 = 0;
        corpus[1].1 = 1;
        let q = TokenList::from_tokens(query);
        let got = nb_predict(&nb_train(&corpus, &labels()).unwrap(), &q);
        let want = brute_force(&corpus, 2, &q);
        for (g, w) in got.probs.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn encoding_contract(text in "[a-zA-Z0-9 ,.!?']{0,400}") {
        let pre = bundled::preprocessor().unwrap();
        let corpus: Vec<TokenList> = bundled::CORPUS.lines().filter_map(|l| l.split_once('\t')).map(|(_, u)| pre.preprocess(u)).collect();
        let vocab = build_vocabulary(&corpus, DEFAULT_VOCAB_SIZE);
        let seq = encode(&pre.preprocess(&text), &vocab, DEFAULT_SEQ_LEN);
        prop_assert_eq!(seq.indices.len(), DEFAULT_SEQ_LEN);
        prop_assert!(seq.indices.iter().all(|&i| i <= DEFAULT_VOCAB_SIZE));
    }

    #[test]
    fn preprocessing_is_idempotent(text in "[a-zA-Z0-9 ,.!?'-]{0,200}") {
        let pre = bundled::preprocessor().unwrap();
        let once = pre.preprocess(&text);
        let twice = pre.preprocess(&once.joined());
        prop_assert_eq!(once.tokens, twice.tokens);
    }

    #[test]
    fn vocabulary_is_deterministic_and_frequency_ordered(
        docs in prop::collection::vec(prop::collection::vec(word(), 0..8), 0..12),
        max in 0usize..8,
    ) {
        let corpus: Vec<TokenList> = docs.into_iter().map(TokenList::from_tokens).collect();
        let v1 = build_vocabulary(&corpus, max);
        let mut reversed = corpus.clone();
        reversed.reverse();
        let v2 = build_vocabulary(&reversed, max);
        prop_assert_eq!(v1.words(), v2.words());
        prop_assert!(v1.len() <= max);
        let freq = |w: &str| corpus.iter().flat_map(|d| &d.tokens).filter(|t| *t == w).count();
        for pair in v1.words().windows(2) {
            prop_assert!(freq(&pair[0]) >= freq(&pair[1]));
        }
        let kept: HashSet<&String> = v1.words().iter().collect();
        let min_kept = v1.words().iter().map(|w| freq(w)).min().unwrap_or(0);
        for t in corpus.iter().flat_map(|d| &d.tokens) {
            if !kept.contains(t) && max > 0 {
                prop_assert!(freq(t) <= min_kept);
            }
        }
        for (i, w) in v1.words().iter().enumerate() {
            prop_assert_eq!(v1.index(w), i + 1);
        }
    }

    #[test]
    fn tokens_are_lowercased_alphanumerics(text in "\\PC{0,100}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphanumeric));
            prop_assert_eq!(t.to_lowercase(), t);
        }
    }
}

#[test]
fn worked_encoding_vector() {
    // i, am, very, disappointed at 10, 100, 23, 467; "today" is out of vocabulary
    let mut words: Vec<String> = (1..=467).map(|i| format!("filler{i}")).collect();
    words[9] = "i".into();
    words[99] = "am".into();
    words[22] = "very".into();
    words[466] = "disappointed".into();
    let vocab = Vocabulary::from_words(words);
    let tokens = TokenList::from_tokens(tokenize("I am very disappointed today"));
    assert_eq!(encode(&tokens, &vocab, 5).indices, [10, 100, 23, 467, 0]);
    let padded = encode(&tokens, &vocab, DEFAULT_SEQ_LEN);
    assert_eq!(padded.indices[..45], [0; 45]);
    assert_eq!(padded.indices[45..], [10, 100, 23, 467, 0]);
}
