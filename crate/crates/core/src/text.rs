//! Text preprocessing, vocabulary construction and fixed-length encoding.
//!
//! Everything here is a pure function of its inputs. The classifier and the
//! extraction stage share the same [`Preprocessor`], so a token that reaches
//! the LSTM is always one the rest of the pipeline would also recognise.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default vocabulary size.
pub const DEFAULT_VOCAB_SIZE: usize = 300;
/// Default encoded sequence length.
pub const DEFAULT_SEQ_LEN: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("entity lexicon line {line}: {message}")]
    Pattern { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Advisor,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::User => f.write_str("user"),
            Speaker::Advisor => f.write_str("advisor"),
        }
    }
}

/// One speaker turn of raw text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub raw: String,
    pub speaker: Speaker,
    pub turn_index: usize,
}

impl Utterance {
    pub fn user(raw: impl Into<String>, turn_index: usize) -> Self {
        Utterance { raw: raw.into(), speaker: Speaker::User, turn_index }
    }

    pub fn advisor(raw: impl Into<String>, turn_index: usize) -> Self {
        Utterance { raw: raw.into(), speaker: Speaker::Advisor, turn_index }
    }
}

/// Preprocessed tokens with an optional entity tag per token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenList {
    pub tokens: Vec<String>,
    pub entity_tags: Vec<Option<String>>,
}

impl TokenList {
    /// Untagged token list, mostly useful in tests and for pre-tokenized input.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let entity_tags = vec![None; tokens.len()];
        TokenList { tokens, entity_tags }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn tag(&self, i: usize) -> Option<&str> {
        self.entity_tags.get(i).and_then(|t| t.as_deref())
    }
}

/// A compiled entity pattern from the restricted lexicon syntax.
///
/// Accepted syntax: literal letters, digits and `_`; character classes such
/// as `[a-z]` or `[a-z0-9]` (ranges and single characters only); `+` after
/// any element. Patterns always match a whole token, case-insensitively.
#[derive(Debug, Clone)]
pub struct EntityPattern {
    pub tag: String,
    pub source: String,
    regex: Regex,
}

impl EntityPattern {
    pub fn new(tag: &str, source: &str) -> Result<Self, String> {
        let body = translate_restricted(source)?;
        let regex = Regex::new(&format!("^(?i:{body})$")).map_err(|e| e.to_string())?;
        Ok(EntityPattern { tag: tag.to_string(), source: source.to_string(), regex })
    }

    pub fn matches(&self, token: &str) -> bool {
        self.regex.is_match(token)
    }
}

fn translate_restricted(src: &str) -> Result<String, String> {
    if src.is_empty() {
        return Err("empty pattern".into());
    }
    let mut out = String::new();
    let mut chars = src.chars().peekable();
    let mut have_element = false;
    while let Some(c) = chars.next() {
        match c {
            '[' => {
                let mut class = String::new();
                let mut closed = false;
                for cc in chars.by_ref() {
                    if cc == ']' {
                        closed = true;
                        break;
                    }
                    if !(cc.is_ascii_alphanumeric() || cc == '-' || cc == '_') {
                        return Err(format!("character {cc:?} not allowed in a class"));
                    }
                    class.push(cc);
                }
                if !closed {
                    return Err("unterminated character class".into());
                }
                if class.is_empty() || class.starts_with('-') || class.ends_with('-') {
                    return Err(format!("malformed character class [{class}]"));
                }
                out.push('[');
                out.push_str(&class);
                out.push(']');
                have_element = true;
            }
            '+' => {
                if !have_element {
                    return Err("'+' must follow an element".into());
                }
                out.push('+');
                have_element = false;
            }
            c if c.is_alphanumeric() || c == '_' => {
                out.push_str(&regex::escape(&c.to_string()));
                have_element = true;
            }
            other => return Err(format!("unsupported pattern character {other:?}")),
        }
    }
    Ok(out)
}

/// Parse a stopword file: one word per line, `#` starts a comment.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Parse an entity lexicon: `TAG pattern` per line (a bare pattern is tagged
/// `ENTITY`), `#` comments.
pub fn parse_entity_lexicon(text: &str) -> Result<Vec<EntityPattern>, TextError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (tag, pat) = match fields.as_slice() {
            [pat] => ("ENTITY", *pat),
            [tag, pat] => (*tag, *pat),
            _ => {
                return Err(TextError::Pattern {
                    line: i + 1,
                    message: "expected `TAG pattern`".into(),
                })
            }
        };
        let p = EntityPattern::new(tag, pat)
            .map_err(|message| TextError::Pattern { line: i + 1, message })?;
        out.push(p);
    }
    Ok(out)
}

/// Lowercase and split into alphanumeric words. Apostrophes are dropped so
/// that contractions stay one word; every other non-alphanumeric character
/// is a separator.
pub fn tokenize(raw: &str) -> Vec<String> {
    let lower = raw.to_lowercase();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in lower.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if c == '\'' || c == '\u{2019}' {
            continue;
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Split an utterance into sentences on `.`, `?` and `!`. Empty pieces are
/// dropped.
pub fn split_sentences(raw: &str) -> Vec<&str> {
    raw.split(['.', '?', '!'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Stopword removal plus entity tagging over [`tokenize`].
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    pub stopwords: HashSet<String>,
    pub entities: Vec<EntityPattern>,
}

impl Preprocessor {
    pub fn new(stopwords: HashSet<String>, entities: Vec<EntityPattern>) -> Self {
        Preprocessor { stopwords, entities }
    }

    pub fn entity_tag(&self, token: &str) -> Option<&str> {
        self.entities.iter().find(|p| p.matches(token)).map(|p| p.tag.as_str())
    }

    pub fn preprocess(&self, raw: &str) -> TokenList {
        let mut list = TokenList::default();
        for tok in tokenize(raw) {
            let tag = self.entity_tag(&tok).map(str::to_string);
            if tag.is_none() && self.stopwords.contains(&tok) {
                continue;
            }
            list.tokens.push(tok);
            list.entity_tags.push(tag);
        }
        list
    }
}

/// Token → index map. Index 0 is reserved for padding and out-of-vocabulary
/// words, so real words occupy `1..=len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_index: HashMap<String, usize>,
    words: Vec<String>,
}

impl Vocabulary {
    /// Build from an ordered word list; `words[0]` gets index 1.
    pub fn from_words<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut vocab = Vocabulary::default();
        for w in words {
            let w = w.into();
            if vocab.word_to_index.contains_key(&w) {
                continue;
            }
            vocab.words.push(w.clone());
            vocab.word_to_index.insert(w, vocab.words.len());
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index(&self, word: &str) -> usize {
        self.word_to_index.get(word).copied().unwrap_or(0)
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        index.checked_sub(1).and_then(|i| self.words.get(i)).map(String::as_str)
    }

    /// Words in index order.
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// The `max_size` most frequent tokens, ranked by descending count with ties
/// broken lexicographically.
pub fn build_vocabulary(corpus: &[TokenList], max_size: usize) -> Vocabulary {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        for t in &doc.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    // BTreeMap order is already lexicographic; a stable sort keeps it for ties.
    ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    Vocabulary::from_words(ranked.into_iter().take(max_size).map(|(w, _)| w))
}

/// Fixed-length index vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub indices: Vec<usize>,
    pub true_length: usize,
}

/// Map tokens to indices, pre-pad with zeros and keep the last `len` indices
/// when the input is longer.
pub fn encode(tokens: &TokenList, vocab: &Vocabulary, len: usize) -> TokenSequence {
    assert!(len >= 1, "sequence length must be positive");
    let mapped: Vec<usize> = tokens.tokens.iter().map(|t| vocab.index(t)).collect();
    let mut indices = vec![0; len.saturating_sub(mapped.len())];
    let start = mapped.len().saturating_sub(len);
    indices.extend_from_slice(&mapped[start..]);
    TokenSequence { indices, true_length: mapped.len() }
}
