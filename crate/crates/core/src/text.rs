//! Tokenization, stop-word filtering, n-gram profiles and vocabularies.
//!
//! Every metric in the crate consumes [`TokenSequence`]s produced by
//! [`tokenize`], so the normalization rules here define what "the same word"
//! means everywhere else.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The shipped English stop-word list (179 entries, one per line, sorted).
pub const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");

/// An ordered list of normalized tokens for one caption or corpus sentence.
///
/// Tokens are never empty and never contain whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence {
    tokens: Vec<String>,
    source_id: Option<String>,
}

impl TokenSequence {
    /// Builds a sequence from already-normalized tokens.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::InvalidArgument(format!(
                "token {bad:?} is empty or contains whitespace"
            )));
        }
        Ok(Self {
            tokens,
            source_id: None,
        })
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = Some(id.into());
        self
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Keeps the tokens for which `keep` returns true, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        Self {
            tokens: self.tokens.iter().filter(|t| keep(t)).cloned().collect(),
            source_id: self.source_id.clone(),
        }
    }

    /// Joins the tokens with single spaces.
    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

/// Lowercases, splits on Unicode whitespace and strips ASCII punctuation from
/// both ends of every token. Tokens that are pure punctuation disappear.
pub fn tokenize(raw: &str) -> TokenSequence {
    let tokens = raw
        .split_whitespace()
        .map(|word| word.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|word| !word.is_empty())
        .map(str::to_lowercase)
        .collect();
    TokenSequence {
        tokens,
        source_id: None,
    }
}

/// A set of stop words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    words: BTreeSet<String>,
}

impl StopWords {
    /// The shipped English list.
    pub fn english() -> Self {
        Self::parse(STOPWORDS_EN)
    }

    /// One token per line; blank lines are ignored.
    pub fn parse(text: &str) -> Self {
        Self {
            words: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopWords {
    fn default() -> Self {
        Self::english()
    }
}

pub fn remove_stopwords(seq: &TokenSequence, stopwords: &StopWords) -> TokenSequence {
    seq.filter(|t| !stopwords.contains(t))
}

/// A contiguous run of tokens.
pub type NGram = Vec<String>;

/// Multiset of the n-grams of one sentence for a fixed order `n`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NGramProfile {
    n: usize,
    counts: BTreeMap<NGram, usize>,
}

impl NGramProfile {
    pub fn from_counts(n: usize, counts: BTreeMap<NGram, usize>) -> Self {
        let counts = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        Self { n, counts }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &BTreeMap<NGram, usize> {
        &self.counts
    }

    pub fn count(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Sum of all counts, i.e. the number of n-gram positions in the source.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NGram, usize)> {
        self.counts.iter().map(|(g, c)| (g, *c))
    }
}

/// Counts the n-grams of `seq`. Orders outside `1..=4` are rejected.
pub fn ngrams(seq: &TokenSequence, n: usize) -> Result<NGramProfile> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "n-gram order must be in 1..=4, got {n}"
        )));
    }
    let mut counts = BTreeMap::new();
    for window in seq.tokens.windows(n) {
        *counts.entry(window.to_vec()).or_insert(0) += 1;
    }
    Ok(NGramProfile { n, counts })
}

/// Id of the padding token.
pub const PAD_ID: usize = 0;
/// Id of the start-of-sentence token fed to the decoder.
pub const START_ID: usize = 1;
/// Id of the end-of-sentence token.
pub const END_ID: usize = 2;
/// Id every out-of-vocabulary token maps to.
pub const UNK_ID: usize = 3;

pub const PAD: &str = "<pad>";
pub const START: &str = "<start>";
pub const END: &str = "<end>";
pub const UNK: &str = "<unk>";

const RESERVED: [&str; 4] = [PAD, START, END, UNK];

/// Bijection between tokens and integer ids. Ids 0 to 3 are reserved for
/// `<pad>`, `<start>`, `<end>` and `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary whose non-reserved ids follow the iteration order of
    /// `tokens`. Duplicates and reserved tokens are skipped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for reserved in RESERVED {
            vocab.push(reserved);
        }
        for token in tokens {
            let token = token.as_ref();
            if !vocab.ids.contains_key(token) {
                vocab.push(token);
            }
        }
        vocab
    }

    fn push(&mut self, token: &str) {
        self.ids.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
    }

    /// Total size including the four reserved entries.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    /// Number of non-reserved entries.
    pub fn word_count(&self) -> usize {
        self.tokens.len() - RESERVED.len()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    /// All tokens in id order, reserved entries included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Non-reserved tokens in id order.
    pub fn words(&self) -> impl Iterator<Item = (usize, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(RESERVED.len())
            .map(|(i, t)| (i, t.as_str()))
    }

    pub fn encode(&self, seq: &TokenSequence) -> Vec<usize> {
        seq.iter().map(|t| self.id_or_unk(t)).collect()
    }

    /// Hex SHA-256 over the id-ordered tokens joined by newlines.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 {
                hasher.update(b"\n");
            }
            hasher.update(token.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Reads a UTF-8 file with one sentence per line, tokenizing each and
/// dropping lines that leave no tokens.
pub fn read_sentences(path: &Path) -> Result<Vec<TokenSequence>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().map(tokenize).filter(|s| !s.is_empty()).collect())
}

/// Builds a vocabulary from a corpus. Tokens seen fewer than `min_count` times
/// are left out; ids follow descending frequency, ties broken lexicographically.
pub fn build_vocab(corpus: &[TokenSequence], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    if corpus.iter().all(TokenSequence::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for token in corpus.iter().flat_map(TokenSequence::iter) {
        *freq.entry(token).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|(t, c)| *c >= min_count && !RESERVED.contains(t))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t)))
}
