//! Tokenization, vocabulary construction, TF-IDF weights, and sliding
//! window co-occurrence statistics for PMI edges.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::{Corpus, Document};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Replacement token for anything that looks like a link.
pub const URL_TOKEN: &str = "<url>";
/// Replacement token for `@user` mentions.
pub const MENTION_TOKEN: &str = "<mention>";
/// Replacement token for `#topic` hashtags.
pub const HASHTAG_TOKEN: &str = "<hashtag>";

/// The three special tokens, always part of the vocabulary.
pub const SPECIAL_TOKENS: [&str; 3] = [URL_TOKEN, MENTION_TOKEN, HASHTAG_TOKEN];

#[derive(Debug, Error)]
pub enum TextStatsError {
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("vocabulary is empty after frequency filtering")]
    EmptyVocabulary,
    #[error("word {word:?} appears in a document but has document frequency 0")]
    InconsistentDocFreq { word: String },
    #[error("co-occurrence window must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("TF-IDF needs at least one document")]
    NoDocuments,
}

/// A document reduced to its token sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

/// Lowercases, splits on whitespace and punctuation boundaries, collapses
/// links, mentions, and hashtags to their special tokens, and drops
/// punctuation-only chunks.
///
/// A chunk counts as a link when it starts with `http://`, `https://`, or
/// `www.` (case-insensitive). Mentions and hashtags are chunks starting
/// with `@` or `#` followed by anything.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
        {
            out.push(URL_TOKEN.to_string());
            continue;
        }
        if raw.len() > 1 && raw.starts_with('@') {
            out.push(MENTION_TOKEN.to_string());
            continue;
        }
        if raw.len() > 1 && raw.starts_with('#') {
            out.push(HASHTAG_TOKEN.to_string());
            continue;
        }
        let mut current = String::new();
        for ch in lower.chars() {
            if ch.is_alphanumeric() {
                current.push(ch);
            } else if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

pub fn tokenize_doc(doc: &Document) -> TokenizedDoc {
    TokenizedDoc {
        doc_id: doc.doc_id.clone(),
        tokens: tokenize(&doc.text),
    }
}

/// Tokenizes every document of the corpus, in corpus order.
pub fn tokenize_corpus(corpus: &Corpus) -> Vec<TokenizedDoc> {
    let docs: Vec<&Document> = corpus.documents().collect();
    #[cfg(feature = "parallel")]
    {
        docs.par_iter().map(|d| tokenize_doc(d)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        docs.iter().map(|d| tokenize_doc(d)).collect()
    }
}

/// Word ids, corpus term counts, and document frequencies for all words
/// surviving the frequency filter, plus the special tokens.
///
/// Ids are dense and assigned by descending corpus frequency, ties broken
/// lexicographically.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    words: Vec<String>,
    term_counts: Vec<u64>,
    doc_freqs: Vec<u32>,
    min_count: u32,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn term_count(&self, id: u32) -> u64 {
        self.term_counts[id as usize]
    }

    pub fn doc_freq(&self, id: u32) -> u32 {
        self.doc_freqs[id as usize]
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn is_special(word: &str) -> bool {
        SPECIAL_TOKENS.contains(&word)
    }
}

/// Builds the vocabulary from tokenized documents. Words occurring fewer
/// than `min_count` times are dropped; the special tokens are always kept.
pub fn build_vocabulary(
    docs: &[TokenizedDoc],
    min_count: u32,
) -> Result<Vocabulary, TextStatsError> {
    if min_count < 1 {
        return Err(TextStatsError::InvalidMinCount);
    }
    let mut term_counts: HashMap<&str, u64> = HashMap::new();
    let mut doc_freqs: HashMap<&str, u32> = HashMap::new();
    let mut seen: Vec<&str> = Vec::new();
    for doc in docs {
        seen.clear();
        for token in &doc.tokens {
            *term_counts.entry(token).or_insert(0) += 1;
            seen.push(token);
        }
        seen.sort_unstable();
        seen.dedup();
        for &token in &seen {
            *doc_freqs.entry(token).or_insert(0) += 1;
        }
    }

    let mut surviving: Vec<(&str, u64)> = term_counts
        .iter()
        .filter(|(word, &count)| count >= min_count as u64 || Vocabulary::is_special(word))
        .map(|(&word, &count)| (word, count))
        .collect();
    for special in SPECIAL_TOKENS {
        if !term_counts.contains_key(special) {
            surviving.push((special, 0));
        }
    }
    if surviving.is_empty() {
        return Err(TextStatsError::EmptyVocabulary);
    }
    surviving.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut ids = HashMap::with_capacity(surviving.len());
    let mut words = Vec::with_capacity(surviving.len());
    let mut counts = Vec::with_capacity(surviving.len());
    let mut freqs = Vec::with_capacity(surviving.len());
    for (id, (word, count)) in surviving.into_iter().enumerate() {
        ids.insert(word.to_string(), id as u32);
        words.push(word.to_string());
        counts.push(count);
        freqs.push(doc_freqs.get(word).copied().unwrap_or(0));
    }
    Ok(Vocabulary {
        ids,
        words,
        term_counts: counts,
        doc_freqs: freqs,
        min_count,
    })
}

/// TF-IDF weights for one document: `tf(w) * ln(n_docs / df(w))` with raw
/// in-document term counts. Out-of-vocabulary words are skipped and zero
/// weights omitted. Returned pairs are sorted by word id.
pub fn compute_tfidf(
    doc: &TokenizedDoc,
    vocab: &Vocabulary,
    n_docs: usize,
) -> Result<Vec<(u32, f64)>, TextStatsError> {
    if n_docs == 0 {
        return Err(TextStatsError::NoDocuments);
    }
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for token in &doc.tokens {
        if let Some(id) = vocab.id_of(token) {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    let mut weights = Vec::with_capacity(counts.len());
    for (id, tf) in counts {
        let df = vocab.doc_freq(id);
        if df == 0 {
            return Err(TextStatsError::InconsistentDocFreq {
                word: vocab.word(id).to_string(),
            });
        }
        let idf = (n_docs as f64 / df as f64).ln();
        let weight = tf as f64 * idf;
        if weight > 0.0 {
            weights.push((id, weight));
        }
    }
    weights.sort_unstable_by_key(|&(id, _)| id);
    Ok(weights)
}

/// Window presence counts feeding the PMI computation.
///
/// Windows are all contiguous spans of `window` tokens slid by one within
/// each document; documents shorter than the window contribute a single
/// window, and documents with no tokens contribute none. A word counts at
/// most once per window.
#[derive(Clone, Debug)]
pub struct CooccurrenceStats {
    pub window: usize,
    pub window_count: u64,
    /// Windows containing each word, indexed by word id.
    pub single_counts: Vec<u64>,
    /// Windows containing both words of a pair, keyed `(a, b)` with `a < b`.
    pub pair_counts: HashMap<(u32, u32), u64>,
}

#[derive(Clone)]
struct CountAcc {
    windows: u64,
    single: Vec<u64>,
    pairs: HashMap<(u32, u32), u64>,
}

impl CountAcc {
    fn new(n_words: usize) -> Self {
        CountAcc {
            windows: 0,
            single: vec![0; n_words],
            pairs: HashMap::new(),
        }
    }

    fn add_doc(&mut self, doc: &TokenizedDoc, vocab: &Vocabulary, window: usize) {
        let ids: Vec<Option<u32>> = doc.tokens.iter().map(|t| vocab.id_of(t)).collect();
        if ids.is_empty() {
            return;
        }
        let n_windows = if ids.len() <= window {
            1
        } else {
            ids.len() - window + 1
        };
        let mut present: Vec<u32> = Vec::with_capacity(window);
        for start in 0..n_windows {
            let end = (start + window).min(ids.len());
            present.clear();
            present.extend(ids[start..end].iter().flatten());
            present.sort_unstable();
            present.dedup();
            self.windows += 1;
            for (i, &a) in present.iter().enumerate() {
                self.single[a as usize] += 1;
                for &b in &present[i + 1..] {
                    *self.pairs.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }

    fn merge(mut self, other: CountAcc) -> CountAcc {
        self.windows += other.windows;
        for (a, b) in self.single.iter_mut().zip(other.single) {
            *a += b;
        }
        for (key, count) in other.pairs {
            *self.pairs.entry(key).or_insert(0) += count;
        }
        self
    }
}

/// Counts window presences over all documents. Sharded into one chunk of
/// documents per thread; integer count merges are commutative, so the
/// result is independent of shard count and order.
pub fn count_cooccurrence(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    window: usize,
) -> Result<CooccurrenceStats, TextStatsError> {
    if window < 2 {
        return Err(TextStatsError::WindowTooSmall(window));
    }
    #[cfg(feature = "parallel")]
    let acc = {
        let chunk = docs.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
        docs.par_chunks(chunk)
            .map(|shard| {
                let mut acc = CountAcc::new(vocab.len());
                for doc in shard {
                    acc.add_doc(doc, vocab, window);
                }
                acc
            })
            .reduce(|| CountAcc::new(vocab.len()), CountAcc::merge)
    };
    #[cfg(not(feature = "parallel"))]
    let acc = {
        let mut acc = CountAcc::new(vocab.len());
        for doc in docs {
            acc.add_doc(doc, vocab, window);
        }
        acc
    };
    Ok(CooccurrenceStats {
        window,
        window_count: acc.windows,
        single_counts: acc.single,
        pair_counts: acc.pairs,
    })
}

/// Sequential reference for [`count_cooccurrence`], used by the benchmark
/// suite and the parallel-equivalence tests.
pub fn count_cooccurrence_seq(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    window: usize,
) -> Result<CooccurrenceStats, TextStatsError> {
    if window < 2 {
        return Err(TextStatsError::WindowTooSmall(window));
    }
    let mut acc = CountAcc::new(vocab.len());
    for doc in docs {
        acc.add_doc(doc, vocab, window);
    }
    Ok(CooccurrenceStats {
        window,
        window_count: acc.windows,
        single_counts: acc.single,
        pair_counts: acc.pairs,
    })
}

/// Strictly positive PMI pairs from the counted windows, in canonical
/// `(a, b)` order with `a < b`, sorted.
///
/// `pmi(a, b) = ln((pair / W) / ((single_a / W) * (single_b / W)))`
pub fn pmi_edges(stats: &CooccurrenceStats) -> Vec<(u32, u32, f64)> {
    let w = stats.window_count as f64;
    let mut edges: Vec<(u32, u32, f64)> = stats
        .pair_counts
        .iter()
        .filter_map(|(&(a, b), &count)| {
            let sa = stats.single_counts[a as usize] as f64;
            let sb = stats.single_counts[b as usize] as f64;
            let pmi = (count as f64 * w / (sa * sb)).ln();
            (pmi > 0.0).then_some((a, b, pmi))
        })
        .collect();
    edges.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    edges
}

/// Window counting plus PMI filtering in one call.
pub fn compute_pmi(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    window: usize,
) -> Result<Vec<(u32, u32, f64)>, TextStatsError> {
    Ok(pmi_edges(&count_cooccurrence(docs, vocab, window)?))
}
