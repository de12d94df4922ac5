//! Deterministic synthetic corpora with a known class signal.
//!
//! The generated corpus gives the two classes disjoint content
//! vocabularies plus a small shared pool, and derives word and sentence
//! embeddings from class-separated centers. Any competent classifier
//! should reach near-perfect accuracy, which makes the data useful as a
//! learnability smoke test and as fixture input for the CLI.

use std::path::{Path, PathBuf};

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{self, Author, Corpus, Document, SplitAssignment};
use crate::embeddings::{
    oov_vector, save_sentence_embeddings, SentenceEmbeddingTable, WordEmbeddingTable,
};
use crate::hetgraph::{build_graph, GraphBuildConfig, HeteroGraph};
use crate::textstats;

/// Shape of the synthetic corpus.
#[derive(Clone, Copy, Debug)]
pub struct SynthConfig {
    pub users_per_class: usize,
    pub docs_per_user: usize,
    pub tokens_per_doc: usize,
    pub vocab_per_class: usize,
    pub shared_vocab: usize,
    /// Dimension of both the word vectors and the sentence embeddings.
    pub dim: usize,
    pub min_count: u32,
    pub knn_k: usize,
    pub window: usize,
    pub splits: (f64, f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    /// The separable fixture: 20 users with 10 documents each.
    fn default() -> Self {
        SynthConfig {
            users_per_class: 10,
            docs_per_user: 10,
            tokens_per_doc: 8,
            vocab_per_class: 12,
            shared_vocab: 6,
            dim: 16,
            min_count: 15,
            knn_k: 3,
            window: 20,
            splits: (0.8, 0.1, 0.1),
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// A smaller corpus for fast structural tests.
    pub fn small() -> Self {
        SynthConfig {
            users_per_class: 5,
            docs_per_user: 4,
            tokens_per_doc: 6,
            vocab_per_class: 4,
            shared_vocab: 2,
            dim: 6,
            min_count: 2,
            knn_k: 2,
            window: 5,
            splits: (0.6, 0.2, 0.2),
            seed: 7,
        }
    }

    /// A minimal two-author fixture for gradient checks.
    pub fn tiny() -> Self {
        SynthConfig {
            users_per_class: 1,
            docs_per_user: 3,
            tokens_per_doc: 5,
            vocab_per_class: 3,
            shared_vocab: 1,
            dim: 3,
            min_count: 1,
            knn_k: 1,
            window: 4,
            splits: (1.0, 0.0, 0.0),
            seed: 11,
        }
    }
}

/// The generated corpus plus its matching embedding tables.
pub struct SynthData {
    pub corpus: Corpus,
    pub word_vectors: WordEmbeddingTable,
    pub sentence_embeddings: SentenceEmbeddingTable,
    pub split: SplitAssignment,
}

fn class_word(class: u8, index: usize) -> String {
    match class {
        0 => format!("alpha{index}"),
        _ => format!("beta{index}"),
    }
}

fn shared_word(index: usize) -> String {
    format!("common{index}")
}

/// Word vector: a strong class-specific center plus a small deterministic
/// jitter keyed by the word itself.
fn synth_word_vector(word: &str, class: Option<u8>, dim: usize, seed: u64) -> Vec<f64> {
    let mut v: Vec<f64> = oov_vector(word, seed ^ 0x57A7_1C5E, dim)
        .into_iter()
        .map(|x| x * 5.0)
        .collect();
    match class {
        Some(0) => v[0] += 1.0,
        Some(_) => v[0] -= 1.0,
        None => v[1] += 0.5,
    }
    v
}

/// Builds the corpus, word vectors, sentence embeddings, and split.
pub fn separable_corpus(config: &SynthConfig) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut word_vectors = WordEmbeddingTable::new(config.dim);
    for class in [0u8, 1u8] {
        for i in 0..config.vocab_per_class {
            let word = class_word(class, i);
            let v = synth_word_vector(&word, Some(class), config.dim, config.seed);
            word_vectors.insert(word, v);
        }
    }
    for i in 0..config.shared_vocab {
        let word = shared_word(i);
        let v = synth_word_vector(&word, None, config.dim, config.seed);
        word_vectors.insert(word, v);
    }

    let mut sentence_embeddings = SentenceEmbeddingTable::new(config.dim);
    let mut authors = Vec::new();
    for class in [0u8, 1u8] {
        for u in 0..config.users_per_class {
            let author_id = format!("u{class}_{u:02}");
            let mut documents = Vec::new();
            for d in 0..config.docs_per_user {
                let doc_id = format!("{author_id}#{d}");
                let mut tokens = Vec::with_capacity(config.tokens_per_doc);
                for _ in 0..config.tokens_per_doc {
                    // 80% class vocabulary, 20% shared pool
                    let word = if config.shared_vocab > 0 && rng.random_range(0..5) == 0 {
                        shared_word(rng.random_range(0..config.shared_vocab))
                    } else {
                        class_word(class, rng.random_range(0..config.vocab_per_class))
                    };
                    tokens.push(word);
                }
                // sentence embedding: mean of the token vectors plus a
                // small per-document jitter
                let mut embedding = vec![0.0; config.dim];
                for token in &tokens {
                    for (e, &x) in embedding.iter_mut().zip(word_vectors.get(token).unwrap()) {
                        *e += x;
                    }
                }
                for e in embedding.iter_mut() {
                    *e /= tokens.len() as f64;
                }
                let jitter = oov_vector(&doc_id, config.seed ^ 0x5EED_0D0C, config.dim);
                for (e, j) in embedding.iter_mut().zip(jitter) {
                    *e += j * 2.0;
                }
                sentence_embeddings.insert(doc_id.clone(), embedding).unwrap();
                documents.push(Document {
                    doc_id,
                    author_id: author_id.clone(),
                    text: tokens.join(" "),
                });
            }
            authors.push(Author {
                author_id,
                label: class,
                documents,
            });
        }
    }

    let corpus = Corpus {
        authors,
        class_names: ["0".into(), "1".into()],
    };
    let split = corpus::split_corpus(&corpus, config.splits, config.seed).expect("valid split");
    SynthData {
        corpus,
        word_vectors,
        sentence_embeddings,
        split,
    }
}

/// Runs the full pipeline over the synthetic corpus and returns the graph.
pub fn separable_graph(config: &SynthConfig) -> HeteroGraph {
    let data = separable_corpus(config);
    let tokenized = textstats::tokenize_corpus(&data.corpus);
    let vocab = textstats::build_vocabulary(&tokenized, config.min_count).expect("vocabulary");
    let stats =
        textstats::count_cooccurrence(&tokenized, &vocab, config.window).expect("statistics");
    build_graph(
        &data.corpus,
        &tokenized,
        &vocab,
        &stats,
        &data.word_vectors,
        &data.sentence_embeddings,
        &data.split,
        &GraphBuildConfig {
            knn_k: config.knn_k,
            min_count: config.min_count,
            window: config.window,
            seed: config.seed,
        },
    )
    .expect("graph build")
}

/// Paths of the fixture files written by [`write_fixture_files`].
pub struct FixturePaths {
    pub corpus: PathBuf,
    pub word_vectors: PathBuf,
    pub sentence_embeddings: PathBuf,
}

/// Writes the synthetic corpus and its embedding tables into `dir` in the
/// formats the CLI consumes.
pub fn write_fixture_files(data: &SynthData, dir: &Path) -> std::io::Result<FixturePaths> {
    let paths = FixturePaths {
        corpus: dir.join("corpus.jsonl"),
        word_vectors: dir.join("word_vectors.txt"),
        sentence_embeddings: dir.join("sentence_embeddings.jsonl"),
    };
    corpus::save_jsonl_corpus(&data.corpus, &paths.corpus)
        .map_err(|e| std::io::Error::other(e.to_string()))?;

    let mut names: Vec<String> = Vec::new();
    for class in [0u8, 1u8] {
        names.extend((0..).map(|i| class_word(class, i)).take_while(|w| data.word_vectors.get(w).is_some()));
    }
    names.extend((0..).map(shared_word).take_while(|w| data.word_vectors.get(w).is_some()));
    let mut lines = String::new();
    for word in &names {
        lines.push_str(word);
        for v in data.word_vectors.get(word).unwrap() {
            lines.push(' ');
            lines.push_str(&format!("{v}"));
        }
        lines.push('\n');
    }
    std::fs::write(&paths.word_vectors, lines)?;

    save_sentence_embeddings(&data.sentence_embeddings, &paths.sentence_embeddings)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(paths)
}
