//! Pretrained embedding tables and user feature pooling.
//!
//! Word vectors come from a whitespace-separated text file
//! (`token v1 ... vd` per line); sentence embeddings from JSON Lines
//! (`{"doc_id": ..., "vector": [...]}`). Both are inputs produced outside
//! this crate. Words missing from the table get a deterministic fallback
//! vector: a splitmix64 stream seeded by mixing an FNV-1a hash of the word
//! with the run seed, mapped into `[-0.01, 0.01]` per coordinate. The same
//! `(seed, word)` pair yields the same vector on every platform.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} dimensions, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate doc_id {0}")]
    DuplicateDocId(String),
    #[error("non-finite value on line {0}")]
    NonFinite(usize),
    #[error("cannot pool an empty vector list")]
    EmptyPool,
    #[error("pooled vectors have mixed dimensions: {a} vs {b}")]
    MixedDimensions { a: usize, b: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> EmbeddingError {
    EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Word to vector map with a fixed dimension.
#[derive(Clone, Debug)]
pub struct WordEmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordEmbeddingTable {
    pub fn new(dim: usize) -> Self {
        WordEmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn insert(&mut self, word: String, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch");
        self.vectors.insert(word, vector);
    }
}

/// Parses a word-vector text file. The dimension is inferred from the
/// first line and enforced on the rest.
pub fn load_word_vectors(path: &Path) -> Result<WordEmbeddingTable, EmbeddingError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut table: Option<WordEmbeddingTable> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or_else(|| EmbeddingError::Parse {
            line: lineno + 1,
            message: "missing token".to_string(),
        })?;
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| EmbeddingError::Parse {
                    line: lineno + 1,
                    message: format!("bad number {f:?}: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(lineno + 1));
        }
        let table = table.get_or_insert_with(|| WordEmbeddingTable::new(values.len()));
        if values.len() != table.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                line: lineno + 1,
                expected: table.dim(),
                found: values.len(),
            });
        }
        table.vectors.insert(token.to_string(), values);
    }
    table.ok_or_else(|| EmbeddingError::Parse {
        line: 0,
        message: "empty word vector file".to_string(),
    })
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic out-of-vocabulary vector in `[-0.01, 0.01]^dim`, a pure
/// function of `(seed, word)`.
pub fn oov_vector(word: &str, seed: u64, dim: usize) -> Vec<f64> {
    let mut state = seed ^ fnv1a64(word.as_bytes());
    (0..dim)
        .map(|_| {
            let bits = splitmix64(&mut state);
            let unit = (bits >> 11) as f64 / (1u64 << 53) as f64; // [0, 1)
            (2.0 * unit - 1.0) * 0.01
        })
        .collect()
}

/// The stored vector for a table hit, or the seeded fallback for a miss.
pub fn word_feature(word: &str, table: &WordEmbeddingTable, seed: u64) -> Vec<f64> {
    match table.get(word) {
        Some(v) => v.to_vec(),
        None => oov_vector(word, seed, table.dim()),
    }
}

/// Document id to sentence vector map with a fixed dimension.
#[derive(Clone, Debug)]
pub struct SentenceEmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    doc_id: String,
    vector: Vec<f64>,
}

impl SentenceEmbeddingTable {
    pub fn new(dim: usize) -> Self {
        SentenceEmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&[f64]> {
        self.vectors.get(doc_id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, doc_id: String, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                line: 0,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.vectors.contains_key(&doc_id) {
            return Err(EmbeddingError::DuplicateDocId(doc_id));
        }
        self.vectors.insert(doc_id, vector);
        Ok(())
    }
}

/// Loads sentence embeddings from JSON Lines.
pub fn load_sentence_embeddings(path: &Path) -> Result<SentenceEmbeddingTable, EmbeddingError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut table: Option<SentenceEmbeddingTable> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord =
            serde_json::from_str(&line).map_err(|e| EmbeddingError::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(lineno + 1));
        }
        let table = table.get_or_insert_with(|| SentenceEmbeddingTable::new(record.vector.len()));
        if record.vector.len() != table.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                line: lineno + 1,
                expected: table.dim(),
                found: record.vector.len(),
            });
        }
        if table.vectors.contains_key(&record.doc_id) {
            return Err(EmbeddingError::DuplicateDocId(record.doc_id));
        }
        table.vectors.insert(record.doc_id, record.vector);
    }
    table.ok_or_else(|| EmbeddingError::Parse {
        line: 0,
        message: "empty sentence embedding file".to_string(),
    })
}

/// Writes sentence embeddings as JSON Lines, sorted by doc id.
pub fn save_sentence_embeddings(
    table: &SentenceEmbeddingTable,
    path: &Path,
) -> Result<(), EmbeddingError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    let mut ids: Vec<&String> = table.vectors.keys().collect();
    ids.sort();
    for doc_id in ids {
        let record = SentenceRecord {
            doc_id: doc_id.clone(),
            vector: table.vectors[doc_id].clone(),
        };
        let line = serde_json::to_string(&record).expect("serializable record");
        writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Elementwise mean of the given vectors, computed as a running mean so
/// pooling k copies of a vector returns that vector exactly.
pub fn pool_user_embedding<'a, I>(vectors: I) -> Result<Vec<f64>, EmbeddingError>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = vectors.into_iter();
    let first = iter.next().ok_or(EmbeddingError::EmptyPool)?;
    let mut mean = first.to_vec();
    let mut count = 1.0;
    for v in iter {
        if v.len() != mean.len() {
            return Err(EmbeddingError::MixedDimensions {
                a: mean.len(),
                b: v.len(),
            });
        }
        count += 1.0;
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += (x - *m) / count;
        }
    }
    Ok(mean)
}
