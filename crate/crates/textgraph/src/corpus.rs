//! Corpus ingestion, activity filtering, and stratified train/val/test
//! splitting.
//!
//! Two on-disk layouts are supported:
//!
//! - an author-profiling directory: a `truth.txt` with `id:::label` lines
//!   plus one `<id>.xml` per author whose `<document>` elements hold the
//!   author's posts (CDATA or plain text);
//! - a JSON Lines file with one `{author_id, doc_id, text, label}` object
//!   per line.
//!
//! Directory-loaded documents get synthesized ids `<author_id>#<index>`,
//! counting from zero in file order. Sentence-embedding files must use the
//! same ids.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textstats;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing truth file {0}")]
    MissingTruthFile(String),
    #[error("truth file lists author {0} but {0}.xml is missing")]
    MissingAuthorFile(String),
    #[error("malformed truth line {line}: {content:?}")]
    MalformedTruthLine { line: usize, content: String },
    #[error("unknown label {label:?} for author {author_id}")]
    UnknownLabel { author_id: String, label: String },
    #[error("xml error in {path}: {message}")]
    Xml { path: String, message: String },
    #[error("author {0} has no documents")]
    EmptyAuthor(String),
    #[error("document {0} is empty after trimming")]
    EmptyDocument(String),
    #[error("duplicate document id {0}")]
    DuplicateDocId(String),
    #[error("malformed json on line {line}: {message}")]
    MalformedJsonLine { line: usize, message: String },
    #[error("author {author_id} has conflicting labels {a} and {b}")]
    LabelConflict { author_id: String, a: u8, b: u8 },
    #[error("label {0} is not binary (expected 0 or 1)")]
    NonBinaryLabel(u8),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus needs at least 2 authors, found {0}")]
    TooFewAuthors(usize),
    #[error("corpus must contain both classes")]
    MissingClass,
    #[error("invalid filter range: min {min} exceeds max {max}")]
    InvalidFilterRange { min: usize, max: usize },
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    InvalidFractions((f64, f64, f64)),
    #[error("class {0} would receive zero training authors")]
    EmptyTrainClass(u8),
    #[error("author {0} is missing from the split assignment")]
    UnassignedAuthor(String),
}

/// One post/review. `doc_id` is unique across the corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub author_id: String,
    pub text: String,
}

/// An author with a binary class label and an ordered document list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Author {
    pub author_id: String,
    pub label: u8,
    pub documents: Vec<Document>,
}

/// All authors plus the names of the two classes (index 0 and 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub authors: Vec<Author>,
    pub class_names: [String; 2],
}

impl Corpus {
    pub fn n_authors(&self) -> usize {
        self.authors.len()
    }

    pub fn n_docs(&self) -> usize {
        self.authors.iter().map(|a| a.documents.len()).sum()
    }

    /// All documents in corpus order (author order, then document order).
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.authors.iter().flat_map(|a| a.documents.iter())
    }

    /// Checks the structural invariants: at least two authors, both
    /// classes present, unique non-empty documents owned by their author.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.authors.len() < 2 {
            return Err(CorpusError::TooFewAuthors(self.authors.len()));
        }
        let mut classes = [false, false];
        let mut seen_ids = HashSet::new();
        for author in &self.authors {
            if author.label > 1 {
                return Err(CorpusError::NonBinaryLabel(author.label));
            }
            classes[author.label as usize] = true;
            if author.documents.is_empty() {
                return Err(CorpusError::EmptyAuthor(author.author_id.clone()));
            }
            for doc in &author.documents {
                if doc.author_id != author.author_id {
                    return Err(CorpusError::UnassignedAuthor(doc.doc_id.clone()));
                }
                if doc.text.trim().is_empty() {
                    return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
                }
                if !seen_ids.insert(doc.doc_id.as_str()) {
                    return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
                }
            }
        }
        if !(classes[0] && classes[1]) {
            return Err(CorpusError::MissingClass);
        }
        Ok(())
    }
}

/// Maps dataset label strings to the binary class ids.
///
/// The default table covers the numeric coding plus the irony ("I"/"NI")
/// and stance ("INFAVOR"/"AGAINST") codings.
#[derive(Clone, Debug)]
pub struct LabelTable {
    entries: Vec<(String, u8)>,
}

impl Default for LabelTable {
    fn default() -> Self {
        LabelTable::new(&[
            ("0", 0),
            ("1", 1),
            ("NI", 0),
            ("I", 1),
            ("AGAINST", 0),
            ("INFAVOR", 1),
        ])
    }
}

impl LabelTable {
    pub fn new(pairs: &[(&str, u8)]) -> Self {
        LabelTable {
            entries: pairs.iter().map(|&(s, c)| (s.to_string(), c)).collect(),
        }
    }

    pub fn lookup(&self, label: &str) -> Option<u8> {
        self.entries
            .iter()
            .find(|(s, _)| s == label)
            .map(|&(_, c)| c)
    }

    /// The first label string mapping to the given class.
    fn name_of(&self, class: u8, observed: &HashSet<String>) -> String {
        self.entries
            .iter()
            .find(|(s, c)| *c == class && observed.contains(s))
            .or_else(|| self.entries.iter().find(|(_, c)| *c == class))
            .map(|(s, _)| s.clone())
            .unwrap_or_else(|| class.to_string())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads an author-profiling directory: `truth.txt` plus one XML file per
/// author. Document order follows file order; labels are resolved through
/// the table.
pub fn load_pan_corpus(dir: &Path, labels: &LabelTable) -> Result<Corpus, CorpusError> {
    let truth_path = dir.join("truth.txt");
    if !truth_path.is_file() {
        return Err(CorpusError::MissingTruthFile(
            truth_path.display().to_string(),
        ));
    }
    let truth = std::fs::read_to_string(&truth_path).map_err(|e| io_err(&truth_path, e))?;

    let mut authors = Vec::new();
    let mut observed_labels = HashSet::new();
    for (lineno, line) in truth.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((author_id, label_str)) = line.split_once(":::") else {
            return Err(CorpusError::MalformedTruthLine {
                line: lineno + 1,
                content: line.to_string(),
            });
        };
        let (author_id, label_str) = (author_id.trim(), label_str.trim());
        let label = labels
            .lookup(label_str)
            .ok_or_else(|| CorpusError::UnknownLabel {
                author_id: author_id.to_string(),
                label: label_str.to_string(),
            })?;
        observed_labels.insert(label_str.to_string());

        let xml_path = dir.join(format!("{author_id}.xml"));
        if !xml_path.is_file() {
            return Err(CorpusError::MissingAuthorFile(author_id.to_string()));
        }
        let texts = parse_author_xml(&xml_path)?;
        if texts.is_empty() {
            return Err(CorpusError::EmptyAuthor(author_id.to_string()));
        }
        let documents = texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| {
                let doc_id = format!("{author_id}#{i}");
                if text.trim().is_empty() {
                    return Err(CorpusError::EmptyDocument(doc_id));
                }
                Ok(Document {
                    doc_id,
                    author_id: author_id.to_string(),
                    text,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        authors.push(Author {
            author_id: author_id.to_string(),
            label,
            documents,
        });
    }

    let corpus = Corpus {
        authors,
        class_names: [
            labels.name_of(0, &observed_labels),
            labels.name_of(1, &observed_labels),
        ],
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Pulls the text of every `<document>` element out of an author file.
/// Wrapper elements and attributes are ignored; CDATA and plain text nodes
/// both work.
fn parse_author_xml(path: &Path) -> Result<Vec<String>, CorpusError> {
    use quick_xml::events::Event;

    let xml_err = |e: quick_xml::Error| CorpusError::Xml {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = quick_xml::Reader::from_file(path).map_err(xml_err)?;
    let mut buf = Vec::new();
    let mut texts = Vec::new();
    let mut depth = 0usize; // nesting depth inside <document>
    let mut current = String::new();
    loop {
        match reader.read_event_into(&mut buf).map_err(xml_err)? {
            Event::Start(e) => {
                if depth > 0 {
                    depth += 1;
                } else if e.local_name().as_ref() == b"document" {
                    depth = 1;
                    current.clear();
                }
            }
            Event::End(e) => {
                if depth > 0 {
                    depth -= 1;
                    if depth == 0 && e.local_name().as_ref() == b"document" {
                        texts.push(current.clone());
                    }
                }
            }
            Event::Text(t) => {
                if depth > 0 {
                    current.push_str(&t.decode().map_err(|e| CorpusError::Xml {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?);
                }
            }
            Event::CData(c) => {
                if depth > 0 {
                    current.push_str(&String::from_utf8_lossy(&c.into_inner()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(texts)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlRecord {
    author_id: String,
    doc_id: String,
    text: String,
    label: u8,
}

/// Loads a JSON Lines corpus, grouping records by author. Author order is
/// first appearance; document order is file order.
pub fn load_jsonl_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);

    let mut order: Vec<String> = Vec::new();
    let mut by_author: HashMap<String, Author> = HashMap::new();
    let mut seen_docs = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedJsonLine {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        if record.label > 1 {
            return Err(CorpusError::NonBinaryLabel(record.label));
        }
        if record.text.trim().is_empty() {
            return Err(CorpusError::EmptyDocument(record.doc_id));
        }
        if !seen_docs.insert(record.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId(record.doc_id));
        }
        let author = by_author
            .entry(record.author_id.clone())
            .or_insert_with(|| {
                order.push(record.author_id.clone());
                Author {
                    author_id: record.author_id.clone(),
                    label: record.label,
                    documents: Vec::new(),
                }
            });
        if author.label != record.label {
            return Err(CorpusError::LabelConflict {
                author_id: record.author_id,
                a: author.label,
                b: record.label,
            });
        }
        author.documents.push(Document {
            doc_id: record.doc_id,
            author_id: record.author_id,
            text: record.text,
        });
    }
    if order.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let authors = order
        .into_iter()
        .map(|id| by_author.remove(&id).expect("author present"))
        .collect();
    let corpus = Corpus {
        authors,
        class_names: ["0".to_string(), "1".to_string()],
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Writes the corpus back out as JSON Lines, preserving order.
pub fn save_jsonl_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for author in &corpus.authors {
        for doc in &author.documents {
            let record = JsonlRecord {
                author_id: author.author_id.clone(),
                doc_id: doc.doc_id.clone(),
                text: doc.text.clone(),
                label: author.label,
            };
            let line = serde_json::to_string(&record).expect("serializable record");
            writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
        }
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Removes documents whose token count falls outside `[min_len, max_len]`,
/// then authors whose remaining document count falls outside
/// `[min_docs, max_docs]`. Lengths are counted with the engine tokenizer.
pub fn filter_by_activity(
    corpus: &Corpus,
    min_docs: usize,
    max_docs: usize,
    min_len: usize,
    max_len: usize,
) -> Result<Corpus, CorpusError> {
    if min_docs > max_docs {
        return Err(CorpusError::InvalidFilterRange {
            min: min_docs,
            max: max_docs,
        });
    }
    if min_len > max_len {
        return Err(CorpusError::InvalidFilterRange {
            min: min_len,
            max: max_len,
        });
    }
    let mut authors = Vec::new();
    for author in &corpus.authors {
        let documents: Vec<Document> = author
            .documents
            .iter()
            .filter(|doc| {
                let len = textstats::tokenize(&doc.text).len();
                len >= min_len && len <= max_len
            })
            .cloned()
            .collect();
        if documents.len() >= min_docs && documents.len() <= max_docs {
            authors.push(Author {
                author_id: author.author_id.clone(),
                label: author.label,
                documents,
            });
        }
    }
    let filtered = Corpus {
        authors,
        class_names: corpus.class_names.clone(),
    };
    filtered.validate()?;
    Ok(filtered)
}

/// Target split of one author.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// A total, disjoint assignment of authors to splits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    assignments: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, author_id: &str) -> Option<Split> {
        self.assignments.get(author_id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignments.values().filter(|&&s| s == split).count()
    }

    /// Boolean masks over the corpus authors, in author order:
    /// `(train, val, test)`.
    pub fn masks(&self, corpus: &Corpus) -> Result<[Vec<bool>; 3], CorpusError> {
        let mut masks = [
            vec![false; corpus.n_authors()],
            vec![false; corpus.n_authors()],
            vec![false; corpus.n_authors()],
        ];
        for (i, author) in corpus.authors.iter().enumerate() {
            let split = self
                .get(&author.author_id)
                .ok_or_else(|| CorpusError::UnassignedAuthor(author.author_id.clone()))?;
            masks[split as usize][i] = true;
        }
        Ok(masks)
    }
}

/// Distributes `n` over the three fractions with a largest-remainder rule:
/// floor everything, then hand out the leftover units by descending
/// fractional part (ties in train, val, test order). Every count lands
/// within one of `n * fraction`.
fn apportion(n: usize, fractions: (f64, f64, f64)) -> [usize; 3] {
    let fracs = [fractions.0, fractions.1, fractions.2];
    let exact: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..n.saturating_sub(assigned) {
        counts[order[i % 3]] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Stratified split: authors of each class are shuffled with the seeded
/// generator and cut at the apportioned boundaries. Deterministic for a
/// given `(corpus, fractions, seed)`.
pub fn split_corpus(
    corpus: &Corpus,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitAssignment, CorpusError> {
    let (ft, fv, fe) = fractions;
    let sum = ft + fv + fe;
    if ft < 0.0 || fv < 0.0 || fe < 0.0 || (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidFractions(fractions));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = BTreeMap::new();
    for class in [0u8, 1u8] {
        let mut ids: Vec<&str> = corpus
            .authors
            .iter()
            .filter(|a| a.label == class)
            .map(|a| a.author_id.as_str())
            .collect();
        ids.shuffle(&mut rng);
        let [n_train, n_val, _] = apportion(ids.len(), fractions);
        if n_train == 0 {
            return Err(CorpusError::EmptyTrainClass(class));
        }
        for (i, id) in ids.into_iter().enumerate() {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            assignments.insert(id.to_string(), split);
        }
    }
    Ok(SplitAssignment { assignments })
}
