//! Assembly, ablation, and serialization of the heterogeneous graph.
//!
//! The graph has three node types (users, documents, words) and four base
//! relations:
//!
//! - `user-doc`: one unit-weight edge per document, from its author;
//! - `doc-word`: TF-IDF weighted edges into the vocabulary;
//! - `word-word`: positive-PMI pairs, stored in both directions;
//! - `doc-doc`: each document's K directed edges to its nearest neighbors
//!   by sentence-embedding cosine similarity.
//!
//! Reverse relations (`doc-user`, `word-doc`, `doc-doc-rev`) are generated
//! so messages can flow into user nodes; base relation counts stay exactly
//! at one edge per document for `user-doc` and `K` per document for
//! `doc-doc`.

pub mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SplitAssignment};
use crate::embeddings::{self, SentenceEmbeddingTable, WordEmbeddingTable};
use crate::numerics::Tensor;
use crate::textstats::{self, CooccurrenceStats, TokenizedDoc, Vocabulary};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("document {0} has no sentence embedding")]
    MissingSentenceEmbedding(String),
    #[error("document {0} has a zero-norm sentence embedding")]
    ZeroNormEmbedding(String),
    #[error("kNN needs K in [1, n_docs): K = {k}, n_docs = {n_docs}")]
    InvalidK { k: usize, n_docs: usize },
    #[error("corpus and tokenized documents disagree: {0}")]
    TokenizationMismatch(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    TextStats(#[from] crate::textstats::TextStatsError),
    #[error(transparent)]
    Container(#[from] crate::fileio::ContainerError),
    #[error("graph invariant violated: {0}")]
    Invalid(String),
}

/// The three node types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    User,
    Doc,
    Word,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::User, NodeType::Doc, NodeType::Word];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::User => "user",
            NodeType::Doc => "doc",
            NodeType::Word => "word",
        }
    }
}

/// Typed edge relations: the four base relations plus generated reverses.
/// The declaration order is the canonical iteration order everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    UserDoc,
    DocUser,
    DocWord,
    WordDoc,
    WordWord,
    DocDoc,
    DocDocRev,
}

impl Relation {
    pub const ALL: [Relation; 7] = [
        Relation::UserDoc,
        Relation::DocUser,
        Relation::DocWord,
        Relation::WordDoc,
        Relation::WordWord,
        Relation::DocDoc,
        Relation::DocDocRev,
    ];

    pub fn src(self) -> NodeType {
        match self {
            Relation::UserDoc => NodeType::User,
            Relation::DocUser => NodeType::Doc,
            Relation::DocWord => NodeType::Doc,
            Relation::WordDoc => NodeType::Word,
            Relation::WordWord => NodeType::Word,
            Relation::DocDoc => NodeType::Doc,
            Relation::DocDocRev => NodeType::Doc,
        }
    }

    pub fn dst(self) -> NodeType {
        match self {
            Relation::UserDoc => NodeType::Doc,
            Relation::DocUser => NodeType::User,
            Relation::DocWord => NodeType::Word,
            Relation::WordDoc => NodeType::Doc,
            Relation::WordWord => NodeType::Word,
            Relation::DocDoc => NodeType::Doc,
            Relation::DocDocRev => NodeType::Doc,
        }
    }

    /// True for the relations generated by reversing a base relation.
    pub fn is_generated_reverse(self) -> bool {
        matches!(
            self,
            Relation::DocUser | Relation::WordDoc | Relation::DocDocRev
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::UserDoc => "user-doc",
            Relation::DocUser => "doc-user",
            Relation::DocWord => "doc-word",
            Relation::WordDoc => "word-doc",
            Relation::WordWord => "word-word",
            Relation::DocDoc => "doc-doc",
            Relation::DocDocRev => "doc-doc-rev",
        }
    }

    pub fn parse(name: &str) -> Option<Relation> {
        Relation::ALL.iter().copied().find(|r| r.as_str() == name)
    }
}

/// Weighted directed edges of one relation, in struct-of-arrays form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeList {
    pub src: Vec<u32>,
    pub dst: Vec<u32>,
    pub weight: Vec<f64>,
}

impl EdgeList {
    pub fn with_capacity(n: usize) -> Self {
        EdgeList {
            src: Vec::with_capacity(n),
            dst: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, src: u32, dst: u32, weight: f64) {
        self.src.push(src);
        self.dst.push(dst);
        self.weight.push(weight);
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// The same edges with endpoints swapped.
    pub fn reversed(&self) -> EdgeList {
        EdgeList {
            src: self.dst.clone(),
            dst: self.src.clone(),
            weight: self.weight.clone(),
        }
    }
}

/// The ablation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphVariant {
    All,
    NoWordWord,
    NoWord,
    NoDocDoc,
}

impl GraphVariant {
    pub const ALL: [GraphVariant; 4] = [
        GraphVariant::All,
        GraphVariant::NoWordWord,
        GraphVariant::NoWord,
        GraphVariant::NoDocDoc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphVariant::All => "all",
            GraphVariant::NoWordWord => "no-word-word",
            GraphVariant::NoWord => "no-word",
            GraphVariant::NoDocDoc => "no-doc-doc",
        }
    }
}

impl std::str::FromStr for GraphVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraphVariant::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown graph variant {s:?}"))
    }
}

impl std::fmt::Display for GraphVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Construction parameters recorded in the graph file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub knn_k: usize,
    pub min_count: u32,
    pub window: usize,
    pub seed: u64,
}

/// The assembled heterogeneous graph: per-type feature matrices, typed
/// weighted relations, user labels, and split masks.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGraph {
    pub user_features: Tensor,
    pub doc_features: Tensor,
    pub word_features: Tensor,
    pub relations: BTreeMap<Relation, EdgeList>,
    pub labels: Vec<u8>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub meta: BuildMeta,
}

impl HeteroGraph {
    pub fn n_users(&self) -> usize {
        self.user_features.rows()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_features.rows()
    }

    pub fn n_words(&self) -> usize {
        self.word_features.rows()
    }

    pub fn node_count(&self, t: NodeType) -> usize {
        match t {
            NodeType::User => self.n_users(),
            NodeType::Doc => self.n_docs(),
            NodeType::Word => self.n_words(),
        }
    }

    pub fn features(&self, t: NodeType) -> &Tensor {
        match t {
            NodeType::User => &self.user_features,
            NodeType::Doc => &self.doc_features,
            NodeType::Word => &self.word_features,
        }
    }

    pub fn feature_dim(&self, t: NodeType) -> usize {
        self.features(t).cols()
    }

    pub fn edge_count(&self, r: Relation) -> usize {
        self.relations.get(&r).map_or(0, EdgeList::len)
    }

    /// Node types with at least one node.
    pub fn node_types(&self) -> Vec<NodeType> {
        NodeType::ALL
            .into_iter()
            .filter(|&t| self.node_count(t) > 0)
            .collect()
    }

    /// Checks endpoint ranges, weight finiteness, mask shapes, and the
    /// per-document ownership identity.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (&rel, edges) in &self.relations {
            let (n_src, n_dst) = (self.node_count(rel.src()), self.node_count(rel.dst()));
            for (&s, &d) in edges.src.iter().zip(&edges.dst) {
                if s as usize >= n_src || d as usize >= n_dst {
                    return Err(GraphError::Invalid(format!(
                        "{} edge ({s}, {d}) out of range {n_src}x{n_dst}",
                        rel.as_str()
                    )));
                }
            }
            if edges.weight.iter().any(|w| !w.is_finite()) {
                return Err(GraphError::Invalid(format!(
                    "{} has non-finite edge weights",
                    rel.as_str()
                )));
            }
        }
        if self.labels.len() != self.n_users() {
            return Err(GraphError::Invalid("label count != user count".into()));
        }
        for mask in [&self.train_mask, &self.val_mask, &self.test_mask] {
            if mask.len() != self.n_users() {
                return Err(GraphError::Invalid("mask length != user count".into()));
            }
        }
        for i in 0..self.n_users() {
            let assigned = [&self.train_mask, &self.val_mask, &self.test_mask]
                .iter()
                .filter(|m| m[i])
                .count();
            if assigned != 1 {
                return Err(GraphError::Invalid(format!(
                    "user {i} belongs to {assigned} splits"
                )));
            }
        }
        if let Some(user_doc) = self.relations.get(&Relation::UserDoc) {
            // every document has exactly one owning user edge
            let mut owners = vec![0usize; self.n_docs()];
            for &d in &user_doc.dst {
                owners[d as usize] += 1;
            }
            if owners.iter().any(|&c| c != 1) {
                return Err(GraphError::Invalid(
                    "user-doc edges do not cover each document exactly once".into(),
                ));
            }
        }
        Ok(())
    }

    /// Node and edge counts, base relations in fixed row order.
    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            user_nodes: self.n_users(),
            doc_nodes: self.n_docs(),
            word_nodes: self.n_words(),
            user_doc_edges: self.edge_count(Relation::UserDoc),
            doc_doc_edges: self.edge_count(Relation::DocDoc),
            doc_word_edges: self.edge_count(Relation::DocWord),
            word_word_edges: self.edge_count(Relation::WordWord),
        }
    }
}

/// Counts printed after a build, base relations only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub user_nodes: usize,
    pub doc_nodes: usize,
    pub word_nodes: usize,
    pub user_doc_edges: usize,
    pub doc_doc_edges: usize,
    pub doc_word_edges: usize,
    pub word_word_edges: usize,
}

impl GraphSummary {
    pub fn total_nodes(&self) -> usize {
        self.user_nodes + self.doc_nodes + self.word_nodes
    }

    pub fn total_edges(&self) -> usize {
        self.user_doc_edges + self.doc_doc_edges + self.doc_word_edges + self.word_word_edges
    }
}

impl std::fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<16} {:>12}", "User nodes", self.user_nodes)?;
        writeln!(f, "{:<16} {:>12}", "Doc nodes", self.doc_nodes)?;
        writeln!(f, "{:<16} {:>12}", "Word nodes", self.word_nodes)?;
        writeln!(f, "{:<16} {:>12}", "Total", self.total_nodes())?;
        writeln!(f, "{:<16} {:>12}", "User-doc edges", self.user_doc_edges)?;
        writeln!(f, "{:<16} {:>12}", "Doc-doc edges", self.doc_doc_edges)?;
        writeln!(f, "{:<16} {:>12}", "Doc-word edges", self.doc_word_edges)?;
        writeln!(f, "{:<16} {:>12}", "Word-word edges", self.word_word_edges)?;
        write!(f, "{:<16} {:>12}", "Total", self.total_edges())
    }
}

/// K directed nearest-neighbor edges per document by cosine similarity,
/// ties broken by lower document index; the edge weight is the cosine.
pub fn knn_doc_edges(
    sent: &SentenceEmbeddingTable,
    doc_ids: &[String],
    k: usize,
) -> Result<EdgeList, GraphError> {
    let mut matrix = Tensor::zeros(doc_ids.len(), sent.dim());
    for (i, doc_id) in doc_ids.iter().enumerate() {
        let v = sent
            .get(doc_id)
            .ok_or_else(|| GraphError::MissingSentenceEmbedding(doc_id.clone()))?;
        matrix.row_mut(i).copy_from_slice(v);
    }
    knn_from_matrix(&matrix, k).map_err(|e| match e {
        // re-attach the offending doc id for zero norms
        GraphError::ZeroNormEmbedding(idx) => {
            let i: usize = idx.parse().unwrap_or(0);
            GraphError::ZeroNormEmbedding(doc_ids[i].clone())
        }
        other => other,
    })
}

/// Row-parallel kNN over a dense embedding matrix.
pub fn knn_from_matrix(matrix: &Tensor, k: usize) -> Result<EdgeList, GraphError> {
    let normalized = normalize_rows(matrix)?;
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<(u32, f64)>> = (0..normalized.rows())
        .into_par_iter()
        .map(|i| knn_row(&normalized, i, k))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<(u32, f64)>> = (0..normalized.rows())
        .map(|i| knn_row(&normalized, i, k))
        .collect();
    Ok(collect_knn_edges(rows))
}

/// Sequential reference for [`knn_from_matrix`], used by the benchmark
/// suite and the parallel-equivalence tests.
pub fn knn_from_matrix_seq(matrix: &Tensor, k: usize) -> Result<EdgeList, GraphError> {
    let normalized = normalize_rows(matrix)?;
    let rows: Vec<Vec<(u32, f64)>> = (0..normalized.rows())
        .map(|i| knn_row(&normalized, i, k))
        .collect();
    Ok(collect_knn_edges(rows))
}

fn normalize_rows(matrix: &Tensor) -> Result<Tensor, GraphError> {
    let mut normalized = matrix.clone();
    for i in 0..normalized.rows() {
        let row = normalized.row_mut(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(GraphError::ZeroNormEmbedding(i.to_string()));
        }
        for x in row.iter_mut() {
            *x /= norm;
        }
    }
    Ok(normalized)
}

fn knn_row(normalized: &Tensor, i: usize, k: usize) -> Vec<(u32, f64)> {
    let query = normalized.row(i);
    let mut sims: Vec<(u32, f64)> = (0..normalized.rows())
        .filter(|&j| j != i)
        .map(|j| {
            let sim: f64 = query
                .iter()
                .zip(normalized.row(j))
                .map(|(&a, &b)| a * b)
                .sum();
            (j as u32, sim)
        })
        .collect();
    // highest similarity first, ties by lower index
    sims.sort_unstable_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    sims.truncate(k);
    sims
}

fn collect_knn_edges(rows: Vec<Vec<(u32, f64)>>) -> EdgeList {
    let total: usize = rows.iter().map(Vec::len).sum();
    let mut edges = EdgeList::with_capacity(total);
    for (i, neighbors) in rows.into_iter().enumerate() {
        for (j, sim) in neighbors {
            edges.push(i as u32, j, sim);
        }
    }
    edges
}

/// Build parameters for [`build_graph`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GraphBuildConfig {
    pub knn_k: usize,
    pub min_count: u32,
    pub window: usize,
    pub seed: u64,
}

impl Default for GraphBuildConfig {
    fn default() -> Self {
        GraphBuildConfig {
            knn_k: 3,
            min_count: 15,
            window: 20,
            seed: 42,
        }
    }
}

/// Assembles the full graph from a corpus, its tokenization, the
/// vocabulary and window statistics built from that tokenization, the
/// embedding tables, and the split assignment.
///
/// Documents with no in-vocabulary tokens keep their node (the sentence
/// embedding still carries signal) but get no `doc-word` edges; a warning
/// is logged for each.
#[allow(clippy::too_many_arguments)]
pub fn build_graph(
    corpus: &Corpus,
    tokenized: &[TokenizedDoc],
    vocab: &Vocabulary,
    stats: &CooccurrenceStats,
    words: &WordEmbeddingTable,
    sents: &SentenceEmbeddingTable,
    split: &SplitAssignment,
    config: &GraphBuildConfig,
) -> Result<HeteroGraph, GraphError> {
    corpus.validate()?;
    let n_docs = corpus.n_docs();
    if tokenized.len() != n_docs {
        return Err(GraphError::TokenizationMismatch(format!(
            "{} tokenized documents for {} corpus documents",
            tokenized.len(),
            n_docs
        )));
    }
    if config.knn_k == 0 || config.knn_k >= n_docs {
        return Err(GraphError::InvalidK {
            k: config.knn_k,
            n_docs,
        });
    }

    let doc_ids: Vec<String> = corpus.documents().map(|d| d.doc_id.clone()).collect();
    for (doc, tok) in corpus.documents().zip(tokenized) {
        if doc.doc_id != tok.doc_id {
            return Err(GraphError::TokenizationMismatch(format!(
                "document order differs at {} vs {}",
                doc.doc_id, tok.doc_id
            )));
        }
    }

    // Doc features straight from the sentence table, in corpus order.
    let mut doc_features = Tensor::zeros(n_docs, sents.dim());
    for (i, doc_id) in doc_ids.iter().enumerate() {
        let v = sents
            .get(doc_id)
            .ok_or_else(|| GraphError::MissingSentenceEmbedding(doc_id.clone()))?;
        doc_features.row_mut(i).copy_from_slice(v);
    }

    // User features: mean of the author's document embeddings.
    let mut user_features = Tensor::zeros(corpus.n_authors(), sents.dim());
    for (u, author) in corpus.authors.iter().enumerate() {
        let vectors = author
            .documents
            .iter()
            .map(|d| sents.get(&d.doc_id).expect("checked above"));
        let pooled = embeddings::pool_user_embedding(vectors)
            .map_err(|e| GraphError::Invalid(e.to_string()))?;
        user_features.row_mut(u).copy_from_slice(&pooled);
    }

    // Word features: table hits or the seeded fallback, in id order.
    let mut word_features = Tensor::zeros(vocab.len(), words.dim());
    for id in 0..vocab.len() as u32 {
        let feature = embeddings::word_feature(vocab.word(id), words, config.seed);
        word_features.row_mut(id as usize).copy_from_slice(&feature);
    }

    // user-doc: unit weight, one edge per document.
    let mut user_doc = EdgeList::with_capacity(n_docs);
    let mut doc_index = 0u32;
    for (u, author) in corpus.authors.iter().enumerate() {
        for _ in &author.documents {
            user_doc.push(u as u32, doc_index, 1.0);
            doc_index += 1;
        }
    }

    // doc-word: per-document TF-IDF, computed per document and flattened
    // in document order.
    #[cfg(feature = "parallel")]
    let tfidf_rows: Vec<Vec<(u32, f64)>> = tokenized
        .par_iter()
        .map(|doc| textstats::compute_tfidf(doc, vocab, n_docs))
        .collect::<Result<_, _>>()?;
    #[cfg(not(feature = "parallel"))]
    let tfidf_rows: Vec<Vec<(u32, f64)>> = tokenized
        .iter()
        .map(|doc| textstats::compute_tfidf(doc, vocab, n_docs))
        .collect::<Result<_, _>>()?;
    let mut doc_word = EdgeList::with_capacity(tfidf_rows.iter().map(Vec::len).sum());
    for (d, weights) in tfidf_rows.iter().enumerate() {
        if weights.is_empty() {
            log::warn!(
                "document {} has no in-vocabulary tokens; keeping node without doc-word edges",
                doc_ids[d]
            );
        }
        for &(word_id, weight) in weights {
            doc_word.push(d as u32, word_id, weight);
        }
    }

    // word-word: strictly positive PMI pairs, both directions.
    let pmi = textstats::pmi_edges(stats);
    let mut word_word = EdgeList::with_capacity(pmi.len() * 2);
    for (a, b, weight) in pmi {
        word_word.push(a, b, weight);
        word_word.push(b, a, weight);
    }

    // doc-doc: K directed nearest-neighbor edges per document.
    let doc_doc = knn_doc_edges(sents, &doc_ids, config.knn_k)?;

    let mut relations = BTreeMap::new();
    relations.insert(Relation::DocUser, user_doc.reversed());
    relations.insert(Relation::UserDoc, user_doc);
    relations.insert(Relation::WordDoc, doc_word.reversed());
    relations.insert(Relation::DocWord, doc_word);
    relations.insert(Relation::WordWord, word_word);
    relations.insert(Relation::DocDocRev, doc_doc.reversed());
    relations.insert(Relation::DocDoc, doc_doc);

    let labels: Vec<u8> = corpus.authors.iter().map(|a| a.label).collect();
    let [train_mask, val_mask, test_mask] = split.masks(corpus)?;

    let graph = HeteroGraph {
        user_features,
        doc_features,
        word_features,
        relations,
        labels,
        train_mask,
        val_mask,
        test_mask,
        meta: BuildMeta {
            knn_k: config.knn_k,
            min_count: config.min_count,
            window: config.window,
            seed: config.seed,
        },
    };
    graph.validate()?;
    Ok(graph)
}

/// Produces the requested ablation variant. `All` is the identity;
/// `NoWordWord` drops only the word-word edges; `NoWord` drops the word
/// nodes with every relation touching them; `NoDocDoc` drops the doc-doc
/// edges and their generated reverse.
pub fn apply_variant(graph: &HeteroGraph, variant: GraphVariant) -> HeteroGraph {
    let mut out = graph.clone();
    match variant {
        GraphVariant::All => {}
        GraphVariant::NoWordWord => {
            out.relations.remove(&Relation::WordWord);
        }
        GraphVariant::NoWord => {
            out.relations.remove(&Relation::WordWord);
            out.relations.remove(&Relation::DocWord);
            out.relations.remove(&Relation::WordDoc);
            out.word_features = Tensor::zeros(0, 0);
        }
        GraphVariant::NoDocDoc => {
            out.relations.remove(&Relation::DocDoc);
            out.relations.remove(&Relation::DocDocRev);
        }
    }
    out
}
