//! Graph file serialization.
//!
//! A graph file is the shared binary container (magic `TXGR`, version 1)
//! with a JSON header carrying node counts, feature dimensions, the
//! relation list with edge counts, and the build metadata. The payload is,
//! in order: user features, doc features, word features (row-major f64),
//! labels (u8), the three split masks (u8 each), then per relation in
//! header order the src ids (u32), dst ids (u32), and weights (f64).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fileio::{self, PayloadReader};
use crate::numerics::Tensor;

use super::{BuildMeta, EdgeList, GraphError, HeteroGraph, Relation};

const MAGIC: &[u8; 4] = b"TXGR";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RelationHeader {
    name: String,
    edges: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphHeader {
    n_users: usize,
    n_docs: usize,
    n_words: usize,
    d_user: usize,
    d_doc: usize,
    d_word: usize,
    relations: Vec<RelationHeader>,
    meta: BuildMeta,
}

/// Writes the graph to `path`, atomically.
pub fn serialize_graph(graph: &HeteroGraph, path: &Path) -> Result<(), GraphError> {
    let header = GraphHeader {
        n_users: graph.n_users(),
        n_docs: graph.n_docs(),
        n_words: graph.n_words(),
        d_user: graph.user_features.cols(),
        d_doc: graph.doc_features.cols(),
        d_word: graph.word_features.cols(),
        relations: graph
            .relations
            .iter()
            .map(|(rel, edges)| RelationHeader {
                name: rel.as_str().to_string(),
                edges: edges.len(),
            })
            .collect(),
        meta: graph.meta,
    };

    let mut payload = Vec::new();
    fileio::push_f64s(&mut payload, graph.user_features.data());
    fileio::push_f64s(&mut payload, graph.doc_features.data());
    fileio::push_f64s(&mut payload, graph.word_features.data());
    payload.extend_from_slice(&graph.labels);
    for mask in [&graph.train_mask, &graph.val_mask, &graph.test_mask] {
        payload.extend(mask.iter().map(|&b| b as u8));
    }
    for edges in graph.relations.values() {
        fileio::push_u32s(&mut payload, &edges.src);
        fileio::push_u32s(&mut payload, &edges.dst);
        fileio::push_f64s(&mut payload, &edges.weight);
    }

    fileio::write_container(path, MAGIC, VERSION, &header, &payload)?;
    Ok(())
}

/// Reads a graph file back; the result is bit-identical to what was
/// serialized.
pub fn deserialize_graph(path: &Path) -> Result<HeteroGraph, GraphError> {
    let (header, payload): (GraphHeader, Vec<u8>) =
        fileio::read_container(path, MAGIC, VERSION)?;
    let mut reader = PayloadReader::new(&payload);

    let user_features = Tensor::from_vec(
        header.n_users,
        header.d_user,
        reader.read_f64s(header.n_users * header.d_user)?,
    );
    let doc_features = Tensor::from_vec(
        header.n_docs,
        header.d_doc,
        reader.read_f64s(header.n_docs * header.d_doc)?,
    );
    let word_features = Tensor::from_vec(
        header.n_words,
        header.d_word,
        reader.read_f64s(header.n_words * header.d_word)?,
    );
    let labels = reader.read_u8s(header.n_users)?;
    let train_mask: Vec<bool> = reader.read_u8s(header.n_users)?.iter().map(|&b| b != 0).collect();
    let val_mask: Vec<bool> = reader.read_u8s(header.n_users)?.iter().map(|&b| b != 0).collect();
    let test_mask: Vec<bool> = reader.read_u8s(header.n_users)?.iter().map(|&b| b != 0).collect();

    let mut relations = BTreeMap::new();
    for rel_header in &header.relations {
        let rel = Relation::parse(&rel_header.name).ok_or_else(|| {
            GraphError::Invalid(format!("unknown relation {:?} in file", rel_header.name))
        })?;
        let src = reader.read_u32s(rel_header.edges)?;
        let dst = reader.read_u32s(rel_header.edges)?;
        let weight = reader.read_f64s(rel_header.edges)?;
        relations.insert(rel, EdgeList { src, dst, weight });
    }
    reader.finish()?;

    let graph = HeteroGraph {
        user_features,
        doc_features,
        word_features,
        relations,
        labels,
        train_mask,
        val_mask,
        test_mask,
        meta: header.meta,
    };
    graph.validate()?;
    Ok(graph)
}
