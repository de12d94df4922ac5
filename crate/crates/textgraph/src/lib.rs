//! Heterogeneous text graphs and graph neural networks for user-level
//! classification.
//!
//! The pipeline turns an author-profiling corpus (users, their documents,
//! and the surviving vocabulary) into a typed graph with four base edge
//! relations, then trains a two-layer heterogeneous GNN (GraphSAGE, GAT,
//! or a graph transformer operator) to classify the user nodes.
//!
//! Modules follow the pipeline order:
//!
//! - [`corpus`]: corpus ingestion, activity filtering, stratified splits
//! - [`textstats`]: tokenization, vocabulary, TF-IDF, windowed PMI
//! - [`embeddings`]: pretrained word/sentence vector tables, user pooling
//! - [`hetgraph`]: graph assembly, ablation variants, binary serialization
//! - [`numerics`]: dense tensors, segment reductions, reverse-mode autodiff
//! - [`gnn`]: the three conv operators and the two-layer node classifier
//! - [`train`]: AdamW, BCE loss, the training loop, metrics, grid search
//! - [`synth`]: deterministic synthetic fixtures for tests and demos
//!
//! With the default `parallel` feature the data-parallel kernels (matmul,
//! segment reductions, kNN rows, co-occurrence counting, per-document
//! TF-IDF, grid-search cells) run on rayon. Disabling the feature falls
//! back to the sequential reference kernels; both paths produce bitwise
//! identical results because parallelism is only ever over independent
//! output rows.

pub mod corpus;
pub mod embeddings;
pub mod gnn;
pub mod hetgraph;
pub mod numerics;
pub mod synth;
pub mod textstats;
pub mod train;

mod fileio;
