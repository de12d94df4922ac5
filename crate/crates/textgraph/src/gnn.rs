//! The three relation conv operators, their heterogeneous composition,
//! and the two-layer node classifier.
//!
//! Per relation, messages flow from the source node type to the
//! destination node type:
//!
//! - GraphSAGE: a self transform plus a transformed weighted mean of the
//!   neighbor features (edge weights normalized per destination);
//! - GAT: additive attention scores through a leaky ReLU, softmax per
//!   destination, attention-weighted sum of transformed sources (edge
//!   weights ignored);
//! - graph transformer: scaled dot-product attention between transformed
//!   destination queries and source keys, plus an ungated skip transform
//!   of the destination (edge weights ignored).
//!
//! The heterogeneous wrapper runs every relation and sums the outputs per
//! destination node type, always in canonical relation order. The full
//! model is two such layers with ReLU, then an affine head over the user
//! rows producing one logit per user.

use std::collections::BTreeMap;
use std::path::Path;
use std::rc::Rc;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fileio::{self, PayloadReader};
use crate::hetgraph::{EdgeList, GraphVariant, HeteroGraph, NodeType, Relation};
use crate::numerics::{EdgeIndex, Tape, Tensor, Var};

/// LeakyReLU slope for GAT attention scores.
pub const GAT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("graph relations {graph:?} do not match model relations {model:?}")]
    VariantMismatch {
        model: Vec<Relation>,
        graph: Vec<Relation>,
    },
    #[error("{context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("relation {0:?} has no parameters")]
    MissingRelationParams(Relation),
    #[error(transparent)]
    Container(#[from] crate::fileio::ContainerError),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

/// Which conv operator the classifier uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvKind {
    Sage,
    Gat,
    GraphTransformer,
}

impl ConvKind {
    pub const ALL: [ConvKind; 3] = [ConvKind::Sage, ConvKind::Gat, ConvKind::GraphTransformer];

    pub fn as_str(self) -> &'static str {
        match self {
            ConvKind::Sage => "sage",
            ConvKind::Gat => "gat",
            ConvKind::GraphTransformer => "transformer",
        }
    }
}

impl std::str::FromStr for ConvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sage" => Ok(ConvKind::Sage),
            "gat" => Ok(ConvKind::Gat),
            "transformer" => Ok(ConvKind::GraphTransformer),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

impl std::fmt::Display for ConvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// GraphSAGE parameters for one relation.
#[derive(Clone, Debug, PartialEq)]
pub struct SageParams {
    pub w_self: Tensor,
    pub w_neigh: Tensor,
    pub bias: Tensor,
}

/// GAT parameters for one relation. The attention vectors are `d_out x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatParams {
    pub w_src: Tensor,
    pub w_dst: Tensor,
    pub a_src: Tensor,
    pub a_dst: Tensor,
    pub bias: Tensor,
}

/// Graph transformer parameters for one relation.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerParams {
    pub w_query: Tensor,
    pub w_key: Tensor,
    pub w_value: Tensor,
    pub w_skip: Tensor,
    pub bias: Tensor,
}

/// Per-relation parameter set, one variant per conv operator.
#[derive(Clone, Debug, PartialEq)]
pub enum RelationConvParams {
    Sage(SageParams),
    Gat(GatParams),
    GraphTransformer(TransformerParams),
}

impl RelationConvParams {
    pub fn out_dim(&self) -> usize {
        match self {
            RelationConvParams::Sage(p) => p.bias.cols(),
            RelationConvParams::Gat(p) => p.bias.cols(),
            RelationConvParams::GraphTransformer(p) => p.bias.cols(),
        }
    }

    /// Parameter tensors in the canonical (stable) order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            RelationConvParams::Sage(p) => vec![&p.w_self, &p.w_neigh, &p.bias],
            RelationConvParams::Gat(p) => {
                vec![&p.w_src, &p.w_dst, &p.a_src, &p.a_dst, &p.bias]
            }
            RelationConvParams::GraphTransformer(p) => {
                vec![&p.w_query, &p.w_key, &p.w_value, &p.w_skip, &p.bias]
            }
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            RelationConvParams::Sage(p) => vec![&mut p.w_self, &mut p.w_neigh, &mut p.bias],
            RelationConvParams::Gat(p) => vec![
                &mut p.w_src,
                &mut p.w_dst,
                &mut p.a_src,
                &mut p.a_dst,
                &mut p.bias,
            ],
            RelationConvParams::GraphTransformer(p) => vec![
                &mut p.w_query,
                &mut p.w_key,
                &mut p.w_value,
                &mut p.w_skip,
                &mut p.bias,
            ],
        }
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

fn init_relation(
    rng: &mut ChaCha8Rng,
    kind: ConvKind,
    d_src: usize,
    d_dst: usize,
    d_out: usize,
) -> RelationConvParams {
    match kind {
        ConvKind::Sage => RelationConvParams::Sage(SageParams {
            w_self: glorot(rng, d_dst, d_out),
            w_neigh: glorot(rng, d_src, d_out),
            bias: Tensor::zeros(1, d_out),
        }),
        ConvKind::Gat => RelationConvParams::Gat(GatParams {
            w_src: glorot(rng, d_src, d_out),
            w_dst: glorot(rng, d_dst, d_out),
            a_src: glorot(rng, d_out, 1),
            a_dst: glorot(rng, d_out, 1),
            bias: Tensor::zeros(1, d_out),
        }),
        ConvKind::GraphTransformer => RelationConvParams::GraphTransformer(TransformerParams {
            w_query: glorot(rng, d_dst, d_out),
            w_key: glorot(rng, d_src, d_out),
            w_value: glorot(rng, d_src, d_out),
            w_skip: glorot(rng, d_dst, d_out),
            bias: Tensor::zeros(1, d_out),
        }),
    }
}

/// Precomputed edge indices and normalized weights for every relation of
/// one graph. Built once and shared across epochs.
pub struct GraphLayout {
    rels: BTreeMap<Relation, RelationLayout>,
}

pub struct RelationLayout {
    pub edges: Rc<EdgeIndex>,
    /// Edge weights normalized per destination (zero where a destination's
    /// weights sum to zero). Used by the GraphSAGE weighted mean.
    pub norm_weights: Rc<Vec<f64>>,
}

impl RelationLayout {
    pub fn new(edges: &EdgeList, n_src: usize, n_dst: usize) -> Self {
        let index = EdgeIndex::new(&edges.src, &edges.dst, n_src, n_dst);
        let mut sums = vec![0.0f64; n_dst];
        for (&d, &w) in edges.dst.iter().zip(&edges.weight) {
            sums[d as usize] += w;
        }
        let norm_weights = edges
            .dst
            .iter()
            .zip(&edges.weight)
            .map(|(&d, &w)| {
                let s = sums[d as usize];
                if s == 0.0 {
                    0.0
                } else {
                    w / s
                }
            })
            .collect();
        RelationLayout {
            edges: Rc::new(index),
            norm_weights: Rc::new(norm_weights),
        }
    }
}

impl GraphLayout {
    pub fn new(graph: &HeteroGraph) -> Self {
        let rels = graph
            .relations
            .iter()
            .map(|(&rel, edges)| {
                let layout = RelationLayout::new(
                    edges,
                    graph.node_count(rel.src()),
                    graph.node_count(rel.dst()),
                );
                (rel, layout)
            })
            .collect();
        GraphLayout { rels }
    }

    pub fn relation(&self, rel: Relation) -> &RelationLayout {
        &self.rels[&rel]
    }
}

struct StagedSage {
    w_self: Var,
    w_neigh: Var,
    bias: Var,
}

struct StagedGat {
    w_src: Var,
    w_dst: Var,
    a_src: Var,
    a_dst: Var,
    bias: Var,
}

struct StagedTransformer {
    w_query: Var,
    w_key: Var,
    w_value: Var,
    w_skip: Var,
    bias: Var,
    d_out: usize,
}

enum StagedRelParams {
    Sage(StagedSage),
    Gat(StagedGat),
    GraphTransformer(StagedTransformer),
}

fn stage_relation(
    tape: &mut Tape,
    params: &RelationConvParams,
    param_vars: &mut Vec<Var>,
) -> StagedRelParams {
    let mut stage = |t: &Tensor, param_vars: &mut Vec<Var>| {
        let v = tape.leaf(t.clone());
        param_vars.push(v);
        v
    };
    match params {
        RelationConvParams::Sage(p) => StagedRelParams::Sage(StagedSage {
            w_self: stage(&p.w_self, param_vars),
            w_neigh: stage(&p.w_neigh, param_vars),
            bias: stage(&p.bias, param_vars),
        }),
        RelationConvParams::Gat(p) => StagedRelParams::Gat(StagedGat {
            w_src: stage(&p.w_src, param_vars),
            w_dst: stage(&p.w_dst, param_vars),
            a_src: stage(&p.a_src, param_vars),
            a_dst: stage(&p.a_dst, param_vars),
            bias: stage(&p.bias, param_vars),
        }),
        RelationConvParams::GraphTransformer(p) => {
            StagedRelParams::GraphTransformer(StagedTransformer {
                w_query: stage(&p.w_query, param_vars),
                w_key: stage(&p.w_key, param_vars),
                w_value: stage(&p.w_value, param_vars),
                w_skip: stage(&p.w_skip, param_vars),
                bias: stage(&p.bias, param_vars),
                d_out: p.bias.cols(),
            })
        }
    }
}

fn conv_staged(
    tape: &mut Tape,
    params: &StagedRelParams,
    x_src: Var,
    x_dst: Var,
    layout: &RelationLayout,
) -> Var {
    match params {
        StagedRelParams::Sage(p) => {
            let agg = tape.spmm_const(x_src, layout.norm_weights.clone(), layout.edges.clone());
            let self_term = tape.matmul(x_dst, p.w_self);
            let neigh_term = tape.matmul(agg, p.w_neigh);
            let combined = tape.add(self_term, neigh_term);
            tape.add_bias(combined, p.bias)
        }
        StagedRelParams::Gat(p) => {
            let h_src = tape.matmul(x_src, p.w_src);
            let h_dst = tape.matmul(x_dst, p.w_dst);
            let s_src = tape.matmul(h_src, p.a_src);
            let s_dst = tape.matmul(h_dst, p.a_dst);
            let e_src = tape.gather_rows(s_src, layout.edges.by_src.clone());
            let e_dst = tape.gather_rows(s_dst, layout.edges.by_dst.clone());
            let merged = tape.add(e_src, e_dst);
            let score = tape.leaky_relu(merged, GAT_LEAKY_SLOPE);
            let alpha = tape.segment_softmax(score, layout.edges.by_dst.clone());
            let msg = tape.spmm_weighted(alpha, h_src, layout.edges.clone());
            tape.add_bias(msg, p.bias)
        }
        StagedRelParams::GraphTransformer(p) => {
            let q = tape.matmul(x_dst, p.w_query);
            let k = tape.matmul(x_src, p.w_key);
            let v = tape.matmul(x_src, p.w_value);
            let raw = tape.edge_dot(q, k, layout.edges.clone());
            let score = tape.scale(raw, 1.0 / (p.d_out as f64).sqrt());
            let alpha = tape.segment_softmax(score, layout.edges.by_dst.clone());
            let msg = tape.spmm_weighted(alpha, v, layout.edges.clone());
            let skip = tape.matmul(x_dst, p.w_skip);
            let combined = tape.add(msg, skip);
            tape.add_bias(combined, p.bias)
        }
    }
}

/// One heterogeneous layer: every relation convolves source features into
/// destination messages; per destination type the relation outputs are
/// summed in canonical relation order. Types receiving nothing get zeros.
fn hetero_layer_staged(
    tape: &mut Tape,
    graph: &HeteroGraph,
    layout: &GraphLayout,
    params: &BTreeMap<Relation, StagedRelParams>,
    inputs: &BTreeMap<NodeType, Var>,
    out_dim: usize,
) -> BTreeMap<NodeType, Var> {
    let mut acc: BTreeMap<NodeType, Option<Var>> =
        inputs.keys().map(|&t| (t, None)).collect();
    for (&rel, staged) in params {
        let x_src = inputs[&rel.src()];
        let x_dst = inputs[&rel.dst()];
        let out = conv_staged(tape, staged, x_src, x_dst, layout.relation(rel));
        let slot = acc.get_mut(&rel.dst()).expect("dst type present");
        *slot = Some(match slot.take() {
            None => out,
            Some(prev) => tape.add(prev, out),
        });
    }
    acc.into_iter()
        .map(|(t, slot)| {
            let var = slot.unwrap_or_else(|| {
                tape.constant(Tensor::zeros(graph.node_count(t), out_dim))
            });
            (t, var)
        })
        .collect()
}

/// The two-layer heterogeneous classifier over user nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeClassifier {
    pub kind: ConvKind,
    pub variant: GraphVariant,
    pub hidden_dim: usize,
    pub seed: u64,
    pub layer1: BTreeMap<Relation, RelationConvParams>,
    pub layer2: BTreeMap<Relation, RelationConvParams>,
    pub head_weight: Tensor,
    pub head_bias: Tensor,
}

impl NodeClassifier {
    /// Glorot-uniform weights and zero biases, deterministic per seed.
    /// The graph must already be the requested variant.
    pub fn init(
        kind: ConvKind,
        graph: &HeteroGraph,
        variant: GraphVariant,
        hidden_dim: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer1 = graph
            .relations
            .keys()
            .map(|&rel| {
                let d_src = graph.feature_dim(rel.src());
                let d_dst = graph.feature_dim(rel.dst());
                (rel, init_relation(&mut rng, kind, d_src, d_dst, hidden_dim))
            })
            .collect();
        let layer2 = graph
            .relations
            .keys()
            .map(|&rel| {
                (
                    rel,
                    init_relation(&mut rng, kind, hidden_dim, hidden_dim, hidden_dim),
                )
            })
            .collect();
        NodeClassifier {
            kind,
            variant,
            hidden_dim,
            seed,
            layer1,
            layer2,
            head_weight: glorot(&mut rng, hidden_dim, 1),
            head_bias: Tensor::zeros(1, 1),
        }
    }

    /// All parameter tensors, canonical order: layer 1 relations, layer 2
    /// relations, head weight, head bias.
    pub fn param_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for params in self.layer1.values() {
            out.extend(params.tensors());
        }
        for params in self.layer2.values() {
            out.extend(params.tensors());
        }
        out.push(&self.head_weight);
        out.push(&self.head_bias);
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for params in self.layer1.values_mut() {
            out.extend(params.tensors_mut());
        }
        for params in self.layer2.values_mut() {
            out.extend(params.tensors_mut());
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    /// Total scalar parameter count.
    pub fn n_parameters(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    fn check_compatible(&self, graph: &HeteroGraph) -> Result<(), GnnError> {
        let model: Vec<Relation> = self.layer1.keys().copied().collect();
        let in_graph: Vec<Relation> = graph.relations.keys().copied().collect();
        if model != in_graph {
            return Err(GnnError::VariantMismatch {
                model,
                graph: in_graph,
            });
        }
        for (&rel, params) in &self.layer1 {
            let d_dst = graph.feature_dim(rel.dst());
            let expected = match params {
                RelationConvParams::Sage(p) => p.w_self.rows(),
                RelationConvParams::Gat(p) => p.w_dst.rows(),
                RelationConvParams::GraphTransformer(p) => p.w_query.rows(),
            };
            if expected != d_dst {
                return Err(GnnError::ShapeMismatch {
                    context: format!("layer 1 {} destination input", rel.as_str()),
                    expected: (expected, self.hidden_dim),
                    found: (d_dst, self.hidden_dim),
                });
            }
        }
        Ok(())
    }

    /// Builds the full forward pass on the tape. Returns the logits node
    /// (`n_users x 1`) and the staged parameter vars, aligned with
    /// [`NodeClassifier::param_tensors`].
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        graph: &HeteroGraph,
        layout: &GraphLayout,
    ) -> Result<(Var, Vec<Var>), GnnError> {
        self.check_compatible(graph)?;
        let mut param_vars = Vec::with_capacity(self.param_tensors().len());
        let staged1: BTreeMap<Relation, StagedRelParams> = self
            .layer1
            .iter()
            .map(|(&rel, p)| (rel, stage_relation(tape, p, &mut param_vars)))
            .collect();
        let staged2: BTreeMap<Relation, StagedRelParams> = self
            .layer2
            .iter()
            .map(|(&rel, p)| (rel, stage_relation(tape, p, &mut param_vars)))
            .collect();
        let head_weight = tape.leaf(self.head_weight.clone());
        param_vars.push(head_weight);
        let head_bias = tape.leaf(self.head_bias.clone());
        param_vars.push(head_bias);

        let features: BTreeMap<NodeType, Var> = graph
            .node_types()
            .into_iter()
            .map(|t| (t, tape.constant(graph.features(t).clone())))
            .collect();

        let z1 = hetero_layer_staged(tape, graph, layout, &staged1, &features, self.hidden_dim);
        let h1: BTreeMap<NodeType, Var> =
            z1.into_iter().map(|(t, v)| (t, tape.relu(v))).collect();
        let z2 = hetero_layer_staged(tape, graph, layout, &staged2, &h1, self.hidden_dim);
        let h2: BTreeMap<NodeType, Var> =
            z2.into_iter().map(|(t, v)| (t, tape.relu(v))).collect();

        let user_h = h2[&NodeType::User];
        let head = tape.matmul(user_h, head_weight);
        let logits = tape.add_bias(head, head_bias);
        Ok((logits, param_vars))
    }

    /// Inference: user logits as a plain `n_users x 1` tensor.
    pub fn forward(&self, graph: &HeteroGraph) -> Result<Tensor, GnnError> {
        let layout = GraphLayout::new(graph);
        let mut tape = Tape::new();
        let (logits, _) = self.forward_on_tape(&mut tape, graph, &layout)?;
        Ok(tape.value(logits).clone())
    }
}

fn single_relation_layout(edges: &EdgeList, n_src: usize, n_dst: usize) -> RelationLayout {
    RelationLayout::new(edges, n_src, n_dst)
}

fn check_edges(edges: &EdgeList, n_src: usize, n_dst: usize) -> Result<(), GnnError> {
    for (&s, &d) in edges.src.iter().zip(&edges.dst) {
        if s as usize >= n_src || d as usize >= n_dst {
            return Err(GnnError::ShapeMismatch {
                context: format!("edge ({s}, {d}) out of range"),
                expected: (n_src, n_dst),
                found: (s as usize, d as usize),
            });
        }
    }
    Ok(())
}

/// Single-relation GraphSAGE conv on plain tensors.
pub fn sage_conv(
    x_src: &Tensor,
    x_dst: &Tensor,
    edges: &EdgeList,
    params: &SageParams,
) -> Result<Tensor, GnnError> {
    check_edges(edges, x_src.rows(), x_dst.rows())?;
    let layout = single_relation_layout(edges, x_src.rows(), x_dst.rows());
    let mut tape = Tape::new();
    let mut vars = Vec::new();
    let staged = stage_relation(
        &mut tape,
        &RelationConvParams::Sage(params.clone()),
        &mut vars,
    );
    let xs = tape.constant(x_src.clone());
    let xd = tape.constant(x_dst.clone());
    let out = conv_staged(&mut tape, &staged, xs, xd, &layout);
    Ok(tape.value(out).clone())
}

/// Single-relation GAT conv on plain tensors. Edge weights are ignored.
pub fn gat_conv(
    x_src: &Tensor,
    x_dst: &Tensor,
    edges: &EdgeList,
    params: &GatParams,
) -> Result<Tensor, GnnError> {
    check_edges(edges, x_src.rows(), x_dst.rows())?;
    let layout = single_relation_layout(edges, x_src.rows(), x_dst.rows());
    let mut tape = Tape::new();
    let mut vars = Vec::new();
    let staged = stage_relation(
        &mut tape,
        &RelationConvParams::Gat(params.clone()),
        &mut vars,
    );
    let xs = tape.constant(x_src.clone());
    let xd = tape.constant(x_dst.clone());
    let out = conv_staged(&mut tape, &staged, xs, xd, &layout);
    Ok(tape.value(out).clone())
}

/// Single-relation graph transformer conv on plain tensors. Edge weights
/// are ignored.
pub fn transformer_conv(
    x_src: &Tensor,
    x_dst: &Tensor,
    edges: &EdgeList,
    params: &TransformerParams,
) -> Result<Tensor, GnnError> {
    check_edges(edges, x_src.rows(), x_dst.rows())?;
    let layout = single_relation_layout(edges, x_src.rows(), x_dst.rows());
    let mut tape = Tape::new();
    let mut vars = Vec::new();
    let staged = stage_relation(
        &mut tape,
        &RelationConvParams::GraphTransformer(params.clone()),
        &mut vars,
    );
    let xs = tape.constant(x_src.clone());
    let xd = tape.constant(x_dst.clone());
    let out = conv_staged(&mut tape, &staged, xs, xd, &layout);
    Ok(tape.value(out).clone())
}

/// One heterogeneous conv over the whole graph (no activation): per node
/// type, the sum of all relation outputs targeting it.
pub fn hetero_conv(
    graph: &HeteroGraph,
    params: &BTreeMap<Relation, RelationConvParams>,
) -> Result<BTreeMap<NodeType, Tensor>, GnnError> {
    for rel in graph.relations.keys() {
        if !params.contains_key(rel) {
            return Err(GnnError::MissingRelationParams(*rel));
        }
    }
    let out_dim = params
        .values()
        .next()
        .map(RelationConvParams::out_dim)
        .unwrap_or(0);
    let layout = GraphLayout::new(graph);
    let mut tape = Tape::new();
    let mut vars = Vec::new();
    let staged: BTreeMap<Relation, StagedRelParams> = graph
        .relations
        .keys()
        .map(|&rel| (rel, stage_relation(&mut tape, &params[&rel], &mut vars)))
        .collect();
    let features: BTreeMap<NodeType, Var> = graph
        .node_types()
        .into_iter()
        .map(|t| (t, tape.constant(graph.features(t).clone())))
        .collect();
    let outputs = hetero_layer_staged(&mut tape, graph, &layout, &staged, &features, out_dim);
    Ok(outputs
        .into_iter()
        .map(|(t, v)| (t, tape.value(v).clone()))
        .collect())
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"TXCK";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ShapeHeader {
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct RelationParamsHeader {
    relation: String,
    shapes: Vec<ShapeHeader>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    kind: ConvKind,
    variant: GraphVariant,
    hidden_dim: usize,
    seed: u64,
    layer1: Vec<RelationParamsHeader>,
    layer2: Vec<RelationParamsHeader>,
    head: Vec<ShapeHeader>,
}

fn relation_headers(layer: &BTreeMap<Relation, RelationConvParams>) -> Vec<RelationParamsHeader> {
    layer
        .iter()
        .map(|(rel, params)| RelationParamsHeader {
            relation: rel.as_str().to_string(),
            shapes: params
                .tensors()
                .iter()
                .map(|t| ShapeHeader {
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        })
        .collect()
}

/// Writes every parameter tensor plus the model configuration.
pub fn save_checkpoint(model: &NodeClassifier, path: &Path) -> Result<(), GnnError> {
    let header = CheckpointHeader {
        kind: model.kind,
        variant: model.variant,
        hidden_dim: model.hidden_dim,
        seed: model.seed,
        layer1: relation_headers(&model.layer1),
        layer2: relation_headers(&model.layer2),
        head: vec![
            ShapeHeader {
                rows: model.head_weight.rows(),
                cols: model.head_weight.cols(),
            },
            ShapeHeader {
                rows: model.head_bias.rows(),
                cols: model.head_bias.cols(),
            },
        ],
    };
    let mut payload = Vec::new();
    for tensor in model.param_tensors() {
        fileio::push_f64s(&mut payload, tensor.data());
    }
    fileio::write_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &header, &payload)?;
    Ok(())
}

fn params_from_shapes(
    kind: ConvKind,
    shapes: &[ShapeHeader],
    reader: &mut PayloadReader<'_>,
) -> Result<RelationConvParams, GnnError> {
    let expected = match kind {
        ConvKind::Sage => 3,
        ConvKind::Gat | ConvKind::GraphTransformer => 5,
    };
    if shapes.len() != expected {
        return Err(GnnError::MalformedCheckpoint(format!(
            "expected {expected} tensors per relation, found {}",
            shapes.len()
        )));
    }
    let mut tensors = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let data = reader.read_f64s(shape.rows * shape.cols)?;
        tensors.push(Tensor::from_vec(shape.rows, shape.cols, data));
    }
    let mut iter = tensors.into_iter();
    let mut next = || iter.next().expect("length checked");
    Ok(match kind {
        ConvKind::Sage => RelationConvParams::Sage(SageParams {
            w_self: next(),
            w_neigh: next(),
            bias: next(),
        }),
        ConvKind::Gat => RelationConvParams::Gat(GatParams {
            w_src: next(),
            w_dst: next(),
            a_src: next(),
            a_dst: next(),
            bias: next(),
        }),
        ConvKind::GraphTransformer => RelationConvParams::GraphTransformer(TransformerParams {
            w_query: next(),
            w_key: next(),
            w_value: next(),
            w_skip: next(),
            bias: next(),
        }),
    })
}

fn layer_from_headers(
    kind: ConvKind,
    headers: &[RelationParamsHeader],
    reader: &mut PayloadReader<'_>,
) -> Result<BTreeMap<Relation, RelationConvParams>, GnnError> {
    let mut layer = BTreeMap::new();
    for header in headers {
        let rel = Relation::parse(&header.relation).ok_or_else(|| {
            GnnError::MalformedCheckpoint(format!("unknown relation {:?}", header.relation))
        })?;
        layer.insert(rel, params_from_shapes(kind, &header.shapes, reader)?);
    }
    Ok(layer)
}

/// Reads a checkpoint back into a classifier.
pub fn load_checkpoint(path: &Path) -> Result<NodeClassifier, GnnError> {
    let (header, payload): (CheckpointHeader, Vec<u8>) =
        fileio::read_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let mut reader = PayloadReader::new(&payload);
    let layer1 = layer_from_headers(header.kind, &header.layer1, &mut reader)?;
    let layer2 = layer_from_headers(header.kind, &header.layer2, &mut reader)?;
    if header.head.len() != 2 {
        return Err(GnnError::MalformedCheckpoint(
            "expected exactly two head tensors".into(),
        ));
    }
    let head_weight = Tensor::from_vec(
        header.head[0].rows,
        header.head[0].cols,
        reader.read_f64s(header.head[0].rows * header.head[0].cols)?,
    );
    let head_bias = Tensor::from_vec(
        header.head[1].rows,
        header.head[1].cols,
        reader.read_f64s(header.head[1].rows * header.head[1].cols)?,
    );
    reader.finish().map_err(GnnError::Container)?;
    Ok(NodeClassifier {
        kind: header.kind,
        variant: header.variant,
        hidden_dim: header.hidden_dim,
        seed: header.seed,
        layer1,
        layer2,
        head_weight,
        head_bias,
    })
}
