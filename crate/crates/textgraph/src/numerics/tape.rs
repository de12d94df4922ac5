//! Tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive applied to [`Var`] handles; a single
//! reverse sweep from a scalar loss accumulates gradients for every leaf
//! created with [`Tape::leaf`]. Leaves created with [`Tape::constant`]
//! (node features, edge weights) are excluded from the sweep.
//!
//! Shape errors are programming errors and panic; callers validate their
//! inputs before building a tape.

use std::rc::Rc;

use super::segment::{self, EdgeIndex, SegmentIndex};
use super::tensor::{debug_assert_finite, Tensor};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Labels and mask for the masked binary cross-entropy loss node.
#[derive(Clone, Debug)]
pub struct BceTargets {
    pub labels: Vec<u8>,
    pub mask: Vec<bool>,
}

impl BceTargets {
    pub fn new(labels: Vec<u8>, mask: Vec<bool>) -> Self {
        assert_eq!(labels.len(), mask.len(), "label/mask length mismatch");
        assert!(
            mask.iter().any(|&m| m),
            "bce_with_logits requires a non-empty mask"
        );
        BceTargets { labels, mask }
    }

    fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddBias(usize, usize),
    Mul(usize, usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Scale(usize, f64),
    GatherRows(usize, Rc<SegmentIndex>),
    ScaleRows(usize, Rc<Vec<f64>>),
    MulCol(usize, usize),
    RowsDot(usize, usize),
    SegmentSum(usize, Rc<SegmentIndex>),
    SegmentMean(usize, Rc<SegmentIndex>),
    SegmentSoftmax(usize, Rc<SegmentIndex>),
    SpmmConst(usize, Rc<Vec<f64>>, Rc<EdgeIndex>),
    SpmmWeighted(usize, usize, Rc<EdgeIndex>),
    EdgeDot(usize, usize, Rc<EdgeIndex>),
    SumAll(usize),
    BceWithLogits(usize, Rc<BceTargets>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by one reverse sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

/// Records primitive ops for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A differentiable leaf (a model parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable leaf (features, precomputed weights).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert_finite(&value, "tape op");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, op, requires)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push_op(value, Op::MatMul(a.0, b.0), &[a, b])
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "add shape mismatch: {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Tensor::from_vec(ta.rows(), ta.cols(), data);
        self.push_op(value, Op::Add(a.0, b.0), &[a, b])
    }

    /// Adds a `1 x m` bias row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(bias));
        assert_eq!(tb.rows(), 1, "bias must be 1 x m");
        assert_eq!(
            ta.cols(),
            tb.cols(),
            "bias width {} does not match {} columns",
            tb.cols(),
            ta.cols()
        );
        let mut value = ta.clone();
        let cols = value.cols();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            for j in 0..cols {
                row[j] += tb.data()[j];
            }
        }
        self.push_op(value, Op::AddBias(a.0, bias.0), &[a, bias])
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "mul shape mismatch: {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Tensor::from_vec(ta.rows(), ta.cols(), data);
        self.push_op(value, Op::Mul(a.0, b.0), &[a, b])
    }

    /// ReLU; the subgradient at zero is zero.
    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push_op(value, Op::Relu(a.0), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push_op(value, Op::LeakyRelu(a.0, slope), &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| c * x);
        self.push_op(value, Op::Scale(a.0, c), &[a])
    }

    /// Row gather: output row `p` is `a`'s row `idx.seg_of()[p]`.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<SegmentIndex>) -> Var {
        let ta = self.value(a);
        assert_eq!(
            ta.rows(),
            idx.n_segments(),
            "gather source has {} rows but index covers {} segments",
            ta.rows(),
            idx.n_segments()
        );
        let cols = ta.cols();
        let mut value = Tensor::zeros(idx.len(), cols);
        for (p, &r) in idx.seg_of().iter().enumerate() {
            value.row_mut(p).copy_from_slice(ta.row(r as usize));
        }
        self.push_op(value, Op::GatherRows(a.0, idx), &[a])
    }

    /// Scales row `i` by the constant `w[i]`.
    pub fn scale_rows(&mut self, a: Var, w: Rc<Vec<f64>>) -> Var {
        let ta = self.value(a);
        assert_eq!(ta.rows(), w.len(), "row weight length mismatch");
        let mut value = ta.clone();
        for (i, &wi) in w.iter().enumerate() {
            for x in value.row_mut(i) {
                *x *= wi;
            }
        }
        self.push_op(value, Op::ScaleRows(a.0, w), &[a])
    }

    /// Broadcast product of an `E x d` tensor with an `E x 1` column.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (ta, tc) = (self.value(a), self.value(col));
        assert_eq!(tc.cols(), 1, "mul_col expects an E x 1 column");
        assert_eq!(ta.rows(), tc.rows(), "mul_col row mismatch");
        let mut value = ta.clone();
        for i in 0..value.rows() {
            let c = tc.data()[i];
            for x in value.row_mut(i) {
                *x *= c;
            }
        }
        self.push_op(value, Op::MulCol(a.0, col.0), &[a, col])
    }

    /// Rowwise dot product of two same-shape tensors, giving `E x 1`.
    pub fn rows_dot(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "rows_dot shape mismatch");
        let mut value = Tensor::zeros(ta.rows(), 1);
        for i in 0..ta.rows() {
            value.set(i, 0, dot(ta.row(i), tb.row(i)));
        }
        self.push_op(value, Op::RowsDot(a.0, b.0), &[a, b])
    }

    pub fn segment_sum(&mut self, a: Var, idx: Rc<SegmentIndex>) -> Var {
        let value = segment::segment_sum(self.value(a), &idx);
        self.push_op(value, Op::SegmentSum(a.0, idx), &[a])
    }

    pub fn segment_mean(&mut self, a: Var, idx: Rc<SegmentIndex>) -> Var {
        let value = segment::segment_mean(self.value(a), &idx);
        self.push_op(value, Op::SegmentMean(a.0, idx), &[a])
    }

    pub fn segment_softmax(&mut self, a: Var, idx: Rc<SegmentIndex>) -> Var {
        let value = segment::segment_softmax(self.value(a), &idx);
        self.push_op(value, Op::SegmentSoftmax(a.0, idx), &[a])
    }

    /// Sparse matrix product with constant edge weights:
    /// `out[v] = sum over edges e with dst e = v of w[e] * x[src e]`.
    pub fn spmm_const(&mut self, x: Var, w: Rc<Vec<f64>>, edges: Rc<EdgeIndex>) -> Var {
        let tx = self.value(x);
        assert_eq!(w.len(), edges.n_edges(), "edge weight length mismatch");
        assert_eq!(
            tx.rows(),
            edges.by_src.n_segments(),
            "spmm source rows do not match edge index"
        );
        let value = spmm_forward(tx, &w, edges.src(), &edges.by_dst);
        self.push_op(value, Op::SpmmConst(x.0, w, edges), &[x])
    }

    /// Sparse matrix product with differentiable `E x 1` edge weights
    /// (attention coefficients).
    pub fn spmm_weighted(&mut self, alpha: Var, x: Var, edges: Rc<EdgeIndex>) -> Var {
        let (ta, tx) = (self.value(alpha), self.value(x));
        assert_eq!(ta.cols(), 1, "spmm weights must be E x 1");
        assert_eq!(ta.rows(), edges.n_edges(), "spmm weight length mismatch");
        assert_eq!(
            tx.rows(),
            edges.by_src.n_segments(),
            "spmm source rows do not match edge index"
        );
        let value = spmm_forward(tx, ta.data(), edges.src(), &edges.by_dst);
        self.push_op(value, Op::SpmmWeighted(alpha.0, x.0, edges), &[alpha, x])
    }

    /// Per-edge dot product `score[e] = a[dst e] . b[src e]`, giving `E x 1`.
    pub fn edge_dot(&mut self, a: Var, b: Var, edges: Rc<EdgeIndex>) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.cols(), tb.cols(), "edge_dot feature width mismatch");
        assert_eq!(
            ta.rows(),
            edges.by_dst.n_segments(),
            "edge_dot dst rows do not match edge index"
        );
        assert_eq!(
            tb.rows(),
            edges.by_src.n_segments(),
            "edge_dot src rows do not match edge index"
        );
        let mut value = Tensor::zeros(edges.n_edges(), 1);
        for (e, (&u, &v)) in edges.src().iter().zip(edges.dst()).enumerate() {
            value.set(e, 0, dot(ta.row(v as usize), tb.row(u as usize)));
        }
        self.push_op(value, Op::EdgeDot(a.0, b.0, edges), &[a, b])
    }

    /// Sum of all elements, giving `1 x 1`.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let total: f64 = self.value(a).data().iter().sum();
        let value = Tensor::from_vec(1, 1, vec![total]);
        self.push_op(value, Op::SumAll(a.0), &[a])
    }

    /// Mean over masked rows of `softplus(z) - y * z` for `n x 1` logits,
    /// the numerically stable binary cross-entropy.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Rc<BceTargets>) -> Var {
        let tz = self.value(logits);
        assert_eq!(tz.cols(), 1, "logits must be n x 1");
        assert_eq!(tz.rows(), targets.labels.len(), "logit/label count mismatch");
        let loss = bce_forward(tz.data(), &targets.labels, &targets.mask);
        let value = Tensor::from_vec(1, 1, vec![loss]);
        self.push_op(value, Op::BceWithLogits(logits.0, targets), &[logits])
    }

    /// Reverse sweep from a `1 x 1` loss node. Returns gradients for every
    /// node that requires them; leaves created with [`Tape::constant`] get
    /// none.
    pub fn backward(&mut self, loss: Var) -> Gradients {
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "backward expects a scalar loss"
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_vec(1, 1, vec![1.0]));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.accumulate(i, &g, &mut grads);
            // Leaves keep their accumulated gradient.
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Gradients { grads }
    }

    fn accumulate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let add_to = |grads: &mut [Option<Tensor>], target: usize, delta: Tensor| {
            if !nodes[target].requires_grad {
                return;
            }
            match &mut grads[target] {
                Some(acc) => {
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                }
                slot => *slot = Some(delta),
            }
        };

        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                if nodes[*a].requires_grad {
                    add_to(grads, *a, g.matmul_seq(&tb.transpose()));
                }
                if nodes[*b].requires_grad {
                    add_to(grads, *b, ta.transpose().matmul_seq(g));
                }
            }
            Op::Add(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.clone());
            }
            Op::AddBias(a, bias) => {
                add_to(grads, *a, g.clone());
                if nodes[*bias].requires_grad {
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, &v) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                    add_to(grads, *bias, db);
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                if nodes[*a].requires_grad {
                    add_to(grads, *a, elementwise(g, tb, |gi, x| gi * x));
                }
                if nodes[*b].requires_grad {
                    add_to(grads, *b, elementwise(g, ta, |gi, x| gi * x));
                }
            }
            Op::Relu(a) => {
                let ta = &nodes[*a].value;
                add_to(grads, *a, elementwise(g, ta, |gi, x| if x > 0.0 { gi } else { 0.0 }));
            }
            Op::LeakyRelu(a, slope) => {
                let ta = &nodes[*a].value;
                let s = *slope;
                add_to(grads, *a, elementwise(g, ta, |gi, x| if x > 0.0 { gi } else { s * gi }));
            }
            Op::Scale(a, c) => {
                add_to(grads, *a, g.map(|x| c * x));
            }
            Op::GatherRows(a, idx) => {
                if nodes[*a].requires_grad {
                    add_to(grads, *a, segment::segment_sum_seq(g, idx));
                }
            }
            Op::ScaleRows(a, w) => {
                if nodes[*a].requires_grad {
                    let mut da = g.clone();
                    for (r, &wi) in w.iter().enumerate() {
                        for x in da.row_mut(r) {
                            *x *= wi;
                        }
                    }
                    add_to(grads, *a, da);
                }
            }
            Op::MulCol(a, col) => {
                let (ta, tc) = (&nodes[*a].value, &nodes[*col].value);
                if nodes[*a].requires_grad {
                    let mut da = g.clone();
                    for r in 0..da.rows() {
                        let c = tc.data()[r];
                        for x in da.row_mut(r) {
                            *x *= c;
                        }
                    }
                    add_to(grads, *a, da);
                }
                if nodes[*col].requires_grad {
                    let mut dc = Tensor::zeros(tc.rows(), 1);
                    for r in 0..tc.rows() {
                        dc.set(r, 0, dot(g.row(r), ta.row(r)));
                    }
                    add_to(grads, *col, dc);
                }
            }
            Op::RowsDot(a, b) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                if nodes[*a].requires_grad {
                    add_to(grads, *a, scale_rows_by_col(tb, g));
                }
                if nodes[*b].requires_grad {
                    add_to(grads, *b, scale_rows_by_col(ta, g));
                }
            }
            Op::SegmentSum(a, idx) => {
                if nodes[*a].requires_grad {
                    let mut da = Tensor::zeros(idx.len(), g.cols());
                    for (p, &s) in idx.seg_of().iter().enumerate() {
                        da.row_mut(p).copy_from_slice(g.row(s as usize));
                    }
                    add_to(grads, *a, da);
                }
            }
            Op::SegmentMean(a, idx) => {
                if nodes[*a].requires_grad {
                    let mut da = Tensor::zeros(idx.len(), g.cols());
                    for (p, &s) in idx.seg_of().iter().enumerate() {
                        let inv = 1.0 / idx.degree(s as usize) as f64;
                        for (d, &v) in da.row_mut(p).iter_mut().zip(g.row(s as usize)) {
                            *d = v * inv;
                        }
                    }
                    add_to(grads, *a, da);
                }
            }
            Op::SegmentSoftmax(a, idx) => {
                if nodes[*a].requires_grad {
                    let alpha = &nodes[i].value;
                    let mut da = Tensor::zeros(idx.len(), 1);
                    for s in 0..idx.n_segments() {
                        let entries = idx.entries_of(s);
                        let inner: f64 = entries
                            .iter()
                            .map(|&p| alpha.data()[p as usize] * g.data()[p as usize])
                            .sum();
                        for &p in entries {
                            let p = p as usize;
                            da.data_mut()[p] = alpha.data()[p] * (g.data()[p] - inner);
                        }
                    }
                    add_to(grads, *a, da);
                }
            }
            Op::SpmmConst(x, w, edges) => {
                if nodes[*x].requires_grad {
                    add_to(grads, *x, spmm_backward_x(g, w, edges));
                }
            }
            Op::SpmmWeighted(alpha, x, edges) => {
                let (ta, tx) = (&nodes[*alpha].value, &nodes[*x].value);
                if nodes[*x].requires_grad {
                    add_to(grads, *x, spmm_backward_x(g, ta.data(), edges));
                }
                if nodes[*alpha].requires_grad {
                    let mut da = Tensor::zeros(edges.n_edges(), 1);
                    for (e, (&u, &v)) in edges.src().iter().zip(edges.dst()).enumerate() {
                        da.set(e, 0, dot(g.row(v as usize), tx.row(u as usize)));
                    }
                    add_to(grads, *alpha, da);
                }
            }
            Op::EdgeDot(a, b, edges) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                if nodes[*a].requires_grad {
                    // d a[v] += sum over edges into v of g[e] * b[src e]
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for v in 0..edges.by_dst.n_segments() {
                        for &e in edges.by_dst.entries_of(v) {
                            let ge = g.data()[e as usize];
                            let src = edges.src()[e as usize] as usize;
                            for (d, &x) in da.row_mut(v).iter_mut().zip(tb.row(src)) {
                                *d += ge * x;
                            }
                        }
                    }
                    add_to(grads, *a, da);
                }
                if nodes[*b].requires_grad {
                    let mut db = Tensor::zeros(tb.rows(), tb.cols());
                    for u in 0..edges.by_src.n_segments() {
                        for &e in edges.by_src.entries_of(u) {
                            let ge = g.data()[e as usize];
                            let dst = edges.dst()[e as usize] as usize;
                            for (d, &x) in db.row_mut(u).iter_mut().zip(ta.row(dst)) {
                                *d += ge * x;
                            }
                        }
                    }
                    add_to(grads, *b, db);
                }
            }
            Op::SumAll(a) => {
                let ta = &nodes[*a].value;
                let gv = g.data()[0];
                add_to(grads, *a, Tensor::from_fn(ta.rows(), ta.cols(), |_, _| gv));
            }
            Op::BceWithLogits(z, targets) => {
                if nodes[*z].requires_grad {
                    let tz = &nodes[*z].value;
                    let gv = g.data()[0];
                    let m = targets.masked_count() as f64;
                    let mut dz = Tensor::zeros(tz.rows(), 1);
                    for r in 0..tz.rows() {
                        if targets.mask[r] {
                            let p = sigmoid(tz.data()[r]);
                            dz.set(r, 0, gv * (p - targets.labels[r] as f64) / m);
                        }
                    }
                    add_to(grads, *z, dz);
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn elementwise(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g
        .data()
        .iter()
        .zip(x.data())
        .map(|(&gi, &xi)| f(gi, xi))
        .collect();
    Tensor::from_vec(g.rows(), g.cols(), data)
}

/// Rows of `m` scaled by the `E x 1` column `col`.
fn scale_rows_by_col(m: &Tensor, col: &Tensor) -> Tensor {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let c = col.data()[r];
        for x in out.row_mut(r) {
            *x *= c;
        }
    }
    out
}

fn spmm_forward(x: &Tensor, w: &[f64], src: &[u32], by_dst: &SegmentIndex) -> Tensor {
    let mut out = Tensor::zeros(by_dst.n_segments(), x.cols());
    for v in 0..by_dst.n_segments() {
        let out_row = out.row_mut(v);
        for &e in by_dst.entries_of(v) {
            let we = w[e as usize];
            let row = x.row(src[e as usize] as usize);
            for (o, &xv) in out_row.iter_mut().zip(row) {
                *o += we * xv;
            }
        }
    }
    out
}

/// Gradient of spmm w.r.t. the dense input: the transposed product,
/// iterated per source row.
fn spmm_backward_x(g: &Tensor, w: &[f64], edges: &EdgeIndex) -> Tensor {
    let mut dx = Tensor::zeros(edges.by_src.n_segments(), g.cols());
    for u in 0..edges.by_src.n_segments() {
        let dx_row = dx.row_mut(u);
        for &e in edges.by_src.entries_of(u) {
            let we = w[e as usize];
            let row = g.row(edges.dst()[e as usize] as usize);
            for (d, &gv) in dx_row.iter_mut().zip(row) {
                *d += we * gv;
            }
        }
    }
    dx
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn bce_forward(logits: &[f64], labels: &[u8], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for ((&z, &y), &m) in logits.iter().zip(labels).zip(mask) {
        if m {
            total += softplus(z) - y as f64 * z;
            count += 1;
        }
    }
    total / count as f64
}
