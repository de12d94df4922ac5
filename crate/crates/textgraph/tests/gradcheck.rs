//! Finite-difference checks for every autodiff primitive on small random
//! inputs. Each builds a scalar loss whose upstream gradient varies per
//! element (a fixed random weighting), so no primitive sees a degenerate
//! all-ones adjoint.

mod common;

use std::rc::Rc;

use common::{finite_diff_check, fixture_tensor};
use textgraph::numerics::{BceTargets, EdgeIndex, SegmentIndex, Tape, Tensor, Var};

const EPSILON: f64 = 1e-5;
const TOLERANCE: f64 = 1e-6;
const FLOOR: f64 = 1e-3;

/// Weighted sum over the output so upstream gradients differ per cell.
fn weighted_loss(tape: &mut Tape, out: Var, salt: u64) -> Var {
    let shape = tape.value(out).shape();
    let weights = tape.constant(fixture_tensor(shape.0, shape.1, salt));
    let prod = tape.mul(out, weights);
    tape.sum_all(prod)
}

fn segment_index() -> Rc<SegmentIndex> {
    Rc::new(SegmentIndex::new(vec![0, 2, 1, 2, 0], 4))
}

fn edge_index() -> Rc<EdgeIndex> {
    // 5 edges between 5 sources and 4 destinations; dst 3 stays empty
    Rc::new(EdgeIndex::new(&[0, 1, 2, 4, 3], &[0, 2, 1, 2, 0], 5, 4))
}

#[test]
fn matmul_gradient() {
    let leaves = [fixture_tensor(5, 4, 1), fixture_tensor(4, 3, 2)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let c = tape.matmul(vars[0], vars[1]);
        weighted_loss(tape, c, 10)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn add_and_bias_gradient() {
    let leaves = [
        fixture_tensor(5, 4, 3),
        fixture_tensor(5, 4, 4),
        fixture_tensor(1, 4, 5),
    ];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let s = tape.add(vars[0], vars[1]);
        let b = tape.add_bias(s, vars[2]);
        weighted_loss(tape, b, 11)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn mul_gradient() {
    let leaves = [fixture_tensor(5, 4, 6), fixture_tensor(5, 4, 7)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let p = tape.mul(vars[0], vars[1]);
        weighted_loss(tape, p, 12)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn relu_gradient() {
    // inputs bounded away from the kink by construction
    let leaves = [fixture_tensor(5, 4, 8)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let r = tape.relu(vars[0]);
        weighted_loss(tape, r, 13)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn leaky_relu_gradient() {
    let leaves = [fixture_tensor(5, 4, 9)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let r = tape.leaky_relu(vars[0], 0.2);
        weighted_loss(tape, r, 14)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn scale_and_scale_rows_gradient() {
    let row_weights = Rc::new(vec![0.5, -1.5, 2.0, 0.25, -0.75]);
    let leaves = [fixture_tensor(5, 4, 15)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let s = tape.scale(vars[0], -1.75);
        let r = tape.scale_rows(s, row_weights.clone());
        weighted_loss(tape, r, 16)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn gather_rows_gradient() {
    let idx = segment_index();
    let leaves = [fixture_tensor(4, 3, 17)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let g = tape.gather_rows(vars[0], idx.clone());
        weighted_loss(tape, g, 18)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn mul_col_gradient() {
    let leaves = [fixture_tensor(5, 4, 19), fixture_tensor(5, 1, 20)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let m = tape.mul_col(vars[0], vars[1]);
        weighted_loss(tape, m, 21)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn rows_dot_gradient() {
    let leaves = [fixture_tensor(5, 4, 22), fixture_tensor(5, 4, 23)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let d = tape.rows_dot(vars[0], vars[1]);
        weighted_loss(tape, d, 24)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn segment_sum_gradient() {
    let idx = segment_index();
    let leaves = [fixture_tensor(5, 4, 25)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let s = tape.segment_sum(vars[0], idx.clone());
        weighted_loss(tape, s, 26)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn segment_mean_gradient() {
    let idx = segment_index();
    let leaves = [fixture_tensor(5, 4, 27)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let m = tape.segment_mean(vars[0], idx.clone());
        weighted_loss(tape, m, 28)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn segment_softmax_gradient() {
    let idx = segment_index();
    let leaves = [fixture_tensor(5, 1, 29)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let a = tape.segment_softmax(vars[0], idx.clone());
        weighted_loss(tape, a, 30)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn spmm_const_gradient() {
    let edges = edge_index();
    let weights = Rc::new(vec![0.3, 1.2, -0.4, 0.9, 2.0]);
    let leaves = [fixture_tensor(5, 3, 31)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let s = tape.spmm_const(vars[0], weights.clone(), edges.clone());
        weighted_loss(tape, s, 32)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn spmm_weighted_gradient() {
    let edges = edge_index();
    let leaves = [fixture_tensor(5, 1, 33), fixture_tensor(5, 3, 34)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let s = tape.spmm_weighted(vars[0], vars[1], edges.clone());
        weighted_loss(tape, s, 35)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn edge_dot_gradient() {
    let edges = edge_index();
    let leaves = [fixture_tensor(4, 3, 36), fixture_tensor(5, 3, 37)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let d = tape.edge_dot(vars[0], vars[1], edges.clone());
        weighted_loss(tape, d, 38)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn bce_gradient() {
    let targets = Rc::new(BceTargets::new(
        vec![1, 0, 1, 0, 1],
        vec![true, true, false, true, true],
    ));
    let leaves = [fixture_tensor(5, 1, 39)];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        tape.bce_with_logits(vars[0], targets.clone())
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn composite_attention_block_gradient() {
    // gather + softmax + weighted spmm chained, the GAT shape
    let edges = edge_index();
    let leaves = [
        fixture_tensor(5, 3, 40), // x_src
        fixture_tensor(3, 2, 41), // w
        fixture_tensor(2, 1, 42), // attention vector
    ];
    let err = finite_diff_check(&leaves, EPSILON, FLOOR, |tape, vars| {
        let h = tape.matmul(vars[0], vars[1]);
        let s = tape.matmul(h, vars[2]);
        let per_edge = tape.gather_rows(s, edges.by_src.clone());
        let alpha = tape.segment_softmax(per_edge, edges.by_dst.clone());
        let out = tape.spmm_weighted(alpha, h, edges.clone());
        weighted_loss(tape, out, 43)
    });
    assert!(err <= TOLERANCE, "max rel err {err}");
}

#[test]
fn gradients_are_deterministic() {
    let idx = segment_index();
    let run = || {
        let mut tape = Tape::new();
        let x = tape.leaf(fixture_tensor(5, 4, 44));
        let s = tape.segment_sum(x, idx.clone());
        let loss = weighted_loss(&mut tape, s, 45);
        let grads = tape.backward(loss);
        grads.get(x).unwrap().clone()
    };
    let a: Tensor = run();
    let b: Tensor = run();
    assert_eq!(a, b);
}
