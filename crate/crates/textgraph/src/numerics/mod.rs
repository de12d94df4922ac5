//! Dense tensor arithmetic, segment (per-destination) reductions, and a
//! tape-based reverse-mode autodiff engine.
//!
//! Everything here is `f64`. Forward kernels may parallelize over
//! independent output rows or segments (see the `parallel` feature); each
//! output element is always accumulated in a fixed sequential order, so
//! parallel and sequential runs are bitwise identical. The reverse sweep
//! over one tape is sequential.

pub mod segment;
pub mod tape;
pub mod tensor;

pub use segment::{EdgeIndex, SegmentIndex};
pub use tape::{BceTargets, Gradients, Tape, Var};
pub use tensor::Tensor;
