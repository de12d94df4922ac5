//! Segment reductions over edge-shaped data.
//!
//! A [`SegmentIndex`] groups `E` entries (typically edges) by a segment id
//! (typically the destination node). The CSR-style grouping lets every
//! reduction iterate one segment's entries in ascending entry order,
//! independently of other segments, which keeps parallel and sequential
//! execution bitwise identical.

use std::rc::Rc;

use super::tensor::Tensor;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Entry-to-segment assignment plus the inverse grouping.
#[derive(Clone, Debug)]
pub struct SegmentIndex {
    n_segments: usize,
    /// Segment id per entry, in original entry order.
    seg_of: Vec<u32>,
    /// CSR offsets into `order`, length `n_segments + 1`.
    offsets: Vec<usize>,
    /// Entry positions grouped by segment, ascending within a segment.
    order: Vec<u32>,
}

impl SegmentIndex {
    pub fn new(seg_of: Vec<u32>, n_segments: usize) -> Self {
        let mut counts = vec![0usize; n_segments + 1];
        for &s in &seg_of {
            assert!(
                (s as usize) < n_segments,
                "segment id {s} out of range (n_segments = {n_segments})"
            );
            counts[s as usize + 1] += 1;
        }
        for i in 0..n_segments {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut order = vec![0u32; seg_of.len()];
        for (pos, &s) in seg_of.iter().enumerate() {
            order[cursor[s as usize]] = pos as u32;
            cursor[s as usize] += 1;
        }
        SegmentIndex {
            n_segments,
            seg_of,
            offsets,
            order,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.seg_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seg_of.is_empty()
    }

    pub fn seg_of(&self) -> &[u32] {
        &self.seg_of
    }

    /// Entry positions belonging to segment `s`, ascending.
    pub fn entries_of(&self, s: usize) -> &[u32] {
        &self.order[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn degree(&self, s: usize) -> usize {
        self.offsets[s + 1] - self.offsets[s]
    }
}

/// A typed edge list indexed from both endpoints: `by_dst` groups edges by
/// destination (message aggregation), `by_src` by source (the backward
/// scatter of a gather).
#[derive(Clone, Debug)]
pub struct EdgeIndex {
    pub by_src: Rc<SegmentIndex>,
    pub by_dst: Rc<SegmentIndex>,
}

impl EdgeIndex {
    pub fn new(src: &[u32], dst: &[u32], n_src: usize, n_dst: usize) -> Self {
        assert_eq!(src.len(), dst.len(), "edge src/dst length mismatch");
        EdgeIndex {
            by_src: Rc::new(SegmentIndex::new(src.to_vec(), n_src)),
            by_dst: Rc::new(SegmentIndex::new(dst.to_vec(), n_dst)),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.by_src.len()
    }

    pub fn src(&self) -> &[u32] {
        self.by_src.seg_of()
    }

    pub fn dst(&self) -> &[u32] {
        self.by_dst.seg_of()
    }
}

/// Sum of entry rows per segment; empty segments give a zero row.
pub fn segment_sum(entries: &Tensor, idx: &SegmentIndex) -> Tensor {
    #[cfg(feature = "parallel")]
    {
        segment_apply_par(entries, idx, |_| 1.0)
    }
    #[cfg(not(feature = "parallel"))]
    {
        segment_sum_seq(entries, idx)
    }
}

/// Sequential reference for [`segment_sum`].
pub fn segment_sum_seq(entries: &Tensor, idx: &SegmentIndex) -> Tensor {
    segment_apply_seq(entries, idx, |_| 1.0)
}

/// Mean of entry rows per segment; empty segments give a zero row.
pub fn segment_mean(entries: &Tensor, idx: &SegmentIndex) -> Tensor {
    #[cfg(feature = "parallel")]
    {
        segment_apply_par(entries, idx, |deg| 1.0 / deg as f64)
    }
    #[cfg(not(feature = "parallel"))]
    {
        segment_mean_seq(entries, idx)
    }
}

/// Sequential reference for [`segment_mean`].
pub fn segment_mean_seq(entries: &Tensor, idx: &SegmentIndex) -> Tensor {
    segment_apply_seq(entries, idx, |deg| 1.0 / deg as f64)
}

fn segment_row(entries: &Tensor, idx: &SegmentIndex, s: usize, scale: f64, out_row: &mut [f64]) {
    for &p in idx.entries_of(s) {
        let row = entries.row(p as usize);
        for (o, &v) in out_row.iter_mut().zip(row) {
            *o += v;
        }
    }
    if scale != 1.0 {
        for o in out_row.iter_mut() {
            *o *= scale;
        }
    }
}

fn segment_apply_seq(entries: &Tensor, idx: &SegmentIndex, scale: impl Fn(usize) -> f64) -> Tensor {
    check_entries(entries, idx);
    let mut out = Tensor::zeros(idx.n_segments(), entries.cols());
    for s in 0..idx.n_segments() {
        let deg = idx.degree(s);
        if deg == 0 {
            continue;
        }
        segment_row(entries, idx, s, scale(deg), out.row_mut(s));
    }
    out
}

#[cfg(feature = "parallel")]
fn segment_apply_par(
    entries: &Tensor,
    idx: &SegmentIndex,
    scale: impl Fn(usize) -> f64 + Sync,
) -> Tensor {
    check_entries(entries, idx);
    let cols = entries.cols();
    let mut out = Tensor::zeros(idx.n_segments(), cols);
    out.data_mut()
        .par_chunks_mut(cols.max(1))
        .enumerate()
        .for_each(|(s, out_row)| {
            let deg = idx.degree(s);
            if deg == 0 {
                return;
            }
            segment_row(entries, idx, s, scale(deg), out_row);
        });
    out
}

/// Softmax over the entries sharing a segment, max-subtracted for
/// stability. `scores` must be `E x 1`; output has the same shape.
///
/// The parallel path runs two passes (per-segment max and exp-sum, then a
/// per-entry normalize); every quantity is computed in the same order as
/// the sequential path, so both are bitwise identical.
pub fn segment_softmax(scores: &Tensor, idx: &SegmentIndex) -> Tensor {
    #[cfg(feature = "parallel")]
    {
        check_scores(scores, idx);
        let data = scores.data();
        let stats: Vec<(f64, f64)> = (0..idx.n_segments())
            .into_par_iter()
            .map(|s| softmax_stats(data, idx.entries_of(s)))
            .collect();
        let mut out = Tensor::zeros(scores.rows(), 1);
        let seg_of = idx.seg_of();
        out.data_mut()
            .par_iter_mut()
            .enumerate()
            .for_each(|(p, o)| {
                let (max, total) = stats[seg_of[p] as usize];
                *o = (data[p] - max).exp() / total;
            });
        out
    }
    #[cfg(not(feature = "parallel"))]
    {
        segment_softmax_seq(scores, idx)
    }
}

/// Sequential reference for [`segment_softmax`].
pub fn segment_softmax_seq(scores: &Tensor, idx: &SegmentIndex) -> Tensor {
    check_scores(scores, idx);
    let data = scores.data();
    let mut out = Tensor::zeros(scores.rows(), 1);
    for s in 0..idx.n_segments() {
        let entries = idx.entries_of(s);
        if entries.is_empty() {
            continue;
        }
        let (max, total) = softmax_stats(data, entries);
        for &p in entries {
            out.data_mut()[p as usize] = (data[p as usize] - max).exp() / total;
        }
    }
    out
}

/// Per-segment max and exp-sum, accumulated in ascending entry order.
fn softmax_stats(data: &[f64], entries: &[u32]) -> (f64, f64) {
    let max = entries
        .iter()
        .map(|&p| data[p as usize])
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = entries.iter().map(|&p| (data[p as usize] - max).exp()).sum();
    (max, total)
}

fn check_entries(entries: &Tensor, idx: &SegmentIndex) {
    assert_eq!(
        entries.rows(),
        idx.len(),
        "entry count {} does not match index length {}",
        entries.rows(),
        idx.len()
    );
}

fn check_scores(scores: &Tensor, idx: &SegmentIndex) {
    check_entries(scores, idx);
    assert_eq!(scores.cols(), 1, "segment softmax expects an E x 1 tensor");
}
