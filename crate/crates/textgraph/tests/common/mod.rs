//! Shared helpers for the integration tests: a central finite-difference
//! gradient checker and independent brute-force oracles. Everything here
//! is deliberately naive and never calls the code paths it is used to
//! verify.

// each test binary uses a different subset
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use textgraph::numerics::{Tape, Tensor, Var};
use textgraph::textstats::{TokenizedDoc, Vocabulary};

/// Relative error with an absolute floor so near-zero pairs compare
/// absolutely.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Checks the tape gradient of a scalar-valued build function against
/// central finite differences over every element of every leaf. Returns
/// the maximum relative error.
pub fn finite_diff_check(
    leaves: &[Tensor],
    epsilon: f64,
    floor: f64,
    mut build: impl FnMut(&mut Tape, &[Var]) -> Var,
) -> f64 {
    // analytic gradients
    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &vars);
    assert_eq!(tape.value(loss).shape(), (1, 1), "loss must be scalar");
    let grads = tape.backward(loss);

    let eval = |tensors: &[Tensor], build: &mut dyn FnMut(&mut Tape, &[Var]) -> Var| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.value(loss).at(0, 0)
    };

    let mut max_rel: f64 = 0.0;
    for (li, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get(vars[li]);
        for idx in 0..leaf.len() {
            let mut plus = leaves.to_vec();
            plus[li].data_mut()[idx] += epsilon;
            let mut minus = leaves.to_vec();
            minus[li].data_mut()[idx] -= epsilon;
            let fd = (eval(&plus, &mut build) - eval(&minus, &mut build)) / (2.0 * epsilon);
            let an = analytic.map_or(0.0, |g| g.data()[idx]);
            max_rel = max_rel.max(rel_err(fd, an, floor));
        }
    }
    max_rel
}

/// Deterministic pseudo-random tensor for fixtures, kept away from zero so
/// ReLU-style kinks are not straddled by the finite-difference step.
pub fn fixture_tensor(rows: usize, cols: usize, salt: u64) -> Tensor {
    Tensor::from_fn(rows, cols, |i, j| {
        let x = (((i * 37 + j * 11) as f64 + salt as f64 * 0.73) * 0.917).sin();
        // push magnitudes into [0.1, 1.1]
        x.signum() * (0.1 + x.abs())
    })
}

/// Brute-force PMI: enumerates every window, counts presence with naive
/// sets, and filters strictly positive scores. Mirrors only the window
/// definition (full spans slid by one; short documents give one window;
/// empty documents give none).
pub fn pmi_oracle(docs: &[TokenizedDoc], vocab: &Vocabulary, window: usize) -> Vec<(u32, u32, f64)> {
    let mut window_count = 0u64;
    let mut singles: HashMap<u32, u64> = HashMap::new();
    let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
    for doc in docs {
        let ids: Vec<Option<u32>> = doc.tokens.iter().map(|t| vocab.id_of(t)).collect();
        if ids.is_empty() {
            continue;
        }
        let n_windows = if ids.len() <= window {
            1
        } else {
            ids.len() - window + 1
        };
        for start in 0..n_windows {
            window_count += 1;
            let end = (start + window).min(ids.len());
            let present: HashSet<u32> = ids[start..end].iter().flatten().copied().collect();
            let mut sorted: Vec<u32> = present.into_iter().collect();
            sorted.sort_unstable();
            for (i, &a) in sorted.iter().enumerate() {
                *singles.entry(a).or_insert(0) += 1;
                for &b in &sorted[i + 1..] {
                    *pairs.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }
    let w = window_count as f64;
    let mut edges: Vec<(u32, u32, f64)> = pairs
        .into_iter()
        .filter_map(|((a, b), count)| {
            // positivity decided exactly: pmi > 0 iff pair * W > s_a * s_b
            let positive =
                (count as u128) * (window_count as u128) > (singles[&a] as u128) * (singles[&b] as u128);
            let pa = singles[&a] as f64 / w;
            let pb = singles[&b] as f64 / w;
            let pab = count as f64 / w;
            let pmi = (pab / (pa * pb)).ln();
            positive.then_some((a, b, pmi))
        })
        .collect();
    edges.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    edges
}

/// Brute-force TF-IDF for one document: raw counts and `ln(n/df)` straight
/// from the definitions.
pub fn tfidf_oracle(doc: &TokenizedDoc, vocab: &Vocabulary, n_docs: usize) -> Vec<(u32, f64)> {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for token in &doc.tokens {
        if let Some(id) = vocab.id_of(token) {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(u32, f64)> = counts
        .into_iter()
        .filter_map(|(id, tf)| {
            let weight = tf as f64 * (n_docs as f64 / vocab.doc_freq(id) as f64).ln();
            (weight > 0.0).then_some((id, weight))
        })
        .collect();
    out.sort_unstable_by_key(|&(id, _)| id);
    out
}

/// Exhaustive all-pairs cosine top-k selection with the lower-index
/// tie-break, returned as `(src, dst, cosine)` triples in row order.
pub fn knn_oracle(matrix: &Tensor, k: usize) -> Vec<(u32, u32, f64)> {
    let norms: Vec<f64> = (0..matrix.rows())
        .map(|i| matrix.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut edges = Vec::new();
    for i in 0..matrix.rows() {
        let mut sims: Vec<(u32, f64)> = (0..matrix.rows())
            .filter(|&j| j != i)
            .map(|j| {
                let dot: f64 = matrix
                    .row(i)
                    .iter()
                    .zip(matrix.row(j))
                    .map(|(&a, &b)| a * b)
                    .sum();
                (j as u32, dot / (norms[i] * norms[j]))
            })
            .collect();
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(j, sim) in &sims[..k.min(sims.len())] {
            edges.push((i as u32, j, sim));
        }
    }
    edges
}
