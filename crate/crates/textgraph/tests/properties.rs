//! Property tests for the corpus, statistics, embedding pooling, segment
//! reductions, and ablation invariants.

mod common;

use proptest::prelude::*;

use textgraph::corpus::{self, Author, Corpus, Document, Split};
use textgraph::embeddings::pool_user_embedding;
use textgraph::hetgraph::{apply_variant, GraphVariant};
use textgraph::numerics::{segment, SegmentIndex, Tensor};
use textgraph::synth::{separable_graph, SynthConfig};
use textgraph::textstats::{build_vocabulary, compute_pmi, TokenizedDoc};

fn arb_corpus() -> impl Strategy<Value = Corpus> {
    // between 2 and 6 authors per class, 1 to 6 docs each, small texts
    (2usize..6, 1usize..6).prop_flat_map(|(per_class, docs)| {
        let words = prop::collection::vec(
            prop::collection::vec(0u8..8, 1..12),
            2 * per_class * docs,
        );
        words.prop_map(move |token_lists| {
            let mut authors = Vec::new();
            let mut list_iter = token_lists.into_iter();
            for class in [0u8, 1] {
                for a in 0..per_class {
                    let author_id = format!("c{class}a{a}");
                    let documents = (0..docs)
                        .map(|d| {
                            let tokens: Vec<String> = list_iter
                                .next()
                                .unwrap()
                                .into_iter()
                                .map(|w| format!("w{w}"))
                                .collect();
                            Document {
                                doc_id: format!("{author_id}#{d}"),
                                author_id: author_id.clone(),
                                text: tokens.join(" "),
                            }
                        })
                        .collect();
                    authors.push(Author {
                        author_id,
                        label: class,
                        documents,
                    });
                }
            }
            Corpus {
                authors,
                class_names: ["0".into(), "1".into()],
            }
        })
    })
}

fn arb_docs() -> impl Strategy<Value = Vec<TokenizedDoc>> {
    prop::collection::vec(prop::collection::vec(0u8..10, 0..20), 1..15).prop_map(|lists| {
        lists
            .into_iter()
            .enumerate()
            .map(|(i, tokens)| TokenizedDoc {
                doc_id: format!("d{i}"),
                tokens: tokens.into_iter().map(|w| format!("w{w}")).collect(),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_is_total_disjoint_and_deterministic(corpus in arb_corpus(), seed in 0u64..1000) {
        let a = corpus::split_corpus(&corpus, (0.8, 0.1, 0.1), seed).unwrap();
        let b = corpus::split_corpus(&corpus, (0.8, 0.1, 0.1), seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), corpus.n_authors());
        // every author assigned exactly once
        for author in &corpus.authors {
            prop_assert!(a.get(&author.author_id).is_some());
        }
        prop_assert_eq!(
            a.count(Split::Train) + a.count(Split::Val) + a.count(Split::Test),
            corpus.n_authors()
        );
    }

    #[test]
    fn split_stratification_within_one_author(corpus in arb_corpus(), seed in 0u64..1000) {
        let assignment = corpus::split_corpus(&corpus, (0.8, 0.1, 0.1), seed).unwrap();
        for class in [0u8, 1] {
            let class_ids: Vec<&str> = corpus
                .authors
                .iter()
                .filter(|a| a.label == class)
                .map(|a| a.author_id.as_str())
                .collect();
            let n = class_ids.len() as f64;
            for (split, fraction) in [
                (Split::Train, 0.8),
                (Split::Val, 0.1),
                (Split::Test, 0.1),
            ] {
                let count = class_ids
                    .iter()
                    .filter(|id| assignment.get(id) == Some(split))
                    .count() as f64;
                prop_assert!(
                    (count - fraction * n).abs() < 1.0,
                    "class {} split {:?}: {} of {}",
                    class,
                    split,
                    count,
                    n
                );
            }
        }
    }

    #[test]
    fn filter_is_idempotent(corpus in arb_corpus()) {
        let once = corpus::filter_by_activity(&corpus, 1, 10, 1, 50);
        if let Ok(once) = once {
            let twice = corpus::filter_by_activity(&once, 1, 10, 1, 50).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn vocabulary_monotone_in_min_count(docs in arb_docs(), min_count in 1u32..5) {
        let low = build_vocabulary(&docs, min_count).unwrap();
        let high = build_vocabulary(&docs, min_count + 1).unwrap();
        for word in high.words() {
            prop_assert!(
                low.id_of(word).is_some(),
                "word {} appeared only at the higher threshold",
                word
            );
        }
        prop_assert!(high.len() <= low.len());
    }

    #[test]
    fn pmi_pairs_canonical_and_unique(docs in arb_docs(), window in 2usize..8) {
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let edges = compute_pmi(&docs, &vocab, window).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &(a, b, w) in &edges {
            prop_assert!(a < b, "pair ({a}, {b}) not canonical");
            prop_assert!(w > 0.0);
            prop_assert!(seen.insert((a, b)), "duplicate pair ({a}, {b})");
        }
    }

    #[test]
    fn pmi_matches_oracle(docs in arb_docs(), window in 2usize..8) {
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let edges = compute_pmi(&docs, &vocab, window).unwrap();
        let expected = common::pmi_oracle(&docs, &vocab, window);
        prop_assert_eq!(edges.len(), expected.len());
        for (got, want) in edges.iter().zip(&expected) {
            prop_assert_eq!((got.0, got.1), (want.0, want.1));
            prop_assert!((got.2 - want.2).abs() < 1e-9);
        }
    }

    #[test]
    fn pooling_permutation_invariant(
        vectors in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..20),
        rotation in 0usize..20,
    ) {
        let slices: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
        let base = pool_user_embedding(slices.iter().copied()).unwrap();
        let mut rotated = slices.clone();
        rotated.rotate_left(rotation % slices.len());
        let permuted = pool_user_embedding(rotated).unwrap();
        for (a, b) in base.iter().zip(&permuted) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_softmax_rows_sum_to_one(
        seg_of in prop::collection::vec(0u32..6, 1..40),
        scale in 0.1f64..5.0,
    ) {
        let idx = SegmentIndex::new(seg_of.clone(), 6);
        let scores = Tensor::from_fn(seg_of.len(), 1, |i, _| ((i * 13) as f64).sin() * scale);
        let alpha = segment::segment_softmax(&scores, &idx);
        for s in 0..6 {
            let entries = idx.entries_of(s);
            if entries.is_empty() {
                continue;
            }
            let total: f64 = entries.iter().map(|&p| alpha.at(p as usize, 0)).sum();
            prop_assert!((total - 1.0).abs() < 1e-9, "segment {s} sums to {total}");
        }
    }

    #[test]
    fn segment_mean_is_sum_over_degree(
        seg_of in prop::collection::vec(0u32..5, 1..30),
    ) {
        let idx = SegmentIndex::new(seg_of.clone(), 5);
        let entries = Tensor::from_fn(seg_of.len(), 3, |i, j| ((i * 7 + j) as f64).cos());
        let sum = segment::segment_sum(&entries, &idx);
        let mean = segment::segment_mean(&entries, &idx);
        for s in 0..5 {
            let deg = idx.degree(s);
            for j in 0..3 {
                if deg > 0 {
                    prop_assert!((mean.at(s, j) - sum.at(s, j) / deg as f64).abs() < 1e-12);
                } else {
                    prop_assert_eq!(mean.at(s, j), 0.0);
                }
            }
        }
    }
}

#[test]
fn variants_idempotent_and_edge_endpoints_valid() {
    let graph = separable_graph(&SynthConfig::small());
    for variant in GraphVariant::ALL {
        let once = apply_variant(&graph, variant);
        once.validate().unwrap();
        assert_eq!(apply_variant(&once, variant), once);
    }
}
