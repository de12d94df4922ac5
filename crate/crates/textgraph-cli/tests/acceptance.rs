//! Acceptance suite, CLI-level criteria (8, 9, 11). Criteria 1 through 7
//! and 10 live in the library crate's acceptance suite.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use textgraph::synth::{separable_corpus, write_fixture_files, SynthConfig};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance {criterion} failed: {detail}");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_textgraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn build_fixture_graph(dir: &Path) -> PathBuf {
    let config = SynthConfig::default();
    let data = separable_corpus(&config);
    let paths = write_fixture_files(&data, dir).unwrap();
    let graph = dir.join("graph.bin");
    let output = run(&[
        "build-graph",
        "--corpus",
        paths.corpus.to_str().unwrap(),
        "--word-vectors",
        paths.word_vectors.to_str().unwrap(),
        "--sent-embeddings",
        paths.sentence_embeddings.to_str().unwrap(),
        "--out",
        graph.to_str().unwrap(),
        "--min-count",
        "15",
        "--window",
        "20",
        "--knn",
        "3",
        "--splits",
        "0.8,0.1,0.1",
        "--seed",
        "42",
    ]);
    assert_success(&output);
    graph
}

#[test]
fn criterion_08_ablation_harness() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_fixture_graph(dir.path());
    let csv_path = dir.path().join("ablation.csv");
    let output = run(&[
        "ablate",
        "--graph",
        graph.to_str().unwrap(),
        "--model",
        "sage",
        "--lr",
        "0.01",
        "--wd",
        "0.0005",
        "--epochs",
        "120",
        "--hidden",
        "16",
        "--seed",
        "7",
        "--out-csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_success(&output);

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4, "expected exactly four variants");
    let variants: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(variants, ["all", "no-word-word", "no-word", "no-doc-doc"]);

    // structural deltas per variant contract
    let col = |row: &[&str], idx: usize| -> usize { row[idx].parse().unwrap() };
    let all = &rows[0];
    let (user_doc, doc_doc, doc_word, word_word) =
        (col(all, 4), col(all, 5), col(all, 6), col(all, 7));
    assert!(doc_doc > 0 && doc_word > 0 && word_word > 0);
    // no-word-word: only the word-word edges vanish
    assert_eq!(col(&rows[1], 7), 0);
    assert_eq!(col(&rows[1], 4), user_doc);
    assert_eq!(col(&rows[1], 5), doc_doc);
    assert_eq!(col(&rows[1], 6), doc_word);
    // no-word: word nodes and every word edge vanish
    assert_eq!(col(&rows[2], 3), 0);
    assert_eq!(col(&rows[2], 6), 0);
    assert_eq!(col(&rows[2], 7), 0);
    assert_eq!(col(&rows[2], 4), user_doc);
    // no-doc-doc: only the doc-doc edges vanish
    assert_eq!(col(&rows[3], 5), 0);
    assert_eq!(col(&rows[3], 4), user_doc);
    assert_eq!(col(&rows[3], 6), doc_word);
    assert_eq!(col(&rows[3], 7), word_word);

    // soft check: the full graph should not trail any reduced variant by
    // more than 0.05 test accuracy; logged, not failed
    let acc = |row: &[&str]| -> f64 { row[9].parse().unwrap() };
    let all_acc = acc(&rows[0]);
    let mut soft_detail = format!("all {all_acc:.3}");
    for row in &rows[1..] {
        let variant_acc = acc(row);
        soft_detail.push_str(&format!(", {} {variant_acc:.3}", row[0]));
        if all_acc < variant_acc - 0.05 {
            println!(
                "acceptance 8 soft check: all ({all_acc:.3}) trails {} ({variant_acc:.3})",
                row[0]
            );
        }
    }
    report("8 (ablation harness)", true, &soft_detail);
}

#[test]
fn criterion_09_pipeline_determinism() {
    let run_pipeline = |dir: &Path| -> (Vec<u8>, Vec<u8>, Vec<u8>, String) {
        let graph = build_fixture_graph(dir);
        let ckpt = dir.join("model.ckpt");
        let history = dir.join("history.csv");
        let output = run(&[
            "train",
            "--graph",
            graph.to_str().unwrap(),
            "--model",
            "transformer",
            "--lr",
            "0.01",
            "--wd",
            "0.0005",
            "--epochs",
            "40",
            "--hidden",
            "16",
            "--seed",
            "42",
            "--out",
            ckpt.to_str().unwrap(),
            "--history",
            history.to_str().unwrap(),
        ]);
        assert_success(&output);
        let eval = run(&[
            "evaluate",
            "--graph",
            graph.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--split",
            "test",
        ]);
        assert_success(&eval);
        (
            std::fs::read(&graph).unwrap(),
            std::fs::read(&history).unwrap(),
            std::fs::read(&ckpt).unwrap(),
            String::from_utf8_lossy(&eval.stdout)
                .lines()
                .last()
                .unwrap()
                .to_string(),
        )
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let (graph_a, history_a, ckpt_a, metrics_a) = run_pipeline(dir_a.path());
    let (graph_b, history_b, ckpt_b, metrics_b) = run_pipeline(dir_b.path());

    let pass = graph_a == graph_b
        && history_a == history_b
        && ckpt_a == ckpt_b
        && metrics_a == metrics_b;
    report(
        "9 (determinism)",
        pass,
        &format!(
            "graph bytes equal: {}, history bytes equal: {}, checkpoint bytes equal: {}, metrics equal: {}",
            graph_a == graph_b,
            history_a == history_b,
            ckpt_a == ckpt_b,
            metrics_a == metrics_b
        ),
    );
}

/// Full reproduction against the real datasets, gated on user-supplied
/// files (see the README): set `TEXTGRAPH_PAN_DIR`,
/// `TEXTGRAPH_WORD_VECTORS`, and `TEXTGRAPH_SENT_EMBEDDINGS`, then run
/// with `--ignored`. The published recipe is GraphSAGE at lr 0.01, weight
/// decay 0.0005, 50 epochs; the 0.80 +/- 0.10 accuracy target is reported
/// but non-gating because split randomization and embedding provenance
/// differ.
#[test]
#[ignore = "needs externally supplied corpus and embedding files"]
fn criterion_11_conditional_full_reproduction() {
    let Ok(pan_dir) = std::env::var("TEXTGRAPH_PAN_DIR") else {
        report("11 (conditional full reproduction)", true, "SKIP: TEXTGRAPH_PAN_DIR unset");
        return;
    };
    let words = std::env::var("TEXTGRAPH_WORD_VECTORS")
        .expect("TEXTGRAPH_WORD_VECTORS must point at a word-vector file");
    let sents = std::env::var("TEXTGRAPH_SENT_EMBEDDINGS")
        .expect("TEXTGRAPH_SENT_EMBEDDINGS must point at a sentence-embedding file");

    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.bin");
    let output = run(&[
        "build-graph",
        "--corpus",
        &pan_dir,
        "--format",
        "pan",
        "--word-vectors",
        &words,
        "--sent-embeddings",
        &sents,
        "--out",
        graph.to_str().unwrap(),
        "--min-count",
        "15",
        "--window",
        "20",
        "--knn",
        "3",
        "--splits",
        "0.8,0.1,0.1",
        "--seed",
        "42",
    ]);
    assert_success(&output);
    println!("{}", String::from_utf8_lossy(&output.stdout));

    let ckpt = dir.path().join("model.ckpt");
    let output = run(&[
        "train",
        "--graph",
        graph.to_str().unwrap(),
        "--model",
        "sage",
        "--lr",
        "0.01",
        "--wd",
        "0.0005",
        "--epochs",
        "50",
        "--hidden",
        "64",
        "--seed",
        "42",
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert_success(&output);

    let eval = run(&[
        "evaluate",
        "--graph",
        graph.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--split",
        "test",
    ]);
    assert_success(&eval);
    let stdout = String::from_utf8_lossy(&eval.stdout);
    println!("{stdout}");
    let accuracy: f64 = stdout
        .lines()
        .last()
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
        .expect("accuracy in evaluate output");
    let within_target = (accuracy - 0.80).abs() <= 0.10;
    // the run completing is the gate; the accuracy band is informational
    report(
        "11 (conditional full reproduction)",
        true,
        &format!("test accuracy {accuracy:.3}, within 0.80 +/- 0.10: {within_target}"),
    );
}
