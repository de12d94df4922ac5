//! Command-line pipeline: build the heterogeneous text graph from a
//! corpus plus embedding files, train a node classifier, run the ablation
//! and hyperparameter-grid protocols, and evaluate checkpoints.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

mod manifest;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use textgraph::corpus::{self, Corpus, LabelTable, Split};
use textgraph::embeddings;
use textgraph::gnn::{self, ConvKind, NodeClassifier};
use textgraph::hetgraph::{self, GraphBuildConfig, GraphVariant};
use textgraph::textstats;
use textgraph::train::{self, GridSpec, Metrics, TrainConfig};

use manifest::ManifestBuilder;
use settings::{resolve, Settings};

#[derive(Parser)]
#[command(
    name = "textgraph",
    version,
    about = "Heterogeneous text graphs and GNN node classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph file from a corpus and embedding files
    BuildGraph(BuildGraphArgs),
    /// Train a classifier on a graph file
    Train(TrainArgs),
    /// Train one model per graph variant and tabulate accuracies
    Ablate(AblateArgs),
    /// Hyperparameter grid search on the validation split
    Grid(GridArgs),
    /// Evaluate a checkpoint on one split
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CorpusFormat {
    Pan,
    Jsonl,
}

fn parse_model(s: &str) -> Result<ConvKind, String> {
    s.parse()
}

fn parse_variant(s: &str) -> Result<GraphVariant, String> {
    s.parse()
}

fn parse_split_name(s: &str) -> Result<Split, String> {
    s.parse()
}

fn parse_fractions(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated fractions, got {s:?}"));
    }
    let mut values = [0.0f64; 3];
    for (v, p) in values.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|e| format!("bad fraction {p:?}: {e}"))?;
    }
    Ok((values[0], values[1], values[2]))
}

/// `LABEL:CLASS` pairs, e.g. `I:1,NI:0`.
fn parse_label_table(s: &str) -> Result<LabelTable, String> {
    let mut pairs = Vec::new();
    for part in s.split(',') {
        let Some((name, class)) = part.rsplit_once(':') else {
            return Err(format!("expected LABEL:CLASS, got {part:?}"));
        };
        let class: u8 = class
            .trim()
            .parse()
            .map_err(|e| format!("bad class in {part:?}: {e}"))?;
        if class > 1 {
            return Err(format!("class must be 0 or 1 in {part:?}"));
        }
        pairs.push((name.trim().to_string(), class));
    }
    let borrowed: Vec<(&str, u8)> = pairs.iter().map(|(s, c)| (s.as_str(), *c)).collect();
    Ok(LabelTable::new(&borrowed))
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Corpus path: a directory (pan) or a .jsonl file (jsonl)
    #[arg(long)]
    corpus: PathBuf,
    /// Corpus layout
    #[arg(long, value_enum, default_value = "jsonl")]
    format: CorpusFormat,
    /// Word vector text file (token followed by numbers, one per line)
    #[arg(long)]
    word_vectors: PathBuf,
    /// Sentence embedding JSON Lines file
    #[arg(long)]
    sent_embeddings: PathBuf,
    /// Output graph file
    #[arg(long)]
    out: PathBuf,
    /// Minimum corpus frequency for vocabulary words
    #[arg(long)]
    min_count: Option<u32>,
    /// Co-occurrence window width
    #[arg(long)]
    window: Option<usize>,
    /// Neighbors per document for doc-doc edges
    #[arg(long)]
    knn: Option<usize>,
    /// Train,val,test fractions
    #[arg(long, value_parser = parse_fractions)]
    splits: Option<(f64, f64, f64)>,
    #[arg(long)]
    seed: Option<u64>,
    /// Label string mapping, e.g. "I:1,NI:0" (pan format)
    #[arg(long, value_parser = parse_label_table)]
    labels: Option<LabelTable>,
    /// Keep only authors with at least this many documents
    #[arg(long)]
    min_docs: Option<usize>,
    /// Keep only authors with at most this many documents
    #[arg(long)]
    max_docs: Option<usize>,
    /// Keep only documents with at least this many tokens
    #[arg(long)]
    min_len: Option<usize>,
    /// Keep only documents with at most this many tokens
    #[arg(long)]
    max_len: Option<usize>,
    /// Flat key = value config file (flags take precedence)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ConvKind,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<GraphVariant>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output checkpoint file
    #[arg(long)]
    out: PathBuf,
    /// History CSV path (defaults to the checkpoint path with .history.csv)
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ConvKind,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the four-row result table as CSV
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ConvKind,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<GraphVariant>,
    /// Learning-rate axis, comma separated
    #[arg(long, value_delimiter = ',')]
    lrs: Option<Vec<f64>>,
    /// Weight-decay axis, comma separated
    #[arg(long, value_delimiter = ',')]
    wds: Option<Vec<f64>>,
    /// Epoch-count axis, comma separated
    #[arg(long, value_delimiter = ',')]
    epoch_grid: Option<Vec<usize>>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the full per-cell report as CSV
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_parser = parse_split_name, default_value = "test")]
    split: Split,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildGraph(args) => cmd_build_graph(args),
        Command::Train(args) => cmd_train(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_corpus(path: &Path, format: CorpusFormat, labels: &LabelTable) -> Result<Corpus> {
    let corpus = match format {
        CorpusFormat::Pan => corpus::load_pan_corpus(path, labels)?,
        CorpusFormat::Jsonl => corpus::load_jsonl_corpus(path)?,
    };
    Ok(corpus)
}

fn cmd_build_graph(args: BuildGraphArgs) -> Result<()> {
    let settings = Settings::load(args.config.as_deref())?;
    let min_count = resolve(args.min_count, settings.u64("min_count")?.map(|v| v as u32), 15);
    let window = resolve(args.window, settings.usize("window")?, 20);
    let knn = resolve(args.knn, settings.usize("knn")?, 3);
    let seed = resolve(args.seed, settings.u64("seed")?, 42);
    let splits = resolve(
        args.splits,
        settings
            .string("splits")?
            .map(|s| parse_fractions(&s))
            .transpose()
            .map_err(anyhow::Error::msg)?,
        (0.8, 0.1, 0.1),
    );
    let labels = match (args.labels, settings.string("labels")?) {
        (Some(table), _) => table,
        (None, Some(s)) => parse_label_table(&s).map_err(anyhow::Error::msg)?,
        (None, None) => LabelTable::default(),
    };
    let min_docs = resolve(args.min_docs, settings.usize("min_docs")?, 0);
    let max_docs = resolve(args.max_docs, settings.usize("max_docs")?, usize::MAX);
    let min_len = resolve(args.min_len, settings.usize("min_len")?, 0);
    let max_len = resolve(args.max_len, settings.usize("max_len")?, usize::MAX);
    let filtering = args.min_docs.is_some()
        || args.max_docs.is_some()
        || args.min_len.is_some()
        || args.max_len.is_some()
        || settings.usize("min_docs")?.is_some()
        || settings.usize("max_docs")?.is_some()
        || settings.usize("min_len")?.is_some()
        || settings.usize("max_len")?.is_some();

    let mut builder = ManifestBuilder::new(
        "build-graph",
        serde_json::json!({
            "corpus": args.corpus.display().to_string(),
            "format": format!("{:?}", args.format).to_lowercase(),
            "word_vectors": args.word_vectors.display().to_string(),
            "sent_embeddings": args.sent_embeddings.display().to_string(),
            "min_count": min_count,
            "window": window,
            "knn": knn,
            "splits": [splits.0, splits.1, splits.2],
            "seed": seed,
            "filter": filtering.then(|| serde_json::json!({
                "min_docs": min_docs,
                "max_docs": max_docs,
                "min_len": min_len,
                "max_len": max_len,
            })),
        }),
        seed,
    );
    match args.format {
        CorpusFormat::Pan => builder.input_dir(&args.corpus)?,
        CorpusFormat::Jsonl => builder.input_file(&args.corpus)?,
    }
    builder.input_file(&args.word_vectors)?;
    builder.input_file(&args.sent_embeddings)?;

    let mut corpus = load_corpus(&args.corpus, args.format, &labels)?;
    println!(
        "loaded corpus: {} authors, {} documents",
        corpus.n_authors(),
        corpus.n_docs()
    );
    if filtering {
        corpus = corpus::filter_by_activity(&corpus, min_docs, max_docs, min_len, max_len)?;
        println!(
            "after activity filter: {} authors, {} documents",
            corpus.n_authors(),
            corpus.n_docs()
        );
    }

    let tokenized = textstats::tokenize_corpus(&corpus);
    let vocab = textstats::build_vocabulary(&tokenized, min_count)?;
    println!("vocabulary: {} words (min count {min_count})", vocab.len());
    let stats = textstats::count_cooccurrence(&tokenized, &vocab, window)?;

    let words = embeddings::load_word_vectors(&args.word_vectors)?;
    let sents = embeddings::load_sentence_embeddings(&args.sent_embeddings)?;
    let split = corpus::split_corpus(&corpus, splits, seed)?;

    let graph = hetgraph::build_graph(
        &corpus,
        &tokenized,
        &vocab,
        &stats,
        &words,
        &sents,
        &split,
        &GraphBuildConfig {
            knn_k: knn,
            min_count,
            window,
            seed,
        },
    )?;
    hetgraph::io::serialize_graph(&graph, &args.out)?;
    builder.output(&args.out);
    builder.write(&args.out)?;

    println!("graph written to {}", args.out.display());
    println!("{}", graph.summary());
    Ok(())
}

fn print_metrics(name: &str, metrics: &Result<Metrics, train::TrainError>) {
    match metrics {
        Ok(m) => println!(
            "{name}: accuracy {:.4}  f1 {:.4}  loss {:.6}",
            m.accuracy, m.f1, m.loss
        ),
        Err(train::TrainError::EmptyMask(_)) => println!("{name}: (empty split)"),
        Err(e) => println!("{name}: error: {e}"),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let settings = Settings::load(args.config.as_deref())?;
    let config = TrainConfig {
        kind: args.model,
        variant: resolve(
            args.variant,
            settings
                .string("variant")?
                .map(|s| parse_variant(&s))
                .transpose()
                .map_err(anyhow::Error::msg)?,
            GraphVariant::All,
        ),
        learning_rate: resolve(args.lr, settings.f64("lr")?, 0.01),
        weight_decay: resolve(args.wd, settings.f64("wd")?, 0.0005),
        epochs: resolve(args.epochs, settings.usize("epochs")?, 50),
        seed: resolve(args.seed, settings.u64("seed")?, 42),
        hidden_dim: resolve(args.hidden, settings.usize("hidden")?, 64),
    };
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| args.out.with_extension("history.csv"));

    let mut builder = ManifestBuilder::new(
        "train",
        serde_json::to_value(config).expect("serializable config"),
        config.seed,
    );
    builder.input_file(&args.graph)?;

    let graph = hetgraph::io::deserialize_graph(&args.graph)?;
    let (model, history) = train::train(&graph, &config)?;

    gnn::save_checkpoint(&model, &args.out)?;
    std::fs::write(&history_path, history.to_csv())
        .with_context(|| format!("writing {}", history_path.display()))?;
    builder.output(&args.out);
    builder.output(&history_path);
    builder.write(&args.out)?;

    let last = history.epochs.last().expect("at least one epoch");
    println!(
        "trained {} ({} epochs): final train loss {:.6}, train accuracy {:.4}",
        config.kind, config.epochs, last.train_loss, last.train_accuracy
    );
    print_metrics("val", &train::evaluate(&model, &graph, Split::Val));
    print_metrics("test", &train::evaluate(&model, &graph, Split::Test));
    println!("checkpoint written to {}", args.out.display());
    println!("history written to {}", history_path.display());
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let settings = Settings::load(args.config.as_deref())?;
    let config = TrainConfig {
        kind: args.model,
        variant: GraphVariant::All,
        learning_rate: resolve(args.lr, settings.f64("lr")?, 0.01),
        weight_decay: resolve(args.wd, settings.f64("wd")?, 0.0005),
        epochs: resolve(args.epochs, settings.usize("epochs")?, 50),
        seed: resolve(args.seed, settings.u64("seed")?, 42),
        hidden_dim: resolve(args.hidden, settings.usize("hidden")?, 64),
    };

    let graph = hetgraph::io::deserialize_graph(&args.graph)?;
    let rows = train::run_ablation(&graph, &config)?;

    println!(
        "ablation for {} (lr {}, wd {}, {} epochs, seed {})",
        config.kind, config.learning_rate, config.weight_decay, config.epochs, config.seed
    );
    println!(
        "{:<14} {:>12} {:>12} {:>10} {:>10}",
        "variant", "nodes", "edges", "val_acc", "test_acc"
    );
    for row in &rows {
        println!(
            "{:<14} {:>12} {:>12} {:>10.4} {:>10.4}",
            row.variant.as_str(),
            row.summary.total_nodes(),
            row.summary.total_edges(),
            row.val.accuracy,
            row.test.accuracy
        );
    }

    if let Some(csv_path) = &args.out_csv {
        let mut csv = String::from(
            "variant,user_nodes,doc_nodes,word_nodes,user_doc_edges,doc_doc_edges,doc_word_edges,word_word_edges,val_accuracy,test_accuracy\n",
        );
        for row in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.variant.as_str(),
                row.summary.user_nodes,
                row.summary.doc_nodes,
                row.summary.word_nodes,
                row.summary.user_doc_edges,
                row.summary.doc_doc_edges,
                row.summary.doc_word_edges,
                row.summary.word_word_edges,
                row.val.accuracy,
                row.test.accuracy
            ));
        }
        std::fs::write(csv_path, csv)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        let mut builder = ManifestBuilder::new(
            "ablate",
            serde_json::to_value(config).expect("serializable config"),
            config.seed,
        );
        builder.input_file(&args.graph)?;
        builder.output(csv_path);
        builder.write(csv_path)?;
        println!("table written to {}", csv_path.display());
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let settings = Settings::load(args.config.as_deref())?;
    let variant = resolve(
        args.variant,
        settings
            .string("variant")?
            .map(|s| parse_variant(&s))
            .transpose()
            .map_err(anyhow::Error::msg)?,
        GraphVariant::All,
    );
    let hidden = resolve(args.hidden, settings.usize("hidden")?, 64);
    let seed = resolve(args.seed, settings.u64("seed")?, 42);
    let defaults = GridSpec::default();
    let spec = GridSpec {
        learning_rates: args.lrs.unwrap_or(defaults.learning_rates),
        weight_decays: args.wds.unwrap_or(defaults.weight_decays),
        epoch_counts: args.epoch_grid.unwrap_or(defaults.epoch_counts),
    };

    let graph = hetgraph::io::deserialize_graph(&args.graph)?;
    println!(
        "grid search for {} over {} cells ({} x {} x {})",
        args.model,
        spec.len(),
        spec.learning_rates.len(),
        spec.weight_decays.len(),
        spec.epoch_counts.len()
    );
    let report = train::grid_search(&graph, args.model, variant, hidden, seed, &spec)?;

    let failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        println!("{failed} cells failed; see the CSV report");
    }
    println!("best configuration by validation accuracy:");
    println!(
        "{:<16} {:>14} {:>14} {:>8}",
        "", "Learning Rate", "Weight Decay", "Epochs"
    );
    println!(
        "{:<16} {:>14} {:>14} {:>8}",
        args.model.to_string(),
        report.best.learning_rate,
        report.best.weight_decay,
        report.best.epochs
    );

    if let Some(csv_path) = &args.out_csv {
        std::fs::write(csv_path, report.to_csv())
            .with_context(|| format!("writing {}", csv_path.display()))?;
        let mut builder = ManifestBuilder::new(
            "grid",
            serde_json::to_value(report.best).expect("serializable config"),
            seed,
        );
        builder.input_file(&args.graph)?;
        builder.output(csv_path);
        builder.write(csv_path)?;
        println!("report written to {}", csv_path.display());
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let graph = hetgraph::io::deserialize_graph(&args.graph)?;
    let model: NodeClassifier = gnn::load_checkpoint(&args.checkpoint)?;
    let metrics = train::evaluate(&model, &graph, args.split)?;
    println!(
        "{} ({}, {} variant) on {}:",
        args.checkpoint.display(),
        model.kind,
        model.variant,
        args.split.as_str()
    );
    println!(
        "accuracy {:.4}  f1 {:.4}  loss {:.6}",
        metrics.accuracy, metrics.f1, metrics.loss
    );
    Ok(())
}
