//! AdamW optimization, binary cross-entropy training, evaluation metrics,
//! hyperparameter grid search, and the ablation runner.
//!
//! Training is transductive and full-graph: every split's nodes are in the
//! graph, masks only gate the loss. One epoch is one forward pass, one
//! masked BCE, one reverse sweep, one AdamW step. Everything is
//! deterministic for a fixed `(graph, config)`.

use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::corpus::Split;
use crate::gnn::{ConvKind, GnnError, GraphLayout, NodeClassifier};
use crate::hetgraph::{apply_variant, GraphSummary, GraphVariant, HeteroGraph};
use crate::numerics::{tape, BceTargets, Tape, Tensor};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("the {} split selects no users", .0.as_str())]
    EmptyMask(Split),
    #[error("the training mask must contain both classes")]
    MissingClassInTrain,
    #[error("non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("grid search needs a non-empty grid")]
    EmptyGrid,
    #[error("every grid cell failed; first error: {0}")]
    AllCellsFailed(String),
}

/// Everything that determines one training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ConvKind,
    pub variant: GraphVariant,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden_dim: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(TrainError::InvalidConfig("hidden_dim must be at least 1".into()));
        }
        Ok(())
    }
}

/// Loss and accuracies recorded once per epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

/// One row per trained epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_accuracy,val_accuracy\n");
        for row in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.epoch, row.train_loss, row.train_accuracy, row.val_accuracy
            ));
        }
        out
    }
}

/// Accuracy, positive-class F1, and mean loss over one split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub loss: f64,
}

/// Numerically stable masked binary cross-entropy:
/// mean over masked rows of `softplus(z) - y * z`.
pub fn bce_with_logits(logits: &Tensor, labels: &[u8], mask: &[bool]) -> Result<f64, TrainError> {
    assert_eq!(logits.cols(), 1, "logits must be n x 1");
    assert_eq!(logits.rows(), labels.len(), "logit/label count mismatch");
    assert_eq!(labels.len(), mask.len(), "label/mask count mismatch");
    if !mask.iter().any(|&m| m) {
        return Err(TrainError::EmptyMask(Split::Train));
    }
    Ok(tape::bce_forward(logits.data(), labels, mask))
}

/// AdamW with decoupled weight decay:
///
/// ```text
/// m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
/// theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// ```
///
/// The decay term uses the pre-step parameter value.
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64, shapes: &[(usize, usize)]) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. `grads[i]` of `None` means a zero gradient for
    /// that parameter (weight decay still applies).
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Option<&Tensor>]) {
        assert_eq!(params.len(), self.m.len(), "parameter count mismatch");
        assert_eq!(params.len(), grads.len(), "gradient count mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..param.len() {
                let g = grad.map_or(0.0, |t| t.data()[i]);
                let m_i = &mut m.data_mut()[i];
                *m_i = self.beta1 * *m_i + (1.0 - self.beta1) * g;
                let v_i = &mut v.data_mut()[i];
                *v_i = self.beta2 * *v_i + (1.0 - self.beta2) * g * g;
                let m_hat = *m_i / bc1;
                let v_hat = *v_i / bc2;
                let theta = param.data()[i];
                param.data_mut()[i] = theta
                    - self.learning_rate
                        * (m_hat / (v_hat.sqrt() + self.epsilon) + self.weight_decay * theta);
            }
        }
    }
}

fn mask_of(graph: &HeteroGraph, split: Split) -> &[bool] {
    match split {
        Split::Train => &graph.train_mask,
        Split::Val => &graph.val_mask,
        Split::Test => &graph.test_mask,
    }
}

/// Fraction of masked users whose thresholded logit matches the label;
/// zero when the mask is empty.
fn masked_accuracy(logits: &Tensor, labels: &[u8], mask: &[bool]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (i, &m) in mask.iter().enumerate() {
        if m {
            let predicted = u8::from(logits.at(i, 0) > 0.0);
            correct += usize::from(predicted == labels[i]);
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Full-graph training. Applies the config's graph variant, initializes a
/// fresh classifier, and runs `epochs` AdamW steps; the history records
/// the metrics of each epoch's forward pass.
pub fn train(
    graph: &HeteroGraph,
    config: &TrainConfig,
) -> Result<(NodeClassifier, TrainHistory), TrainError> {
    config.validate()?;
    let applied;
    let g = if config.variant == GraphVariant::All {
        graph
    } else {
        applied = apply_variant(graph, config.variant);
        &applied
    };

    let train_labels: Vec<u8> = g
        .labels
        .iter()
        .zip(&g.train_mask)
        .filter(|&(_, &m)| m)
        .map(|(&l, _)| l)
        .collect();
    if train_labels.is_empty() {
        return Err(TrainError::EmptyMask(Split::Train));
    }
    if !train_labels.contains(&0) || !train_labels.contains(&1) {
        return Err(TrainError::MissingClassInTrain);
    }

    let mut model = NodeClassifier::init(config.kind, g, config.variant, config.hidden_dim, config.seed);
    let layout = GraphLayout::new(g);
    let targets = Rc::new(BceTargets::new(g.labels.clone(), g.train_mask.clone()));
    let shapes: Vec<(usize, usize)> = model.param_tensors().iter().map(|t| t.shape()).collect();
    let mut optimizer = AdamW::new(config.learning_rate, config.weight_decay, &shapes);

    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        let mut tape = Tape::new();
        let (logits_var, param_vars) = model.forward_on_tape(&mut tape, g, &layout)?;
        let loss_var = tape.bce_with_logits(logits_var, targets.clone());
        let loss = tape.value(loss_var).at(0, 0);
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch, loss });
        }
        let logits = tape.value(logits_var).clone();
        let grads = tape.backward(loss_var);

        let mut params = model.param_tensors_mut();
        let grad_refs: Vec<Option<&Tensor>> =
            param_vars.iter().map(|&v| grads.get(v)).collect();
        optimizer.step(&mut params, &grad_refs);

        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss,
            train_accuracy: masked_accuracy(&logits, &g.labels, &g.train_mask),
            val_accuracy: masked_accuracy(&logits, &g.labels, &g.val_mask),
        });
    }
    Ok((model, history))
}

/// Metrics over one split. The model's recorded variant is applied to the
/// graph first; prediction threshold is a zero logit.
pub fn evaluate(
    model: &NodeClassifier,
    graph: &HeteroGraph,
    split: Split,
) -> Result<Metrics, TrainError> {
    let applied;
    let g = if model.variant == GraphVariant::All {
        graph
    } else {
        applied = apply_variant(graph, model.variant);
        &applied
    };
    let mask = mask_of(g, split);
    if !mask.iter().any(|&m| m) {
        return Err(TrainError::EmptyMask(split));
    }
    let logits = model.forward(g)?;

    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let predicted = u8::from(logits.at(i, 0) > 0.0);
        match (predicted, g.labels[i]) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            _ => fn_ += 1,
        }
    }
    let total = tp + fp + tn + fn_;
    let accuracy = (tp + tn) as f64 / total as f64;
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let loss = bce_with_logits(&logits, &g.labels, mask)?;
    Ok(Metrics { accuracy, f1, loss })
}

/// Grid axes for the hyperparameter search.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub epoch_counts: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            learning_rates: vec![0.01, 0.001, 0.0001, 0.00001],
            weight_decays: vec![0.05, 0.005, 0.0005, 0.00005],
            epoch_counts: vec![50, 100, 250, 500],
        }
    }
}

impl GridSpec {
    pub fn is_empty(&self) -> bool {
        self.learning_rates.is_empty()
            || self.weight_decays.is_empty()
            || self.epoch_counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.weight_decays.len() * self.epoch_counts.len()
    }

    fn cells(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for &lr in &self.learning_rates {
            for &wd in &self.weight_decays {
                for &epochs in &self.epoch_counts {
                    out.push((lr, wd, epochs));
                }
            }
        }
        out
    }
}

/// Validation metrics of one successful grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCellMetrics {
    pub val_accuracy: f64,
    pub val_f1: f64,
    pub final_train_loss: f64,
}

/// One grid combination with its outcome; failures carry the error text.
#[derive(Clone, Debug)]
pub struct GridCell {
    pub index: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub outcome: Result<GridCellMetrics, String>,
}

/// The full grid report plus the winning configuration.
#[derive(Clone, Debug)]
pub struct GridReport {
    pub best: TrainConfig,
    pub cells: Vec<GridCell>,
}

impl GridReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("index,learning_rate,weight_decay,epochs,status,val_accuracy,val_f1,final_train_loss\n");
        for cell in &self.cells {
            match &cell.outcome {
                Ok(m) => out.push_str(&format!(
                    "{},{},{},{},ok,{},{},{}\n",
                    cell.index,
                    cell.learning_rate,
                    cell.weight_decay,
                    cell.epochs,
                    m.val_accuracy,
                    m.val_f1,
                    m.final_train_loss
                )),
                Err(e) => out.push_str(&format!(
                    "{},{},{},{},failed,,,{}\n",
                    cell.index,
                    cell.learning_rate,
                    cell.weight_decay,
                    cell.epochs,
                    e.replace([',', '\n'], ";")
                )),
            }
        }
        out
    }
}

fn run_cell(
    graph: &HeteroGraph,
    kind: ConvKind,
    variant: GraphVariant,
    hidden_dim: usize,
    seed: u64,
    cell: (f64, f64, usize),
) -> Result<GridCellMetrics, String> {
    let (learning_rate, weight_decay, epochs) = cell;
    let config = TrainConfig {
        kind,
        variant,
        learning_rate,
        weight_decay,
        epochs,
        seed,
        hidden_dim,
    };
    let (model, history) = train(graph, &config).map_err(|e| e.to_string())?;
    let val = evaluate(&model, graph, Split::Val).map_err(|e| e.to_string())?;
    Ok(GridCellMetrics {
        val_accuracy: val.accuracy,
        val_f1: val.f1,
        final_train_loss: history.epochs.last().map_or(f64::NAN, |e| e.train_loss),
    })
}

/// Trains one model per grid combination and picks the best validation
/// accuracy; ties break to fewer epochs, then lower learning rate. Cell
/// failures are recorded in the report, not fatal.
pub fn grid_search(
    graph: &HeteroGraph,
    kind: ConvKind,
    variant: GraphVariant,
    hidden_dim: usize,
    seed: u64,
    spec: &GridSpec,
) -> Result<GridReport, TrainError> {
    if spec.is_empty() {
        return Err(TrainError::EmptyGrid);
    }
    let combos = spec.cells();
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<GridCellMetrics, String>> = combos
        .par_iter()
        .map(|&cell| run_cell(graph, kind, variant, hidden_dim, seed, cell))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<GridCellMetrics, String>> = combos
        .iter()
        .map(|&cell| run_cell(graph, kind, variant, hidden_dim, seed, cell))
        .collect();

    let cells: Vec<GridCell> = combos
        .iter()
        .zip(outcomes)
        .enumerate()
        .map(|(index, (&(lr, wd, epochs), outcome))| GridCell {
            index,
            learning_rate: lr,
            weight_decay: wd,
            epochs,
            outcome,
        })
        .collect();

    let best_cell = cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|m| (c, m)))
        .max_by(|(ca, ma), (cb, mb)| {
            ma.val_accuracy
                .partial_cmp(&mb.val_accuracy)
                .unwrap()
                .then(cb.epochs.cmp(&ca.epochs))
                .then(cb.learning_rate.partial_cmp(&ca.learning_rate).unwrap())
        });
    let Some((best_cell, _)) = best_cell else {
        let first_error = cells
            .iter()
            .find_map(|c| c.outcome.as_ref().err().cloned())
            .unwrap_or_else(|| "empty grid".to_string());
        return Err(TrainError::AllCellsFailed(first_error));
    };
    Ok(GridReport {
        best: TrainConfig {
            kind,
            variant,
            learning_rate: best_cell.learning_rate,
            weight_decay: best_cell.weight_decay,
            epochs: best_cell.epochs,
            seed,
            hidden_dim,
        },
        cells,
    })
}

/// One ablation row: the variant, its structural counts, and the trained
/// model's metrics.
#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: GraphVariant,
    pub summary: GraphSummary,
    pub val: Metrics,
    pub test: Metrics,
}

/// Trains one model per graph variant with identical hyperparameters and
/// seed. Rows come back in the canonical variant order.
pub fn run_ablation(
    graph: &HeteroGraph,
    base_config: &TrainConfig,
) -> Result<Vec<AblationRow>, TrainError> {
    base_config.validate()?;
    let run = |variant: GraphVariant| -> Result<AblationRow, TrainError> {
        let config = TrainConfig {
            variant,
            ..*base_config
        };
        let (model, _) = train(graph, &config)?;
        let applied = apply_variant(graph, variant);
        Ok(AblationRow {
            variant,
            summary: applied.summary(),
            val: evaluate(&model, graph, Split::Val)?,
            test: evaluate(&model, graph, Split::Test)?,
        })
    };
    #[cfg(feature = "parallel")]
    {
        GraphVariant::ALL.par_iter().map(|&v| run(v)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        GraphVariant::ALL.iter().map(|&v| run(v)).collect()
    }
}
