//! Training loop, evaluation and prediction.

mod config;
mod history;
mod optimizer;

pub use config::{Ablation, TrainConfig};
pub use history::{EpochRecord, TrainHistory, HISTORY_HEADER};
pub use optimizer::{optimizer_step, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{induce_training_subgraph, normalize_adjacency, NormalizedAdjacency, SparseGraph};
use crate::matrix::DenseMatrix;
use crate::metrics::MetricsReport;
use crate::model::{
    model_input, objective_on_tape, predict_proba, standard_normal, total_loss, LabelMatrix, ModelParams, Noise,
    Objective,
};
use crate::scalar::Scalar;
use crate::slam::augment;
use crate::split::{NodeRole, SplitAssignment};

/// Independent random streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_SLAM_MASK: u64 = 2;
const STREAM_SLAM_NOISE: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained<T> {
    /// Parameters from the best validation epoch (or the last epoch when
    /// there is nothing to validate on).
    pub params: ModelParams<T>,
    pub history: TrainHistory,
}

/// What an observer sees after each epoch's gradient step.
pub struct EpochView<'v, T> {
    pub epoch: usize,
    /// Label matrix Ỹ used as encoder input and reconstruction target.
    pub targets: &'v LabelMatrix<T>,
    pub record: &'v EpochRecord,
}

pub fn train<T: Scalar>(ds: &Dataset<T>, splits: &SplitAssignment, cfg: &TrainConfig) -> Result<Trained<T>> {
    train_observed(ds, splits, cfg, |_| {})
}

/// [`train`] with a per-epoch callback.
///
/// Gradient steps only see the induced training subgraph with held-out
/// feature rows zeroed; validation runs on the full graph.
pub fn train_observed<T, F>(
    ds: &Dataset<T>,
    splits: &SplitAssignment,
    cfg: &TrainConfig,
    mut observe: F,
) -> Result<Trained<T>>
where
    T: Scalar,
    F: FnMut(&EpochView<'_, T>),
{
    cfg.validate()?;
    let n = ds.node_count();
    if splits.len() != n {
        return Err(Error::dim("train splits", n, splits.len()));
    }
    let labeled = splits.nodes_with(NodeRole::TrainLabeled);
    if let Some(&bad) = labeled.iter().find(|&&i| ds.known_label(i).is_none()) {
        return Err(Error::InvalidConfig(format!("train_labeled node {bad} has no known class")));
    }
    if labeled.is_empty() {
        return Err(Error::InvalidConfig("no train_labeled nodes".into()));
    }

    let dims = cfg.model_dims(ds.feature_dim(), ds.class_count);
    dims.validate()?;
    let mut params = ModelParams::glorot(dims, &mut stream(cfg.seed, STREAM_INIT))?;
    let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
    let mut mask_rng = stream(cfg.seed, STREAM_SLAM_MASK);
    let mut slam_noise_rng = stream(cfg.seed, STREAM_SLAM_NOISE);
    let mut opt = OptimizerState::for_params(cfg.optimizer, &params);

    let train_graph = induce_training_subgraph(&ds.graph, splits)?;
    let train_adj = normalize_adjacency::<T>(&train_graph);
    let training_mask = splits.training_mask();
    let x_train = DenseMatrix::from_fn(n, ds.feature_dim(), |i, j| {
        if training_mask[i] {
            ds.features[(i, j)]
        } else {
            T::zero()
        }
    });
    let y_true = ds.label_matrix_where(|i| splits.role(i) == NodeRole::TrainLabeled);
    let scope = splits.training_nodes();
    let lambda = T::of(cfg.effective_lambda());
    let slam = cfg.slam_settings();

    let validator = Validator::new(ds, splits)?;
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let diverged = |e: Error| match e {
            Error::Numeric { .. } => Error::Diverged { epoch },
            other => other,
        };
        let (targets, accepted) = if cfg.augments_at(epoch) {
            let a = augment(
                &params,
                &train_graph,
                &x_train,
                &y_true,
                splits,
                &slam,
                &mut mask_rng,
                &mut slam_noise_rng,
            )
            .map_err(diverged)?;
            (a.labels, a.accepted)
        } else {
            (y_true.clone(), 0)
        };
        let counted = targets.labeled_rows();
        let h0 = model_input(&params, &x_train, &targets)?;
        let eps = standard_normal::<T, _>(n, dims.latent, &mut noise_rng);

        let (components, grads) = {
            let mut tape = Tape::new();
            let vars = params.register(&mut tape);
            let h0v = tape.constant(h0);
            let obj = Objective {
                features: &x_train,
                targets: &targets,
                counted_rows: &counted,
                scope_rows: Some(&scope),
                lambda_feat: lambda,
            };
            let lv = objective_on_tape(&mut tape, &train_adj, h0v, &vars, Noise::Sample(&eps), &obj)
                .map_err(diverged)?;
            let grads = tape.backward(lv.total).map_err(diverged)?;
            (lv.components(&tape), grads)
        };
        let total = total_loss(components, lambda);
        if !total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        optimizer_step(&mut params, &grads, &mut opt, cfg.lr)?;
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        let val = validator.score(&params).map_err(diverged)?;
        let record = EpochRecord {
            epoch,
            label_loss: components.label.as_f64(),
            feature_loss: components.feature.as_f64(),
            kl_loss: components.kl.as_f64(),
            total_loss: total.as_f64(),
            accepted_pseudo: accepted,
            val_accuracy: val.map(|m| m.accuracy),
            val_mcc: val.map(|m| m.mcc),
        };
        observe(&EpochView {
            epoch,
            targets: &targets,
            record: &record,
        });
        history.push(record)?;

        match val {
            Some(m) if best.as_ref().is_none_or(|(acc, _, _)| m.accuracy > *acc) => {
                best = Some((m.accuracy, epoch, params.clone()));
                since_best = 0;
            }
            Some(_) => {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
            None => {}
        }
    }

    let params = match best {
        Some((_, epoch, p)) => {
            history.best_epoch = Some(epoch);
            p
        }
        None => {
            history.best_epoch = history.records.last().map(|r| r.epoch);
            params
        }
    };
    Ok(Trained { params, history })
}

/// Scores validation nodes with known labels after each epoch.
struct Validator<'d, T> {
    inference: Inference<T>,
    nodes: Vec<usize>,
    labels: &'d [i64],
    classes: usize,
}

impl<'d, T: Scalar> Validator<'d, T> {
    fn new(ds: &'d Dataset<T>, splits: &SplitAssignment) -> Result<Self> {
        let nodes: Vec<usize> = splits
            .nodes_with(NodeRole::Validation)
            .into_iter()
            .filter(|&i| ds.known_label(i).is_some())
            .collect();
        Ok(Self {
            inference: Inference::for_dataset(ds, splits)?,
            nodes,
            labels: &ds.labels,
            classes: ds.class_count,
        })
    }

    fn score(&self, params: &ModelParams<T>) -> Result<Option<MetricsReport>> {
        if self.nodes.is_empty() {
            return Ok(None);
        }
        let pred = self.inference.predict(params)?;
        let truth: Vec<usize> = self.nodes.iter().map(|&i| self.labels[i] as usize).collect();
        let guess: Vec<usize> = self.nodes.iter().map(|&i| pred.classes[i]).collect();
        MetricsReport::from_predictions(&truth, &guess, self.classes).map(Some)
    }
}

/// Argmax classes and the probability rows they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub classes: Vec<usize>,
    pub probabilities: LabelMatrix<T>,
}

impl<T: Scalar> Prediction<T> {
    pub fn max_probability(&self, node: usize) -> T {
        self.probabilities.row(node)[self.classes[node]]
    }
}

/// Deterministic full-graph forward pass (`z = μ`) with fixed label input.
#[derive(Clone, Debug)]
pub struct Inference<T> {
    adj: NormalizedAdjacency<T>,
    x: DenseMatrix<T>,
    y_input: LabelMatrix<T>,
}

impl<T: Scalar> Inference<T> {
    pub fn new(graph: &SparseGraph, x: DenseMatrix<T>, y_input: LabelMatrix<T>) -> Result<Self> {
        let n = graph.node_count();
        if x.rows() != n || y_input.node_count() != n {
            return Err(Error::dim("inference inputs", n, format!("{} / {}", x.rows(), y_input.node_count())));
        }
        Ok(Self {
            adj: normalize_adjacency(graph),
            x,
            y_input,
        })
    }

    /// Full graph, all features, ground-truth labels of `train_labeled`
    /// nodes as label input.
    pub fn for_dataset(ds: &Dataset<T>, splits: &SplitAssignment) -> Result<Self> {
        if splits.len() != ds.node_count() {
            return Err(Error::dim("inference splits", ds.node_count(), splits.len()));
        }
        let y = ds.label_matrix_where(|i| splits.role(i) == NodeRole::TrainLabeled);
        Self::new(&ds.graph, ds.features.clone(), y)
    }

    pub fn predict(&self, params: &ModelParams<T>) -> Result<Prediction<T>> {
        let dims = params.dims;
        if dims.features != self.x.cols() || dims.classes != self.y_input.class_count() {
            return Err(Error::dim(
                "model vs data",
                format!("d={}, C={}", dims.features, dims.classes),
                format!("d={}, C={}", self.x.cols(), self.y_input.class_count()),
            ));
        }
        let h0 = model_input(params, &self.x, &self.y_input)?;
        let probabilities = predict_proba(&self.adj, &h0, params, Noise::Mean)?;
        let m = probabilities.as_matrix();
        let classes = (0..m.rows())
            .map(|i| m.row_argmax(i).ok_or(Error::Numeric { op: "argmax" }))
            .collect::<Result<_>>()?;
        Ok(Prediction {
            classes,
            probabilities,
        })
    }
}

pub fn predict<T: Scalar>(
    params: &ModelParams<T>,
    graph: &SparseGraph,
    x: &DenseMatrix<T>,
    y_input: &LabelMatrix<T>,
) -> Result<Prediction<T>> {
    Inference::new(graph, x.clone(), y_input.clone())?.predict(params)
}

/// Accuracy and MCC of `pred` over nodes with `role` and a known label.
pub fn score<T: Scalar>(
    pred: &Prediction<T>,
    labels: &[i64],
    classes: usize,
    splits: &SplitAssignment,
    role: NodeRole,
) -> Result<MetricsReport> {
    let nodes = splits.nodes_with(role);
    if nodes.is_empty() {
        return Err(Error::InvalidQuery(format!("no {role} nodes in the split")));
    }
    let (truth, guess): (Vec<usize>, Vec<usize>) = nodes
        .iter()
        .filter(|&&i| labels[i] >= 0)
        .map(|&i| (labels[i] as usize, pred.classes[i]))
        .unzip();
    if truth.is_empty() {
        return Err(Error::InvalidQuery(format!("no {role} node has a known label")));
    }
    MetricsReport::from_predictions(&truth, &guess, classes)
}

pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    ds: &Dataset<T>,
    splits: &SplitAssignment,
    role: NodeRole,
) -> Result<MetricsReport> {
    if splits.count(role) == 0 {
        return Err(Error::InvalidQuery(format!("no {role} nodes in the split")));
    }
    let pred = Inference::for_dataset(ds, splits)?.predict(params)?;
    score(&pred, &ds.labels, ds.class_count, splits, role)
}
