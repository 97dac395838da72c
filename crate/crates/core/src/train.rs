//! Weakly-supervised training: subgraph instances inherit their parent
//! graph's label, the loss is cross-entropy on those inherited labels, and
//! the optimizer is Adam with weight decay folded into the gradient.
//!
//! Batch members run forward/backward on independent tapes (in parallel);
//! gradient reduction and the optimizer step are a fixed-order serial
//! section, so results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{extract_subgraphs, ExtractionConfig, Subgraph};
use crate::graph::{one_hot_features, Dataset};
use crate::matrix::Matrix;
use crate::model::{
    collect_grads, forward, init_params, GatConfig, GatGrads, GatModel, Mode,
};
use crate::scalar::Scalar;
use crate::seeds;
use crate::tape::{Tape, TensorId};

// Stream ids for deterministic seed derivation.
const SPLIT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const EPOCH_STREAM_BASE: u64 = 1 << 32;
const DROPOUT_STREAM_BASE: u64 = 2 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Feature dropout rate used during training forwards.
    pub dropout_p: f64,
    /// Fraction of parent graphs assigned to the training split.
    pub split_fraction: f64,
    pub seed: u64,
    /// Subgraphs per optimizer step; the batch gradient is averaged.
    pub batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 100,
            dropout_p: 0.6,
            split_fraction: 0.8,
            seed: 0,
            batch: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must be in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch < 1 {
            return Err(Error::Config("batch must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_train_loss: f64,
    /// Fraction of training subgraphs whose argmax matched the inherited
    /// label during the epoch's training forwards.
    pub subgraph_train_accuracy: f64,
}

/// Seeded shuffle of graph ids; the first `ceil(fraction * n)` are the
/// training split. Splitting happens at parent-graph level, so no parent's
/// subgraphs ever straddle the split.
pub fn split_dataset(
    ds: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if ds.graphs.len() < 2 {
        return Err(Error::Contract(format!(
            "cannot split a dataset with {} graph(s)",
            ds.graphs.len()
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut ids: Vec<usize> = (0..ds.graphs.len()).collect();
    seeds::shuffle(&mut ids, &mut seeds::rng(seed, SPLIT_STREAM));
    let train_count = (fraction * ids.len() as f64).ceil() as usize;
    let test = ids.split_off(train_count.min(ids.len()));
    Ok((ids, test))
}

/// `-log softmax(logits)[label]` through the numerically stable
/// log-softmax path. `logits` must be a `(1, C)` row.
pub fn cross_entropy<S: Scalar>(
    tape: &mut Tape<S>,
    logits: TensorId,
    label: usize,
) -> Result<TensorId> {
    let (rows, classes) = tape.shape(logits);
    if rows != 1 {
        return Err(Error::Contract(format!(
            "cross_entropy expects a (1, C) logits row, got ({rows}, {classes})"
        )));
    }
    if label >= classes {
        return Err(Error::Contract(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let log_probs = tape.log_softmax_rows(logits);
    let picked = tape.pick(log_probs, 0, label)?;
    Ok(tape.scale(picked, -S::one()))
}

/// Adam moment buffers, one pair per parameter block.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub m: Vec<Matrix<S>>,
    pub v: Vec<Matrix<S>>,
    pub step: u64,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(model: &GatModel<S>) -> Self {
        let zeros: Vec<Matrix<S>> = model
            .blocks()
            .iter()
            .map(|b| Matrix::zeros(b.rows(), b.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: S::cast(0.9),
            beta2: S::cast(0.999),
            epsilon: S::cast(1e-8),
        }
    }

    /// Moment buffers sized for arbitrary parameter blocks.
    pub fn for_blocks(blocks: &[&Matrix<S>]) -> Self {
        let zeros: Vec<Matrix<S>> = blocks
            .iter()
            .map(|b| Matrix::zeros(b.rows(), b.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: S::cast(0.9),
            beta2: S::cast(0.999),
            epsilon: S::cast(1e-8),
        }
    }
}

/// One Adam update over raw parameter blocks. Weight decay is folded into
/// the gradient (`g <- g + wd * theta`) for blocks flagged in `decay`.
pub fn adam_step_blocks<S: Scalar>(
    blocks: &mut [&mut Matrix<S>],
    grads: &[Matrix<S>],
    decay: &[bool],
    state: &mut AdamState<S>,
    lr: S,
    weight_decay: S,
) -> Result<()> {
    if blocks.len() != grads.len() || blocks.len() != decay.len() {
        return Err(Error::Contract(format!(
            "adam_step over {} blocks, {} gradients, {} decay flags",
            blocks.len(),
            grads.len(),
            decay.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let bias1 = S::one() - b1.powi(t);
    let bias2 = S::one() - b2.powi(t);
    for (i, block) in blocks.iter_mut().enumerate() {
        if block.shape() != grads[i].shape() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: block.shape(),
                rhs: grads[i].shape(),
            });
        }
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let theta = block.data_mut();
        let g = grads[i].data();
        for j in 0..theta.len() {
            let mut grad = g[j];
            if decay[i] {
                grad += weight_decay * theta[j];
            }
            m[j] = b1 * m[j] + (S::one() - b1) * grad;
            v[j] = b2 * v[j] + (S::one() - b2) * grad * grad;
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Adam update of a whole model from collected gradients.
pub fn adam_step<S: Scalar>(
    model: &mut GatModel<S>,
    grads: &GatGrads<S>,
    state: &mut AdamState<S>,
    cfg: &TrainConfig,
) -> Result<()> {
    let decay = model.decay_flags();
    let mut blocks = model.blocks_mut();
    adam_step_blocks(
        &mut blocks,
        &grads.blocks,
        &decay,
        state,
        S::cast(cfg.lr),
        S::cast(cfg.weight_decay),
    )
}

/// Result of a training run.
#[derive(Debug)]
pub struct TrainOutcome<S> {
    pub model: GatModel<S>,
    pub epochs: Vec<EpochLog>,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    /// Parent graph id of every training instance, for split audits.
    pub instance_parents: Vec<usize>,
}

/// Full protocol: split the dataset at graph level, extract subgraphs from
/// the training graphs once up front, and train on them with inherited
/// labels. Returns the final-epoch model; `on_epoch` observes each epoch's
/// log as it completes.
pub fn train<S: Scalar>(
    ds: &Dataset,
    ext: &ExtractionConfig,
    gat: &GatConfig,
    tr: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<S>> {
    tr.validate()?;
    let (train_ids, test_ids) = split_dataset(ds, tr.split_fraction, tr.seed)?;

    let mut instances: Vec<Subgraph<S>> = Vec::new();
    for &gid in &train_ids {
        let g = &ds.graphs[gid];
        let feats = one_hot_features(g, ds.num_node_labels)?;
        instances.extend(extract_subgraphs(g, &feats, ext)?);
    }
    if instances.is_empty() {
        return Err(Error::Config(format!(
            "extraction produced no training subgraphs \
             (min_nodes={}, min_edges={}); relax the thresholds",
            ext.min_nodes, ext.min_edges
        )));
    }

    let (model, epochs) = train_on_instances(&instances, gat, tr, &mut on_epoch)?;
    Ok(TrainOutcome {
        model,
        epochs,
        instance_parents: instances.iter().map(|s| s.parent_id).collect(),
        train_ids,
        test_ids,
    })
}

/// The epoch loop over pre-built instances. Baseline (whole-graph) training
/// uses this directly with one instance per graph.
pub fn train_on_instances<S: Scalar>(
    instances: &[Subgraph<S>],
    gat: &GatConfig,
    tr: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(GatModel<S>, Vec<EpochLog>)> {
    tr.validate()?;
    let cfg = GatConfig {
        dropout_p: tr.dropout_p,
        ..*gat
    };
    cfg.validate()?;
    if instances.is_empty() {
        return Err(Error::Config("no training instances".into()));
    }

    let mut model: GatModel<S> = init_params(&cfg, seeds::mix(tr.seed, INIT_STREAM))?;
    let mut state = AdamState::new(&model);
    let mut logs = Vec::with_capacity(tr.epochs);

    let mut order: Vec<usize> = (0..instances.len()).collect();
    for epoch in 1..=tr.epochs {
        seeds::shuffle(
            &mut order,
            &mut seeds::rng(tr.seed, EPOCH_STREAM_BASE + epoch as u64),
        );

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(tr.batch) {
            // Forward/backward per instance on independent tapes; the
            // dropout stream depends only on (seed, epoch, instance), so
            // parallel and serial execution agree.
            let results: Vec<(f64, bool, GatGrads<S>)> = chunk
                .par_iter()
                .map(|&idx| -> Result<(f64, bool, GatGrads<S>)> {
                    let sub = &instances[idx];
                    let mut rng = seeds::rng(
                        seeds::mix(tr.seed, DROPOUT_STREAM_BASE + epoch as u64),
                        idx as u64,
                    );
                    let mut pass = forward(&model, sub, &cfg, Mode::Train, &mut rng)?;
                    let loss = cross_entropy(&mut pass.tape, pass.logits, sub.label)?;
                    pass.tape.backward(loss)?;
                    let grads = collect_grads(&pass)?;
                    let loss_value = pass.tape.value(loss)[(0, 0)].as_f64();
                    let predicted = argmax(pass.probs.row(0));
                    Ok((loss_value, predicted == sub.label, grads))
                })
                .collect::<Result<Vec<_>>>()?;

            // Fixed-order reduction keeps multi-worker runs deterministic.
            let mut batch_grads = GatGrads::zeros_like(&model);
            for (loss, hit, grads) in results {
                if !loss.is_finite() || !grads.is_finite() {
                    return Err(Error::NonFinite {
                        epoch,
                        detail: format!("loss {loss} while training"),
                    });
                }
                loss_sum += loss;
                correct += hit as usize;
                batch_grads.add_assign(&grads)?;
            }
            batch_grads.scale_assign(S::one() / S::cast(chunk.len() as f64));
            adam_step(&mut model, &batch_grads, &mut state, tr)?;
        }

        let log = EpochLog {
            epoch,
            mean_train_loss: loss_sum / instances.len() as f64,
            subgraph_train_accuracy: correct as f64 / instances.len() as f64,
        };
        if !log.mean_train_loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                detail: format!("epoch mean loss {}", log.mean_train_loss),
            });
        }
        on_epoch(&log);
        logs.push(log);
    }
    Ok((model, logs))
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
