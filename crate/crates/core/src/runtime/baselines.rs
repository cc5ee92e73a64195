//! Reference points for the adapter method: one independent network per task, and a
//! single network fine-tuned on each task in turn with no protection against forgetting.

use crate::data::TaskData;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{AccuracyMatrix, EvalMode};
use crate::net::{fit, forward, Backbone, ClassifierHead, ModelView, Network, NormParams, Phase, Trainee};
use crate::seed;

use super::continual::{record_stage, RunSettings, StreamResult};
use super::inference::{argmax_global, concat_columns};
use super::model::{train_reference, ParamCounts, ReferenceBackbone};

fn predict(net: &ReferenceBackbone, x: &Matrix) -> Result<Matrix> {
    forward(&ModelView { net: &net.network, norms: &net.norms, head: &net.head, adapters: None }, x, Phase::Eval)
}

/// A fresh backbone, normalization and head trained from scratch for every task.
/// Class-IL concatenates the raw logits of all task networks.
pub fn complete_isolation(stream: &[TaskData], settings: &RunSettings) -> Result<StreamResult> {
    if stream.is_empty() {
        return Err(Error::InsufficientTasks { needed: 1, got: 0 });
    }
    let mut nets: Vec<ReferenceBackbone> = Vec::with_capacity(stream.len());
    let mut class_il = AccuracyMatrix::new(EvalMode::ClassIl);
    let mut task_il = AccuracyMatrix::new(EvalMode::TaskIl);
    for (t, task) in stream.iter().enumerate() {
        let mut cfg = settings.train.clone();
        cfg.seed = seed::derive(settings.train.seed, "isolation", t as u64 + 1);
        nets.push(train_reference(&settings.network, task, &cfg)?);
        let nets = &nets;
        record_stage(
            stream,
            t + 1,
            &mut class_il,
            &mut task_il,
            |i, x| {
                let net = &nets[i - 1];
                argmax_global(&predict(net, x)?, &net.head.class_range().collect::<Vec<_>>())
            },
            |x| {
                let blocks = nets.iter().map(|n| predict(n, x)).collect::<Result<Vec<_>>>()?;
                let ids: Vec<usize> = nets.iter().flat_map(|n| n.head.class_range()).collect();
                argmax_global(&concat_columns(&blocks), &ids)
            },
        )?;
    }
    let params = ParamCounts::new(0, nets.iter().map(ReferenceBackbone::param_count).collect());
    Ok(StreamResult { class_il, task_il, params })
}

/// One shared backbone and a head that grows by each task's classes, trained on every
/// task in turn with global labels. Task-IL restricts the argmax to the task's classes.
pub fn sequential_ft(stream: &[TaskData], settings: &RunSettings) -> Result<StreamResult> {
    let cfg = &settings.train;
    cfg.validate()?;
    let first = stream.first().ok_or(Error::InsufficientTasks { needed: 1, got: 0 })?;
    let mut init_rng = seed::rng(cfg.seed, "sequential-init", 0);
    let mut net = Network::init(&settings.network, &mut init_rng)?;
    let mut norms = NormParams::fresh(&net);
    let mut head = ClassifierHead::init(first.num_classes, net.feature_dim(), first.class_start, &mut init_rng);
    let base_params = net.param_count() + norms.param_count();
    let mut per_task = Vec::with_capacity(stream.len());
    let mut class_il = AccuracyMatrix::new(EvalMode::ClassIl);
    let mut task_il = AccuracyMatrix::new(EvalMode::TaskIl);

    for (t, task) in stream.iter().enumerate() {
        let before = if t == 0 { 0 } else { head.param_count() };
        if t > 0 {
            if task.class_start != head.class_range().end {
                return Err(Error::InvalidConfig(format!(
                    "task {} starts at class {} but the head ends at {}",
                    t + 1,
                    task.class_start,
                    head.class_range().end
                )));
            }
            head.grow(task.num_classes, &mut seed::rng(cfg.seed, "sequential-head", t as u64 + 1));
        }
        per_task.push(head.param_count() - before);

        let train = task.train.with_label_offset(task.class_start - head.class_start);
        let mut trainee =
            Trainee { backbone: Backbone::Trainable(&mut net), norms: &mut norms, head: &mut head, adapters: None };
        fit(
            &mut trainee,
            &train,
            cfg.reference_epochs,
            cfg.learning_rate_e1,
            cfg,
            &mut seed::rng(cfg.seed, "sequential-fit", t as u64 + 1),
        )?;

        let view = ModelView { net: &net, norms: &norms, head: &head, adapters: None };
        let ids: Vec<usize> = head.class_range().collect();
        record_stage(
            stream,
            t + 1,
            &mut class_il,
            &mut task_il,
            |i, x| {
                let range = stream[i - 1].class_range();
                let logits = forward(&view, x, Phase::Eval)?;
                let offset = range.start - head.class_start;
                let local = Matrix::from_fn(logits.rows(), range.len(), |r, c| logits[(r, offset + c)]);
                argmax_global(&local, &range.collect::<Vec<_>>())
            },
            |x| argmax_global(&forward(&view, x, Phase::Eval)?, &ids),
        )?;
    }
    Ok(StreamResult { class_il, task_il, params: ParamCounts::new(base_params, per_task) })
}
