use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TaskData};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{AccuracyMatrix, EvalMode};
use crate::net::{NetworkSpec, TrainConfig};

use super::inference::{infer_class_il, infer_task_il};
use super::model::{
    count_params, learn_task, train_reference, ContinualModel, LearnOptions, ParamCounts, TrainingMode,
};

/// Everything a continual run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub mode: TrainingMode,
    pub network: NetworkSpec,
    pub train: TrainConfig,
    pub learn: LearnOptions,
}

/// Accuracy matrices for both evaluation protocols plus the parameter budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    pub class_il: AccuracyMatrix,
    pub task_il: AccuracyMatrix,
    pub params: ParamCounts,
}

/// Fraction of rows whose predicted global class equals `class_start + label`.
pub fn accuracy(predicted: &[usize], data: &Dataset, class_start: usize) -> f64 {
    let hits = predicted.iter().zip(&data.labels).filter(|(p, l)| **p == class_start + **l).count();
    hits as f64 / data.len() as f64
}

/// Evaluates tasks `1..=t` after stage `t` and appends one row to each matrix.
pub(crate) fn record_stage(
    stream: &[TaskData],
    t: usize,
    class_il: &mut AccuracyMatrix,
    task_il: &mut AccuracyMatrix,
    mut predict_task: impl FnMut(usize, &Matrix) -> Result<Vec<usize>>,
    mut predict_class: impl FnMut(&Matrix) -> Result<Vec<usize>>,
) -> Result<()> {
    let mut til = Vec::with_capacity(t);
    let mut cil = Vec::with_capacity(t);
    for (i, task) in stream[..t].iter().enumerate() {
        if task.test.is_empty() {
            return Err(Error::EmptyDataset);
        }
        til.push(accuracy(&predict_task(i + 1, &task.test.features)?, &task.test, task.class_start));
        cil.push(accuracy(&predict_class(&task.test.features)?, &task.test, task.class_start));
    }
    task_il.push_stage(til)?;
    class_il.push_stage(cil)
}

/// Learns the stream task by task and fills both accuracy matrices.
///
/// With pretraining, `reference` trains the backbone and every stream task gets adapters.
/// Without it, the first stream task trains the backbone and becomes task 1.
pub fn run_continual(
    stream: &[TaskData],
    reference: Option<&TaskData>,
    settings: &RunSettings,
) -> Result<(ContinualModel, StreamResult)> {
    settings.train.validate()?;
    let cfg = &settings.train;
    let mut class_il = AccuracyMatrix::new(EvalMode::ClassIl);
    let mut task_il = AccuracyMatrix::new(EvalMode::TaskIl);

    let (mut model, rest) = match settings.mode {
        TrainingMode::WithPretraining => {
            let reference =
                reference.ok_or_else(|| Error::InvalidConfig("with_pretraining needs a reference task".into()))?;
            if stream.is_empty() {
                return Err(Error::InsufficientTasks { needed: 1, got: 0 });
            }
            let backbone = train_reference(&settings.network, reference, cfg)?;
            (ContinualModel::new(backbone, settings.mode), stream)
        }
        TrainingMode::WithoutPretraining => {
            if stream.len() < 2 {
                return Err(Error::InsufficientTasks { needed: 2, got: stream.len() });
            }
            let backbone = train_reference(&settings.network, &stream[0], cfg)?;
            let mut model = ContinualModel::new(backbone, settings.mode);
            model.adopt_reference_task()?;
            let m = &model;
            record_stage(
                stream,
                1,
                &mut class_il,
                &mut task_il,
                |i, x| infer_task_il(m, x, i),
                |x| infer_class_il(m, x),
            )?;
            (model, &stream[1..])
        }
    };

    for task in rest {
        learn_task(&mut model, task, cfg, &settings.learn)?;
        let t = model.subnetworks.len();
        let m = &model;
        record_stage(stream, t, &mut class_il, &mut task_il, |i, x| infer_task_il(m, x, i), |x| infer_class_il(m, x))?;
    }
    let params = count_params(&model);
    Ok((model, StreamResult { class_il, task_il, params }))
}
